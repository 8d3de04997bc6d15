from pathlib import Path
from decouple import config
import dj_database_url

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='django-insecure-dev-key')
DEBUG = config('DEBUG', default=False, cast=bool)
ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost').split(',')

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'django_celery_results',
    'tensors',
    'regression',
    'selection',
    'simulation',
    'forecasting',
    'residuals',
    'experiments',
]

# Run ledger and Celery results only
DATABASES = {
    'default': dj_database_url.config(
        default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}",
        conn_max_age=600,
    )
}

# Redis is only the Celery broker
REDIS_HOST = config('REDIS_HOST', default='localhost')
REDIS_PORT = config('REDIS_PORT', default=6379, cast=int)

# Celery Configuration
CELERY_BROKER_URL = config('CELERY_BROKER_URL', default=f'redis://{REDIS_HOST}:{REDIS_PORT}/1')
CELERY_RESULT_BACKEND = 'django-db'
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = 'UTC'
CELERY_TASK_TRACK_STARTED = True
CELERY_TASK_TIME_LIMIT = 60 * 60
CELERY_TASK_ALWAYS_EAGER = config('CELERY_TASK_ALWAYS_EAGER', default=False, cast=bool)
CELERY_WORKER_PREFETCH_MULTIPLIER = 1
CELERY_WORKER_MAX_TASKS_PER_CHILD = 200

# REST Framework (serializers and renderers only)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': ['rest_framework.renderers.JSONRenderer'],
    'COERCE_DECIMAL_TO_STRING': False,
}

# Numerical defaults
DEFAULT_SEED = config('TENSORREG_SEED', default=0, cast=int)
ALS_MAX_ITERS = config('ALS_MAX_ITERS', default=500, cast=int)
ALS_TOL = config('ALS_TOL', default=1e-6, cast=float)
PINV_RCOND = config('PINV_RCOND', default=1e-10, cast=float)
HOSVD_MAX_FEATURES = config('HOSVD_MAX_FEATURES', default=4096, cast=int)
PERFECT_FIT_RTOL = config('PERFECT_FIT_RTOL', default=1e-20, cast=float)
FLIP_FLOP_MAX_ITERS = config('FLIP_FLOP_MAX_ITERS', default=200, cast=int)
FLIP_FLOP_TOL = config('FLIP_FLOP_TOL', default=1e-8, cast=float)
DM_ALPHA = config('DM_ALPHA', default=0.05, cast=float)

# Experiment runs
OUTPUT_DIR = Path(config('OUTPUT_DIR', default=str(BASE_DIR / 'runs')))
RECORD_RUNS = config('RECORD_RUNS', default=True, cast=bool)

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'console': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'console',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': config('LOG_LEVEL', default='INFO'),
    },
    'loggers': {
        'celery': {'level': 'WARNING'},
    },
}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
