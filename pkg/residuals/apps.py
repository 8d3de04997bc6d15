from django.apps import AppConfig


class ResidualsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'residuals'
