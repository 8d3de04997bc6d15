import json
import logging
from pathlib import Path
from typing import Dict, Optional

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError
from prometheus_client import Counter
from rest_framework import serializers

from experiments.ingest import IngestedTensor, load_tensor
from experiments.models import ExperimentRun
from experiments.reports import ReportWriter, plain, write_metrics
from experiments.runconfig import load_config_file, merge_config
from tensors.exceptions import InvalidConfigError, TensorRegError

logger = logging.getLogger(__name__)

command_runs = Counter('tensorreg_command_runs_total', 'Experiment command runs', ['command', 'status'])

# Resolved but left out of report echoes
UNECHOED_KEYS = ('output_dir', 'jobs')


class ExperimentCommand(BaseCommand):
    """
    Shared surface of the experiment commands

    Subclasses declare ``config_serializer`` and implement ``add_run_arguments``
    and ``run``. Flags named after serializer fields override the --config file.
    """
    config_serializer = None

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit('.', 1)[-1]

    def add_arguments(self, parser):
        parser.add_argument('--config', help='key=value settings file; flags override it')
        parser.add_argument('--seed', type=int, help='Seed for every random draw (default: TENSORREG_SEED)')
        parser.add_argument('--output-dir', help='Directory for reports (default: OUTPUT_DIR/<command>)')
        parser.add_argument('--no-timestamp', action='store_true', help='Omit generated_at and timings from JSON')
        parser.add_argument('--jobs', type=int, help='Grid cells evaluated in parallel through Celery')
        parser.add_argument('--metrics-textfile', help='Write Prometheus metrics to this file')
        parser.add_argument('--fill', help='Missing CSV cells: error, zero or mean')
        parser.add_argument('--order', help='CSV label order: first-seen or lexicographic')
        parser.add_argument('--value-column', help='CSV value column (default: value)')
        self.add_run_arguments(parser)

    def add_run_arguments(self, parser):
        pass

    def add_regression_arguments(self, parser, rank: bool = True):
        if rank:
            parser.add_argument('--rank', help='Tucker rank, e.g. 2x3x2x3')
        parser.add_argument('--lam', type=float, help='Ridge penalty lambda')
        parser.add_argument('--max-iters', type=int, help='ALS sweep limit')
        parser.add_argument('--tol', type=float, help='Relative objective change at convergence')
        parser.add_argument('--init', help='ALS start: random or hosvd')
        parser.add_argument('--regularize-core', action='store_true', default=None, help='Ridge on the core too')
        parser.add_argument('--no-center', action='store_false', dest='center', default=None,
                            help='Fit without an intercept')

    def resolve_config(self, options) -> serializers.Serializer:
        fields = self.config_serializer().fields
        file_values = load_config_file(options.get('config'))
        unknown = sorted(set(file_values) - set(fields))
        if unknown:
            raise InvalidConfigError(f"Unknown setting(s) for {self.command_name}: {unknown}")
        merged = merge_config(file_values, {k: v for k, v in options.items() if k in fields})
        serializer = self.config_serializer(data=merged)
        if not serializer.is_valid():
            raise InvalidConfigError(f"Invalid {self.command_name} configuration: {json.dumps(serializer.errors)}")
        return serializer

    def load(self, path: str, columns, config: Dict) -> IngestedTensor:
        return load_tensor(path, columns, config['value_column'], fill=config['fill'], order=config['order'])

    def start_run(self, echo: Dict, output_dir: Path) -> Optional[ExperimentRun]:
        if not settings.RECORD_RUNS:
            return None
        try:
            return ExperimentRun.objects.create(
                command=self.command_name, config=echo, seed=echo.get('seed'), output_dir=str(output_dir),
            )
        except DatabaseError as e:
            logger.warning(f"Run ledger unavailable, not recording this run: {e}")
            return None

    def handle(self, *args, **options):
        run = None
        try:
            serializer = self.resolve_config(options)
            config = serializer.validated_data
            output_dir = Path(config.get('output_dir') or Path(settings.OUTPUT_DIR) / self.command_name)
            echo = plain({k: v for k, v in serializer.data.items() if k not in UNECHOED_KEYS})
            run = self.start_run(echo, output_dir)
            writer = ReportWriter(output_dir, timestamp=not options['no_timestamp'])
            self.run(serializer, writer, echo)
        except TensorRegError as e:
            record = {'error': type(e).__name__, 'message': str(e), 'exit_code': e.exit_code}
            self.stderr.write(json.dumps(record), style_func=lambda text: text)
            logger.error(f"{self.command_name} failed: {e}")
            command_runs.labels(command=self.command_name, status='failed').inc()
            if run is not None:
                run.mark_failed(e.exit_code, str(e))
            raise CommandError(str(e), returncode=e.exit_code)
        except Exception as e:
            command_runs.labels(command=self.command_name, status='failed').inc()
            if run is not None:
                run.mark_failed(1, str(e))
            raise
        else:
            command_runs.labels(command=self.command_name, status='succeeded').inc()
            if run is not None:
                run.mark_succeeded()
            self.stdout.write(self.style.SUCCESS(
                f"{self.command_name} finished, {len(writer.written)} file(s) in {output_dir}"
            ))
        finally:
            if options.get('metrics_textfile'):
                write_metrics(options['metrics_textfile'])

    def run(self, serializer, writer: ReportWriter, echo: Dict):
        raise NotImplementedError
