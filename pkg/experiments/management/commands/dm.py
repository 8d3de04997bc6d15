from experiments.ingest import read_series_csv
from experiments.management.base import ExperimentCommand
from experiments.reports import summary_table
from experiments.serializers import DmConfigSerializer
from forecasting.serializers import DmResultSerializer
from forecasting.significance import dm_test


class Command(ExperimentCommand):
    help = 'Diebold-Mariano test of equal squared-error accuracy for two forecast error series'
    config_serializer = DmConfigSerializer

    def add_run_arguments(self, parser):
        parser.add_argument('--fe1', help='CSV of model 1 forecast errors')
        parser.add_argument('--fe2', help='CSV of model 2 forecast errors')
        parser.add_argument('--column', help='Column holding the errors when the files have several')
        parser.add_argument('--h', type=int, help='Forecast horizon of the errors')
        parser.add_argument('--alpha', type=float, help='Test level')

    def run(self, serializer, writer, echo):
        config = serializer.validated_data
        fe1 = read_series_csv(config['fe1'], config.get('column'))
        fe2 = read_series_csv(config['fe2'], config.get('column'))
        result = dm_test(fe1, fe2, config['h'], alpha=config['alpha'])
        data = DmResultSerializer(result).data
        writer.write_json('dm.json', {'result': data}, config=echo)
        self.stdout.write(summary_table([dict(data)]))
