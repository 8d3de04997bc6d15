from experiments.management.base import ExperimentCommand
from experiments.reports import summary_table
from experiments.serializers import CompareConfigSerializer
from forecasting.comparison import compare_models
from forecasting.serializers import ComparisonReportSerializer


class Command(ExperimentCommand):
    help = 'TAR against per-block VAR(1): RMSFE by horizon and Diebold-Mariano tests per series'
    config_serializer = CompareConfigSerializer

    def add_run_arguments(self, parser):
        parser.add_argument('--y', help='Series tensor (DTF1 or long CSV), time first')
        parser.add_argument('--y-columns', help='CSV mode columns, comma-separated, time column first')
        parser.add_argument('--split', help='Train, optimisation and test fractions (default 0.7,0.2,0.1)')
        parser.add_argument('--ranks', help='TAR rank grid, e.g. 1x1x1x1,2x2x2x2')
        parser.add_argument('--lambdas', help='TAR ridge grid')
        parser.add_argument('--horizons', type=int, help='Forecast horizons 1..H')
        parser.add_argument('--lag', type=int, help='TAR lags')
        parser.add_argument('--block-mode', type=int,
                            help='Series mode whose slices get separate VAR(1) fits (default: the last series mode)')
        parser.add_argument('--alpha', type=float, help='DM test level')
        self.add_regression_arguments(parser, rank=False)

    def run(self, serializer, writer, echo):
        config = serializer.validated_data
        y = self.load(config['y'], config['y_columns'], config)
        ranks = config['ranks']
        report = compare_models(
            y.tensor, split=config['split'], ranks=ranks, lambdas=config['lambdas'], horizons=config['horizons'],
            lag=config['lag'], block_mode=config.get('block_mode'), base_spec=serializer.regression_spec(rank=ranks[0]),
            alpha=config['alpha'], labels=y.series_labels, jobs=config['jobs'],
        )

        writer.write_csv('dm.csv', report.rows())
        writer.write_csv('optimisation_grid.csv', report.selection.rows())
        writer.write_json('comparison.json', {'comparison': ComparisonReportSerializer(report).data}, config=echo)
        summary = report.rejection_summary()
        self.stdout.write(summary_table([summary]))
