from experiments.management.base import ExperimentCommand
from experiments.reports import summary_table
from experiments.serializers import SelectConfigSerializer
from selection.serializers import SelectionReportSerializer
from selection.services import ModelSelectionService


class Command(ExperimentCommand):
    help = 'BIC grid search over Tucker ranks and ridge penalties'
    config_serializer = SelectConfigSerializer

    def add_run_arguments(self, parser):
        parser.add_argument('--x', help='Regressor tensor (DTF1 or long CSV), samples first')
        parser.add_argument('--y', help='Response tensor (DTF1 or long CSV), samples first')
        parser.add_argument('--x-val', help='Holdout regressors for --scoring holdout')
        parser.add_argument('--y-val', help='Holdout responses for --scoring holdout')
        parser.add_argument('--x-columns', help='CSV mode columns of x, comma-separated, sample column first')
        parser.add_argument('--y-columns', help='CSV mode columns of y, comma-separated, sample column first')
        parser.add_argument('--ranks', help='Rank grid, e.g. 1x1x1x1,2x2x2x2')
        parser.add_argument('--symmetric-ranks', help='[f, g, f, g] grid from ranges, e.g. 1-3;1-4')
        parser.add_argument('--lambdas', help='Ridge grid, e.g. 0,0.5,1,5,50')
        parser.add_argument('--scoring', help='train or holdout')
        parser.add_argument('--u-mode', help='BIC data count: entries or samples')
        self.add_regression_arguments(parser, rank=False)

    def run(self, serializer, writer, echo):
        config = serializer.validated_data
        x = self.load(config['x'], config['x_columns'], config)
        y = self.load(config['y'], config['y_columns'], config)
        x_val = y_val = None
        if config['scoring'] == 'holdout':
            x_val = self.load(config['x_val'], config['x_columns'], config).tensor
            y_val = self.load(config['y_val'], config['y_columns'], config).tensor

        ranks = serializer.rank_grid
        report = ModelSelectionService.grid_search(
            x.tensor, y.tensor, ranks, config['lambdas'], scoring=config['scoring'], x_val=x_val, y_val=y_val,
            base_spec=serializer.regression_spec(rank=ranks[0]), u_mode=config['u_mode'], jobs=config['jobs'],
        )

        rows = report.rows()
        writer.write_csv('grid.csv', rows)
        writer.write_json('best.json', {'selection': SelectionReportSerializer(report).data}, config=echo)
        writer.write_tensor('best_coefficient.dtf', report.best_fit.coefficient.reconstruct())
        self.stdout.write(summary_table(rows))
