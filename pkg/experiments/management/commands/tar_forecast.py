from experiments.management.base import ExperimentCommand
from experiments.reports import summary_table
from experiments.serializers import TarForecastConfigSerializer
from forecasting.comparison import series_labels
from forecasting.services import ForecastService
from regression.serializers import RegressionFitSerializer


class Command(ExperimentCommand):
    help = 'Fit a tensor autoregression and forecast the next steps recursively'
    config_serializer = TarForecastConfigSerializer

    def add_run_arguments(self, parser):
        parser.add_argument('--y', help='Series tensor (DTF1 or long CSV), time first')
        parser.add_argument('--y-columns', help='CSV mode columns, comma-separated, time column first')
        parser.add_argument('--lag', type=int, help='Number of lags')
        parser.add_argument('--horizons', type=int, help='Steps to forecast')
        self.add_regression_arguments(parser)

    def run(self, serializer, writer, echo):
        config = serializer.validated_data
        y = self.load(config['y'], config['y_columns'], config)
        model = ForecastService.fit_tar(y.tensor, config['lag'], serializer.regression_spec(), labels=y.series_labels)
        forecasts = ForecastService.forecast_recursive(model, y.tensor, config['horizons'])

        names = series_labels(model.series_shape, y.series_labels)
        steps = forecasts.data.reshape((forecasts.shape[0], -1), order='F')
        rows = [
            {'horizon': h + 1, 'series': name, 'forecast': steps[h, index]}
            for h in range(steps.shape[0]) for index, name in enumerate(names)
        ]
        writer.write_csv('forecasts.csv', rows)
        writer.write_tensor('forecasts.dtf', forecasts)
        writer.write_json('tar.json', {
            'lag': model.lag,
            'series_shape': list(model.series_shape),
            'fit': RegressionFitSerializer(model.fit, context={'timings': writer.timestamp}).data,
        }, config=echo)
        self.stdout.write(summary_table(rows[:min(len(rows), 3 * len(names))]))
