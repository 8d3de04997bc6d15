from experiments.management.base import ExperimentCommand
from experiments.reports import summary_table
from experiments.serializers import FitConfigSerializer
from regression.serializers import RegressionFitSerializer
from regression.services import TuckerRegressionService


class Command(ExperimentCommand):
    help = 'Fit a Tucker tensor-on-tensor regression by alternating least squares'
    config_serializer = FitConfigSerializer

    def add_run_arguments(self, parser):
        parser.add_argument('--x', help='Regressor tensor (DTF1 or long CSV), samples first')
        parser.add_argument('--y', help='Response tensor (DTF1 or long CSV), samples first')
        parser.add_argument('--x-columns', help='CSV mode columns of x, comma-separated, sample column first')
        parser.add_argument('--y-columns', help='CSV mode columns of y, comma-separated, sample column first')
        self.add_regression_arguments(parser)

    def run(self, serializer, writer, echo):
        config = serializer.validated_data
        x = self.load(config['x'], config['x_columns'], config)
        y = self.load(config['y'], config['y_columns'], config)
        fit = TuckerRegressionService.fit(x.tensor, y.tensor, serializer.regression_spec())

        context = {'timings': writer.timestamp}
        writer.write_json('fit.json', {'fit': RegressionFitSerializer(fit, context=context).data}, config=echo)
        writer.write_tensor('coefficient.dtf', fit.coefficient.reconstruct())
        writer.write_tensor('intercept.dtf', fit.intercept)
        writer.write_csv('objective_trace.csv', [
            {'iteration': i, 'objective': value} for i, value in enumerate(fit.objective_trace)
        ])
        self.stdout.write(summary_table([{
            'rank': 'x'.join(str(r) for r in fit.coefficient.tucker_rank),
            'lambda': fit.lam,
            'ssr': fit.ssr,
            'iterations': fit.iterations,
            'converged': fit.converged,
            'parameters': fit.parameter_count,
        }]))
