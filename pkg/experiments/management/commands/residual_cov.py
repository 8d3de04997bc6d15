from experiments.management.base import ExperimentCommand
from experiments.reports import summary_table
from experiments.serializers import ResidualCovConfigSerializer
from regression.services import TuckerRegressionService
from residuals.serializers import BiplotSerializer, SeparableCorrelationSetSerializer
from residuals.services import ResidualAnalysisService


class Command(ExperimentCommand):
    help = 'Separable residual correlations by flip-flop, with PCA biplot coordinates per mode'
    config_serializer = ResidualCovConfigSerializer

    def add_run_arguments(self, parser):
        parser.add_argument('--residuals', help='Residual tensor (DTF1 or long CSV), samples first')
        parser.add_argument('--residual-columns', help='CSV mode columns of the residuals')
        parser.add_argument('--x', help='Regressors, to fit the model whose residuals are analysed')
        parser.add_argument('--y', help='Responses, to fit the model whose residuals are analysed')
        parser.add_argument('--x-columns', help='CSV mode columns of x')
        parser.add_argument('--y-columns', help='CSV mode columns of y')
        parser.add_argument('--include-sample-mode', action='store_true', default=None,
                            help='Estimate the sample-mode correlation as well')
        parser.add_argument('--flip-flop-max-iters', type=int, help='Flip-flop sweep limit')
        parser.add_argument('--flip-flop-tol', type=float, help='Flip-flop relative change at convergence')
        self.add_regression_arguments(parser)

    def run(self, serializer, writer, echo):
        config = serializer.validated_data
        if config.get('residuals'):
            source = self.load(config['residuals'], config['residual_columns'], config)
            residuals = source.tensor
        else:
            x = self.load(config['x'], config['x_columns'], config)
            source = self.load(config['y'], config['y_columns'], config)
            fit = TuckerRegressionService.fit(x.tensor, source.tensor, serializer.regression_spec())
            residuals = ResidualAnalysisService.residuals_from_fit(fit, x.tensor, source.tensor)
            writer.write_tensor('residuals.dtf', residuals)

        correlations = ResidualAnalysisService.flip_flop(
            residuals, max_iters=config['flip_flop_max_iters'], tol=config['flip_flop_tol'],
            include_sample_mode=config['include_sample_mode'], labels=source.series_labels,
        )
        biplots = []
        for mode in correlations.modes:
            writer.write_csv(f'correlation_mode{mode}.csv', correlations.matrix_rows(mode))
            biplot = ResidualAnalysisService.correlation_pca(
                correlations.correlation(mode), labels=correlations.mode_labels(mode), mode=mode,
            )
            writer.write_csv(f'biplot_mode{mode}.csv', biplot.rows())
            biplots.append(biplot)

        writer.write_json('residual_cov.json', {
            'correlations': SeparableCorrelationSetSerializer(correlations).data,
            'biplots': BiplotSerializer(biplots, many=True).data,
        }, config=echo)
        self.stdout.write(summary_table([
            {'mode': b.mode, 'size': len(b.labels), 'pc1_share': b.explained_variance[0],
             'pc2_share': b.explained_variance[1] if len(b.labels) > 1 else 0.0}
            for b in biplots
        ]))
