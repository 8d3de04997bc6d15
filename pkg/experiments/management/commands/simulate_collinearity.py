from experiments.management.base import ExperimentCommand
from experiments.reports import summary_table
from experiments.serializers import SimulateCollinearityConfigSerializer
from simulation.domain import ArrayNormalSpec, CollinearRegressionScenario
from simulation.experiments import run_collinearity_study


class Command(ExperimentCommand):
    help = 'Rank and ridge selection under collinear array-normal regressors, repeated over seeds'
    config_serializer = SimulateCollinearityConfigSerializer

    def add_run_arguments(self, parser):
        parser.add_argument('--snr', type=float, help='Signal-to-noise ratio of the training draw')
        parser.add_argument('--seeds', type=int, help='Number of replicates')
        parser.add_argument('--shape', help='Regressor shape with samples first (default 100x6x19)')
        parser.add_argument('--rhos', help='AR(1) correlation per mode (default 0.1,0.95,0.8)')
        parser.add_argument('--true-rank', help='Tucker rank of the true coefficient (default 2x3x2x3)')
        parser.add_argument('--ranks', help='Rank grid (default [f, g, f, g], f in 1..3, g in 1..4)')
        parser.add_argument('--lambdas', help='Ridge grid (default 0,0.5,1,5,50)')
        self.add_regression_arguments(parser, rank=False)

    def run(self, serializer, writer, echo):
        config = serializer.validated_data

        def scenario(snr, seed):
            return CollinearRegressionScenario(
                array_normal=ArrayNormalSpec(shape=config['shape'], rhos=config['rhos'], seed=seed),
                true_rank=config['true_rank'],
                snr=snr,
                seed=seed,
            )

        ranks = config['ranks']
        study = run_collinearity_study(
            config['snr'], config['seeds'], ranks, config['lambdas'], seed=config['seed'],
            scenario_factory=scenario, base_spec=serializer.regression_spec(rank=ranks[0]), jobs=config['jobs'],
        )

        frequency = study.frequency_table()
        table_one = [
            dict(replicate=index, **row)
            for index, result in enumerate(study.results) for row in result.table_one()
        ]
        writer.write_csv('selections.csv', study.selections())
        writer.write_csv('frequency.csv', frequency)
        writer.write_csv('bic_by_lambda.csv', table_one)
        writer.write_json('collinearity.json', {
            'snr': study.snr,
            'replicates': len(study.results),
            'frequency': frequency,
        }, config=echo)
        self.stdout.write(summary_table(frequency))
