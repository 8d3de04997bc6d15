import logging

import numpy as np

from experiments.management.base import ExperimentCommand
from experiments.reports import summary_table
from experiments.serializers import SimulateRecoveryConfigSerializer
from simulation.experiments import run_recovery_experiment
from simulation.services import SimulationService
from tensors.exceptions import InvalidScenarioError

logger = logging.getLogger(__name__)


class Command(ExperimentCommand):
    help = 'Recover a known coefficient from synthetic data and score every rank by BIC'
    config_serializer = SimulateRecoveryConfigSerializer

    def add_run_arguments(self, parser):
        parser.add_argument('--pattern', help='tucker (random low-rank) or smooth (picture-like, 3 modes)')
        parser.add_argument('--shape', help='Coefficient shape, e.g. 6x5x4 or 60x48x3')
        parser.add_argument('--true-rank', help='Multilinear rank of the tucker pattern')
        parser.add_argument('--input-modes', type=int, help='Leading coefficient modes that are regressor modes')
        parser.add_argument('--samples', type=int, help='Sample count')
        parser.add_argument('--noise-sd', type=float, help='Response noise standard deviation')
        parser.add_argument('--ranks', help='Rank grid, e.g. 1x1x1,2x2x2')
        parser.add_argument('--symmetric-ranks', help='[f, g, f, g] grid from ranges, e.g. 1-3;1-4')
        parser.add_argument('--lambdas', help='Ridge grid')
        self.add_regression_arguments(parser, rank=False)

    def run(self, serializer, writer, echo):
        config = serializer.validated_data
        rng = np.random.default_rng(np.random.SeedSequence([config['seed'], 0]))
        if config['pattern'] == 'smooth':
            if len(config['shape']) != 3:
                raise InvalidScenarioError(f"The smooth pattern has 3 modes, got shape {list(config['shape'])}")
            true_b = SimulationService.smooth_pattern(*config['shape'], rng=rng)
        else:
            true_b = SimulationService.random_tucker_tensor(config['shape'], config['true_rank'], rng)

        if config['jobs'] > 1:
            logger.info('Recovery scores every cell coefficient, evaluating the grid in-process')
        ranks = serializer.rank_grid
        report = run_recovery_experiment(
            true_b, config['samples'], config['noise_sd'], ranks, n_input_modes=config['input_modes'],
            lambdas=config['lambdas'], seed=config['seed'], base_spec=serializer.regression_spec(rank=ranks[0]),
        )

        rows = report.rows()
        best = report.best_cell
        writer.write_csv('recovery.csv', rows)
        writer.write_json('recovery.json', {
            'coefficient_shape': list(report.coefficient_shape),
            'n_input_modes': report.n_input_modes,
            'best': {
                'rank': list(best.rank),
                'lambda': best.lam,
                'bic': best.bic,
                'compression': best.compression,
                'relative_error': best.relative_error,
            },
        }, config=echo)
        writer.write_tensor('true_coefficient.dtf', true_b)
        writer.write_tensor('estimate.dtf', report.estimate)
        self.stdout.write(summary_table(rows))
