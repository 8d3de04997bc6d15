import numpy as np
import pytest

from regression.factories import RegressionSpecFactory
from tensors.algebra import unfold_array
from tensors.exceptions import InvalidDataError, InvalidScenarioError

from .domain import ArrayNormalSpec, CollinearRegressionScenario
from .experiments import run_collinearity_experiment, run_collinearity_study, run_recovery_experiment
from .services import SimulationService, replicate_seed


def _lag_one_correlation(x, axis):
    a = np.take(x, np.arange(x.shape[axis] - 1), axis=axis).ravel()
    b = np.take(x, np.arange(1, x.shape[axis]), axis=axis).ravel()
    return np.corrcoef(a, b)[0, 1]


def _small_scenario(snr, seed):
    return CollinearRegressionScenario(
        array_normal=ArrayNormalSpec(shape=(100, 3, 4), rhos=(0.1, 0.6, 0.3), seed=seed),
        true_rank=(1, 2, 1, 2),
        snr=snr,
        seed=seed,
    )


class TestArrayNormal:
    def test_zero_correlation_is_plain_standard_normal(self):
        spec = ArrayNormalSpec(shape=(5, 3, 2), rhos=(0.0, 0.0, 0.0), seed=8)
        expected = np.random.default_rng(8).standard_normal((5, 3, 2))
        np.testing.assert_array_equal(SimulationService.generate_array_normal(spec).data, expected)

    def test_zero_correlation_has_unit_variance(self):
        spec = ArrayNormalSpec(shape=(20000, 3, 2), rhos=(0.0, 0.0, 0.0), seed=1)
        x = SimulationService.generate_array_normal(spec).data
        stderr = np.sqrt(2.0 / x.size)
        assert abs(np.mean(x ** 2) - 1.0) < 3 * stderr

    def test_strong_mode_correlation_is_recovered(self):
        spec = ArrayNormalSpec(shape=(50000, 4, 2), rhos=(0.0, 0.95, 0.0), seed=2)
        x = SimulationService.generate_array_normal(spec).data
        assert abs(_lag_one_correlation(x, 1) - 0.95) < 0.02

    def test_macro_design_orders_mode_correlations(self):
        spec = ArrayNormalSpec(shape=(100, 6, 19), rhos=(0.1, 0.95, 0.8), seed=3)
        x = SimulationService.generate_array_normal(spec).data
        sample, first, second = (_lag_one_correlation(x, axis) for axis in range(3))
        assert first > second > sample

    def test_is_deterministic(self):
        spec = ArrayNormalSpec(shape=(10, 3), rhos=(0.5, 0.2), seed=4)
        first = SimulationService.generate_array_normal(spec).data
        np.testing.assert_array_equal(SimulationService.generate_array_normal(spec).data, first)

    def test_rejects_unit_correlation(self):
        with pytest.raises(InvalidScenarioError):
            ArrayNormalSpec(shape=(10, 3), rhos=(0.0, 1.0))

    def test_covariance_is_toeplitz_power(self):
        spec = ArrayNormalSpec(shape=(10, 3), rhos=(0.0, 0.5))
        np.testing.assert_allclose(spec.covariance(1), [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])


class TestScaleToSnr:
    def test_equal_tensors(self, rng):
        a = rng.standard_normal((4, 3))
        assert SimulationService.scale_to_snr(a, a, 1.0) == pytest.approx(1.0, rel=1e-14)

    def test_equal_norms_target_four(self):
        assert SimulationService.scale_to_snr(np.array([3.0, 4.0]), np.array([0.0, 5.0]), 4.0) == pytest.approx(2.0)

    def test_realized_ratio_is_exact(self, rng):
        signal, noise = rng.standard_normal((6, 5)), rng.standard_normal((6, 5))
        kappa = SimulationService.scale_to_snr(signal, noise, 5.0)
        assert abs(np.sum((kappa * signal) ** 2) / np.sum(noise ** 2) - 5.0) < 1e-10

    def test_zero_signal(self, rng):
        with pytest.raises(InvalidDataError):
            SimulationService.scale_to_snr(np.zeros(3), rng.standard_normal(3), 1.0)


class TestCoefficientGenerators:
    def test_random_tucker_tensor_has_requested_multilinear_rank(self, rng):
        b = SimulationService.random_tucker_tensor((6, 7, 5), (2, 3, 2), rng).data
        assert b.shape == (6, 7, 5)
        assert [np.linalg.matrix_rank(unfold_array(b, k)) for k in range(3)] == [2, 3, 2]

    def test_smooth_pattern_is_low_rank(self):
        pattern = SimulationService.smooth_pattern(60, 48, 3, rng=np.random.default_rng(5)).data
        assert pattern.shape == (60, 48, 3)
        assert all(np.linalg.matrix_rank(unfold_array(pattern, k), tol=1e-8) <= 3 for k in range(3))

    def test_replicate_seeds_are_distinct_and_stable(self):
        seeds = [replicate_seed(7, index) for index in range(5)]
        assert len(set(seeds)) == 5
        assert seeds == [replicate_seed(7, index) for index in range(5)]


class TestRecoveryExperiment:
    def test_noise_free_tucker_coefficient_selects_true_rank(self, rng):
        true_b = SimulationService.random_tucker_tensor((6, 5, 4), (2, 2, 2), rng)
        report = run_recovery_experiment(
            true_b, n_samples=60, noise_sd=0.0, rank_grid=[(1, 1, 1), (2, 2, 2), (3, 3, 3)],
            base_spec=RegressionSpecFactory(init='hosvd'),
        )
        assert report.best_cell.rank == (2, 2, 2)
        assert report.best_cell.relative_error < 1e-6
        assert report.estimate.shape == (6, 5, 4)

    def test_full_rank_without_noise_is_exact(self, rng):
        true_b = rng.standard_normal((4, 3, 2))
        report = run_recovery_experiment(true_b, n_samples=40, noise_sd=0.0, rank_grid=[(4, 3, 2)])
        assert report.best_cell.relative_error < 1e-8
        assert report.best_cell.compression == pytest.approx(1.0 - (24 + 16 + 9 + 4) / 24)

    def test_rejects_too_many_input_modes(self, rng):
        with pytest.raises(InvalidScenarioError):
            run_recovery_experiment(rng.standard_normal((3, 2)), 10, 1.0, [(1, 1)], n_input_modes=2)

    @pytest.mark.slow
    def test_smooth_pattern_is_compressed(self):
        true_b = SimulationService.smooth_pattern(60, 48, 3, rng=np.random.default_rng(11))
        ranks = [(r, r, c) for r in (2, 3, 4, 6) for c in (2, 3)]
        report = run_recovery_experiment(
            true_b, n_samples=250, noise_sd=1.0, rank_grid=ranks, seed=11,
            base_spec=RegressionSpecFactory(init='hosvd', tol=1e-6),
        )
        assert report.best_cell.compression > 0.5
        assert report.best_cell.relative_error < 0.25


class TestCollinearityExperiment:
    def test_holdout_draw_shares_the_coefficient(self):
        scenario = _small_scenario(1.0, seed=3)
        result = run_collinearity_experiment(scenario, [(1, 2, 1, 2)], [0.0])
        assert abs(result.realized_snr - 1.0) < 1e-10
        assert result.report.scoring == 'holdout'
        assert result.report.best_cell.u == 100 * 3 * 4

    def test_is_reproducible(self):
        ranks, lambdas = [(1, 1, 1, 1), (1, 2, 1, 2)], [0.0, 5.0]
        first = run_collinearity_experiment(_small_scenario(5.0, seed=6), ranks, lambdas)
        second = run_collinearity_experiment(_small_scenario(5.0, seed=6), ranks, lambdas)
        assert [c.bic for c in first.report.cells] == [c.bic for c in second.report.cells]

    def test_null_signal_leaves_holdout_energy_unexplained(self):
        scenario = _small_scenario(1e-6, seed=12)
        result = run_collinearity_experiment(scenario, [(1, 1, 1, 1), (2, 2, 2, 2)], [0.0, 5.0, 50.0])
        ratio = result.report.best_cell.ssr / result.holdout_energy
        assert 0.95 <= ratio <= 1.10

    def test_table_layout_has_one_row_per_lambda(self):
        result = run_collinearity_experiment(_small_scenario(1.0, seed=4), [(1, 1, 1, 1), (1, 2, 1, 2)], [0.0, 0.5, 5.0])
        rows = result.table_one()
        assert [row['lambda'] for row in rows] == [0.0, 0.5, 5.0]
        for row in rows:
            cells = [c for c in result.report.cells if c.lam == row['lambda']]
            assert row['bic'] == min(c.bic for c in cells)
            assert (row['f'], row['g']) in {(1, 1), (1, 2)}

    def test_study_frequency_table_counts_every_replicate(self):
        study = run_collinearity_study(
            1.0, seeds=3, rank_grid=[(1, 1, 1, 1), (1, 2, 1, 2)], lambda_grid=[0.0, 5.0], seed=2,
            scenario_factory=_small_scenario,
        )
        table = study.frequency_table()
        assert sum(row['count'] for row in table) == 3
        assert sum(row['frequency'] for row in table) == pytest.approx(1.0)
        assert len(study.selections()) == 3
        assert len({row['seed'] for row in study.selections()}) == 3

    @pytest.mark.slow
    def test_low_snr_macro_design_selects_true_rank_with_mild_penalty(self):
        """Reduced scale: 5 replicates rather than 20"""
        study = run_collinearity_study(1.0, seeds=5, seed=11)
        hits = [row for row in study.selections() if (row['f'], row['g']) == (2, 3) and row['lambda'] in (0.5, 1.0)]
        assert len(hits) >= 3

    @pytest.mark.slow
    def test_high_snr_macro_design_selects_largest_penalty_and_smallest_input_rank(self):
        """Reduced scale: 5 replicates rather than 20"""
        study = run_collinearity_study(5.0, seeds=5, seed=11)
        hits = [row for row in study.selections() if row['lambda'] == 50.0 and row['f'] == 1]
        assert len(hits) >= 3
