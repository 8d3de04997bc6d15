import math

import numpy as np
import pytest
from scipy import stats

from regression.domain import RegressionFit, TuckerCoefficient
from regression.factories import RegressionSpecFactory
from regression.services import TuckerRegressionService
from tensors.dense import DenseTensor
from tensors.exceptions import InsufficientSamplesError, InvalidConfigError

from .comparison import compare_models, split_lengths
from .domain import TarModel
from .services import ForecastService, lagged_design, rmsfe
from .significance import dm_test


def _rank_one_tar(rng, shape, norm):
    """Rank-one TAR(1) coefficient whose matricization has spectral norm ``norm``"""
    vectors = [v / np.linalg.norm(v) for v in (rng.standard_normal(s) for s in shape + shape)]
    return norm * np.einsum('a,b,c,d->abcd', *vectors)


def _simulate_tar(rng, slope, samples, noise_sd=1.0, burn_in=100):
    shape = slope.shape[:slope.ndim // 2]
    y = np.zeros((samples + burn_in,) + shape)
    for t in range(1, samples + burn_in):
        y[t] = np.tensordot(y[t - 1], slope, axes=len(shape)) + noise_sd * rng.standard_normal(shape)
    return y[burn_in:]


def _cross_block_tar(rng, samples, blocks=5, per_block=3, scale=3.0):
    """Block 0 drives every other block one step later; no block predicts itself"""
    u = np.zeros((per_block, blocks))
    u[:, 0] = rng.standard_normal(per_block)
    v = np.zeros((per_block, blocks))
    v[:, 1:] = rng.standard_normal((per_block, blocks - 1))
    slope = scale * np.einsum('ab,cd->abcd', u / np.linalg.norm(u), v / np.linalg.norm(v))
    return _simulate_tar(rng, slope, samples)


def _per_block_var(rng, samples, blocks=5, per_block=3, phi=0.3, burn_in=100):
    """Independent VAR(1) per slice of the last mode, no links across slices"""
    dynamics = [phi * np.eye(per_block) + 0.1 * rng.standard_normal((per_block, per_block)) for _ in range(blocks)]
    y = np.zeros((samples + burn_in, per_block, blocks))
    for t in range(1, samples + burn_in):
        for b, a in enumerate(dynamics):
            y[t, :, b] = a @ y[t - 1, :, b] + rng.standard_normal(per_block)
    return y[burn_in:]


def _constant_model(intercept, series_shape, lag=1):
    n = len(series_shape)
    input_shape = ((lag,) if lag > 1 else ()) + tuple(series_shape)
    coefficient = TuckerCoefficient(
        core=np.zeros((1,) * (len(input_shape) + n)),
        input_factors=[np.ones((s, 1)) for s in input_shape],
        output_factors=[np.ones((s, 1)) for s in series_shape],
    )
    fit = RegressionFit(
        coefficient=coefficient,
        intercept=DenseTensor(np.asarray(intercept).reshape((1,) + tuple(series_shape))),
        spec=RegressionSpecFactory(tucker_rank=(1,) * (len(input_shape) + n)),
        objective_trace=(0.0,),
        ssr=0.0,
        iterations=1,
        converged=True,
    )
    return TarModel(lag=lag, fit=fit, series_shape=tuple(series_shape))


class TestLaggedDesign:
    def test_single_lag_is_a_shift(self, rng):
        y = rng.standard_normal((6, 2, 3))
        x, targets = lagged_design(y, 1)
        np.testing.assert_array_equal(x, y[:-1])
        np.testing.assert_array_equal(targets, y[1:])

    def test_lag_mode_puts_most_recent_first(self, rng):
        y = rng.standard_normal((7, 2))
        x, targets = lagged_design(y, 3)
        assert x.shape == (4, 3, 2)
        np.testing.assert_array_equal(targets[0], y[3])
        np.testing.assert_array_equal(x[0, 0], y[2])
        np.testing.assert_array_equal(x[0, 2], y[0])


class TestTar:
    def test_constant_series_forecasts_the_constant(self):
        y = np.full((30, 2, 3), 4.25)
        model = ForecastService.fit_tar(y, 1, RegressionSpecFactory(tucker_rank=(1, 1, 1, 1)))
        forecasts = ForecastService.forecast_recursive(model, y, 5).data
        np.testing.assert_allclose(forecasts, 4.25, atol=1e-8)

    def test_rank_one_dynamics_are_recovered(self):
        rng = np.random.default_rng(21)
        slope = _rank_one_tar(rng, (2, 3), 0.8)
        y = _simulate_tar(rng, slope, 4000)
        model = ForecastService.fit_tar(y, 1, RegressionSpecFactory(tucker_rank=(1, 1, 1, 1), init='hosvd', tol=1e-10))
        estimate = model.fit.coefficient.slope
        assert estimate.shape == (2, 3, 2, 3)
        assert np.linalg.norm(estimate - slope) / np.linalg.norm(slope) < 0.15

    def test_macro_shape_is_feasible(self):
        rng = np.random.default_rng(5)
        y = _simulate_tar(rng, _rank_one_tar(rng, (6, 19), 0.7), 150)
        model = ForecastService.fit_tar(y, 1, RegressionSpecFactory(tucker_rank=(1, 1, 1, 1), lam=5.0, tol=1e-6))
        assert model.fit.converged
        assert model.fit.coefficient.slope.shape == (6, 19, 6, 19)
        assert model.fit.coefficient.parameter_count == 1 + 2 * (6 + 19)

    def test_multiple_lags_add_a_lag_mode(self, rng):
        y = rng.standard_normal((40, 2, 2))
        model = ForecastService.fit_tar(y, 2, RegressionSpecFactory(tucker_rank=(1, 1, 1, 1, 1)))
        assert model.fit.coefficient.input_shape == (2, 2, 2)
        assert ForecastService.forecast_recursive(model, y, 3).shape == (3, 2, 2)

    def test_too_few_time_points(self, rng):
        with pytest.raises(InsufficientSamplesError):
            ForecastService.fit_tar(rng.standard_normal((3, 2)), 2, RegressionSpecFactory(tucker_rank=(1, 1, 1)))


class TestForecastRecursive:
    @pytest.fixture
    def model(self, rng):
        y = rng.standard_normal((50, 2, 3))
        return ForecastService.fit_tar(y, 1, RegressionSpecFactory(tucker_rank=(2, 2, 2, 2))), y

    def test_one_step_equals_predict(self, model):
        tar, y = model
        forecast = ForecastService.forecast_recursive(tar, y, 1).data
        expected = TuckerRegressionService.predict(tar.fit, y[-1:]).data
        np.testing.assert_array_equal(forecast, expected)

    def test_three_steps_chain_predictions(self, model):
        tar, y = model
        step = y[-1:]
        for _ in range(3):
            step = TuckerRegressionService.predict(tar.fit, step).data
        np.testing.assert_allclose(ForecastService.forecast_recursive(tar, y, 3).data[2], step[0], rtol=1e-12, atol=1e-14)

    def test_zero_coefficient_forecasts_intercept(self, rng):
        intercept = rng.standard_normal((2, 3))
        tar = _constant_model(intercept, (2, 3))
        forecasts = ForecastService.forecast_recursive(tar, rng.standard_normal((5, 2, 3)), 4).data
        for step in forecasts:
            np.testing.assert_array_equal(step, intercept)

    def test_horizon_must_be_positive(self, model):
        tar, y = model
        with pytest.raises(InvalidConfigError):
            ForecastService.forecast_recursive(tar, y, 0)


class TestRmsfe:
    def test_perfect_forecasts(self):
        assert rmsfe([0.0, 0.0, 0.0]) == 0.0

    def test_three_four(self):
        assert rmsfe([3.0, 4.0], 2) == pytest.approx(math.sqrt(12.5), abs=1e-12)
        assert rmsfe([3.0, 4.0], 2) == pytest.approx(3.5355, abs=1e-4)

    def test_matches_recomputation(self, rng):
        fe = rng.standard_normal(6)
        assert rmsfe(fe, 4) == pytest.approx(math.sqrt(np.mean(fe[:4] ** 2)), rel=1e-14)


class TestVarBaseline:
    def test_ar_one_coefficient(self):
        rng = np.random.default_rng(3)
        y = np.zeros(5000)
        for t in range(1, 5000):
            y[t] = 0.5 * y[t - 1] + 0.1 * rng.standard_normal()
        var = ForecastService.fit_var1_baseline(y)
        assert abs(var.coefficient[0, 0] - 0.5) < 0.05

    def test_noise_free_dynamics_are_exact(self):
        angle = 0.3
        rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        y = np.zeros((40, 2))
        y[0] = [1.0, 0.5]
        for t in range(1, 40):
            y[t] = rotation @ y[t - 1]
        var = ForecastService.fit_var1_baseline(y)
        np.testing.assert_allclose(var.coefficient, rotation, atol=1e-8)
        np.testing.assert_allclose(var.intercept, 0.0, atol=1e-8)

    def test_white_noise_coefficients_shrink_with_length(self):
        rng = np.random.default_rng(4)
        short = ForecastService.fit_var1_baseline(rng.standard_normal((200, 3)))
        long = ForecastService.fit_var1_baseline(rng.standard_normal((5000, 3)))
        assert np.linalg.norm(long.coefficient) < np.linalg.norm(short.coefficient)

    def test_blocks_forecast_independently(self, rng):
        y = rng.standard_normal((60, 2, 3))
        model = ForecastService.fit_var_baseline(y, block_mode=1)
        assert len(model.blocks) == 3
        forecast = ForecastService.forecast_var(model, y, 1).data[0]
        block = model.blocks[2]
        np.testing.assert_allclose(forecast[:, 2], block.intercept + block.coefficient @ y[-1, :, 2], rtol=1e-12)

    def test_too_short(self, rng):
        with pytest.raises(InsufficientSamplesError):
            ForecastService.fit_var1_baseline(rng.standard_normal((4, 3)))


class TestDieboldMariano:
    def test_identical_errors(self, rng):
        fe = rng.standard_normal(20)
        result = dm_test(fe, fe, 1)
        assert result.statistic == 0.0
        assert result.p_value == 1.0
        assert result.favored == 'none'
        assert result.degenerate

    def test_large_gap_favors_the_second_model(self, rng):
        fe2 = rng.standard_normal(40)
        result = dm_test(fe2 + 5.0, fe2, 1)
        assert result.p_value < 0.01
        assert result.statistic > 0
        assert result.favored == 'model-2'

    def test_hand_worked_harvey_statistic(self):
        fe1 = np.array([1.2, -0.4, 0.9, -1.5, 0.3, 2.1, -0.7, 0.5, -1.1, 0.8])
        fe2 = np.array([0.5, -0.2, 1.1, -0.6, 0.1, 1.0, -0.9, 0.2, -0.4, 0.6])
        n, h = 10, 2
        d = [a * a - b * b for a, b in zip(fe1, fe2)]
        mean = sum(d) / n
        gamma = [sum((d[t] - mean) * (d[t - k] - mean) for t in range(k, n)) / n for k in range(h)]
        variance = (gamma[0] + 2 * gamma[1]) / n
        expected = mean / math.sqrt(variance) * math.sqrt((n + 1 - 2 * h + h * (h - 1) / n) / n)
        expected_p = 2 * stats.t.sf(abs(expected), n - 1)

        result = dm_test(fe1, fe2, h)
        assert result.statistic == pytest.approx(expected, abs=1e-10)
        assert result.p_value == pytest.approx(expected_p, abs=1e-10)
        assert result.n == 10

    def test_swapping_models_negates_the_statistic(self, rng):
        fe1, fe2 = rng.standard_normal(25), 1.3 * rng.standard_normal(25)
        forward, backward = dm_test(fe1, fe2, 3), dm_test(fe2, fe1, 3)
        assert backward.statistic == -forward.statistic
        assert backward.p_value == forward.p_value

    def test_needs_eight_pairs(self, rng):
        with pytest.raises(InsufficientSamplesError):
            dm_test(rng.standard_normal(7), rng.standard_normal(7), 1)


class TestComparison:
    def test_split_lengths(self):
        assert split_lengths(150, (0.7, 0.2, 0.1)) == (105, 30, 15)

    def test_split_fractions_must_sum_to_one(self):
        with pytest.raises(InvalidConfigError):
            split_lengths(150, (0.7, 0.2, 0.2))

    def test_report_layout(self):
        rng = np.random.default_rng(8)
        y = _cross_block_tar(rng, 150, blocks=3, per_block=2)
        report = compare_models(y, ranks=[(1, 1, 1, 1)], lambdas=[0.0, 1.0], horizons=4, block_mode=1)
        assert report.segments == (105, 30, 15)
        assert report.tar_forecasts.errors.shape == (15, 4, 6)
        for h in range(1, 5):
            assert report.tar_forecasts.horizon_errors(h, 0).size == 15 - h + 1
        assert len(report.dm_cells) == 6 * 4
        assert len(report.rows()) == 24
        summary = report.rejection_summary()
        assert summary['tested'] == 24
        assert summary['favor_tar'] + summary['favor_var'] == summary['rejections']

    def test_var_baseline_defaults_to_one_fit_per_last_mode_slice(self):
        rng = np.random.default_rng(8)
        y = _cross_block_tar(rng, 150, blocks=3, per_block=2)
        report = compare_models(y, ranks=[(1, 1, 1, 1)], horizons=2)
        assert report.var.block_mode == 1
        assert len(report.var.blocks) == 3
        assert all(block.coefficient.shape == (2, 2) for block in report.var.blocks)
        assert report.config['block_mode'] == 1

    def test_single_series_mode_gets_one_var(self, rng):
        y = rng.standard_normal((150, 4))
        report = compare_models(y, ranks=[(1, 1)], horizons=2)
        assert report.var.block_mode is None
        assert len(report.var.blocks) == 1

    @pytest.mark.slow
    def test_tar_beats_per_block_var_on_cross_block_dynamics(self):
        """Reduced scale: 5 seeds on a 3 x 5 panel rather than 20 seeds on 6 x 19"""
        wins, favor_tar, rejections = 0, 0, 0
        for seed in range(5):
            y = _cross_block_tar(np.random.default_rng(100 + seed), 150)
            report = compare_models(y, ranks=[(1, 1, 1, 1), (2, 2, 2, 2)], lambdas=[0.0, 1.0], block_mode=1,
                                    base_spec=RegressionSpecFactory(init='hosvd', seed=seed))
            rmsfe_h1 = [r.rmsfe_by_horizon()[0].mean() for r in (report.tar_forecasts, report.var_forecasts)]
            wins += rmsfe_h1[0] < rmsfe_h1[1]
            summary = report.rejection_summary()
            favor_tar += summary['favor_tar']
            rejections += summary['rejections']
        assert wins >= 4
        assert rejections == 0 or favor_tar > rejections / 2

    @pytest.mark.slow
    def test_per_block_var_data_is_mostly_indistinguishable(self):
        """Reduced scale: 5 seeds on a 3 x 5 panel of independent per-block VAR(1) series"""
        tested = rejections = 0
        for seed in range(5):
            y = _per_block_var(np.random.default_rng(200 + seed), 150)
            report = compare_models(y, ranks=[(1, 1, 1, 1), (3, 5, 3, 5)], lambdas=[0.0, 1.0],
                                    base_spec=RegressionSpecFactory(init='hosvd', seed=seed))
            summary = report.rejection_summary()
            tested += summary['tested']
            rejections += summary['rejections']
        assert tested == 5 * 15 * 4
        assert 1 - rejections / tested >= 0.8
