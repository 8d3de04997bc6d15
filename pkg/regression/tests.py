import json

import numpy as np
import pytest
from rest_framework.renderers import JSONRenderer

from tensors.codec import from_base64
from tensors.exceptions import (
    DimensionMismatchError, InvalidConfigError, InvalidDataError, InvalidRankError,
)

from .domain import RegressionSpec, TuckerCoefficient
from .factories import RegressionSpecFactory
from .serializers import RegressionFitSerializer, RegressionSpecSerializer
from .services import TuckerRegressionService
from .solvers import solve_normal_equations


def _tucker_problem(rng, samples=200, input_shape=(4, 8), output_shape=(4, 8), rank=(2, 3, 2, 3)):
    shape = input_shape + output_shape
    coefficient = TuckerCoefficient(
        core=rng.standard_normal(rank),
        input_factors=[rng.standard_normal((s, r)) for s, r in zip(input_shape, rank)],
        output_factors=[rng.standard_normal((s, r)) for s, r in zip(output_shape, rank[len(input_shape):])],
    )
    assert coefficient.slope.shape == shape
    x = rng.standard_normal((samples,) + input_shape)
    n = len(input_shape)
    y = np.tensordot(x, coefficient.slope, axes=(list(range(1, n + 1)), list(range(n))))
    return x, y, coefficient.slope


def _centered_ols(x, y):
    xc, yc = x - x.mean(axis=0), y - y.mean(axis=0)
    return np.linalg.solve(xc.T @ xc, xc.T @ yc)


def _relative(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestSolver:
    def test_positive_definite_uses_cholesky(self, rng):
        a = rng.standard_normal((6, 4))
        gram, rhs = a.T @ a, rng.standard_normal(4)
        solution, fallback = solve_normal_equations(gram, rhs)
        assert not fallback
        np.testing.assert_allclose(solution, np.linalg.solve(gram, rhs), rtol=1e-10)

    def test_singular_falls_back_to_minimum_norm(self):
        solution, fallback = solve_normal_equations(np.ones((2, 2)), np.array([2.0, 2.0]))
        assert fallback
        np.testing.assert_allclose(solution, [1.0, 1.0], rtol=1e-12)


class TestRegressionSpec:
    def test_rejects_negative_lambda(self):
        with pytest.raises(InvalidConfigError):
            RegressionSpec(lam=-1.0, tucker_rank=(1, 1))

    def test_rejects_unknown_init(self):
        with pytest.raises(InvalidConfigError):
            RegressionSpec(tucker_rank=(1, 1), init='svd')

    def test_defaults_come_from_settings(self, settings):
        settings.ALS_MAX_ITERS = 17
        assert RegressionSpec(tucker_rank=(1, 1)).max_iters == 17

    def test_serializer_builds_spec(self):
        serializer = RegressionSpecSerializer(data={'lam': 0.5, 'tucker_rank': [2, 3], 'init': 'hosvd', 'seed': 4})
        assert serializer.is_valid(), serializer.errors
        spec = serializer.to_spec()
        assert spec.tucker_rank == (2, 3)
        assert spec.lam == 0.5
        assert spec.seed == 4

    def test_parameter_count(self, rng):
        coefficient = TuckerCoefficient(
            core=np.zeros((2, 3)),
            input_factors=[np.zeros((5, 2))],
            output_factors=[np.zeros((4, 3))],
        )
        assert coefficient.parameter_count == 6 + 10 + 12
        assert coefficient.tucker_rank == (2, 3)


class TestFit:
    def test_matrix_case_matches_ols(self, rng):
        x = rng.standard_normal((100, 5))
        y = x @ rng.standard_normal((5, 3)) + 0.3 * rng.standard_normal((100, 3)) + 2.0
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(5, 3), tol=1e-12))
        ols = _centered_ols(x, y)
        assert _relative(fit.coefficient.slope, ols) < 1e-8
        expected_intercept = y.mean(axis=0) - x.mean(axis=0) @ ols
        np.testing.assert_allclose(fit.intercept.data[0], expected_intercept, rtol=1e-8, atol=1e-8)
        assert fit.intercept.shape == (1, 3)

    @pytest.mark.parametrize('seed', range(5))
    def test_noise_free_tucker_coefficient_is_recovered(self, seed):
        rng = np.random.default_rng(seed)
        x, y, slope = _tucker_problem(rng)
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(2, 3, 2, 3), init='hosvd', seed=seed))
        assert _relative(fit.coefficient.slope, slope) < 1e-6
        assert fit.coefficient.reconstruct().shape == (4, 8, 4, 8)

    def test_zero_target(self, rng):
        x = rng.standard_normal((30, 3, 2))
        y = np.zeros((30, 2))
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(2, 1, 1), center=False))
        assert np.linalg.norm(fit.coefficient.slope) < 1e-10
        assert fit.ssr < 1e-20
        assert np.all(fit.intercept.data == 0.0)

    def test_objective_trace_never_increases(self):
        violations = 0
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            x = rng.standard_normal((30, 3, 4))
            y = rng.standard_normal((30, 2, 3))
            spec = RegressionSpecFactory(tucker_rank=(2, 2, 1, 2), seed=seed, max_iters=30, tol=1e-12)
            trace = np.array(TuckerRegressionService.fit(x, y, spec).objective_trace)
            violations += int(np.sum(np.diff(trace) > 1e-8))
        assert violations == 0

    def test_penalized_objective_trace_never_increases(self):
        violations = damped = 0
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            x = rng.standard_normal((30, 3, 4))
            y = rng.standard_normal((30, 2, 3))
            spec = RegressionSpecFactory(tucker_rank=(2, 2, 1, 2), lam=5.0, seed=seed, max_iters=30, tol=1e-12)
            fit = TuckerRegressionService.fit(x, y, spec)
            violations += int(np.sum(np.diff(np.array(fit.objective_trace)) > 1e-8))
            damped += fit.diagnostics['damped_core_steps']
        assert violations == 0
        assert damped > 0

    def test_unpenalized_fit_takes_full_core_steps(self, rng):
        x = rng.standard_normal((30, 3, 4))
        y = rng.standard_normal((30, 2, 3))
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(2, 2, 1, 2), max_iters=20))
        assert fit.diagnostics['damped_core_steps'] == 0

    def test_penalized_convergence_is_declared_on_a_descending_trace(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((30, 3, 4))
        y = rng.standard_normal((30, 2, 3))
        spec = RegressionSpecFactory(tucker_rank=(2, 2, 1, 2), lam=5.0, seed=0, tol=1e-6, max_iters=2000)
        fit = TuckerRegressionService.fit(x, y, spec)
        trace = np.array(fit.objective_trace)
        assert np.all(np.diff(trace) <= 1e-8)
        if fit.converged:
            assert abs(trace[-1] - trace[-2]) / trace[-2] < spec.tol

    def test_permuting_samples_leaves_coefficient_unchanged(self, rng):
        x = rng.standard_normal((60, 4))
        y = x @ rng.standard_normal((4, 2)) + rng.standard_normal((60, 2))
        spec = RegressionSpecFactory(tucker_rank=(4, 2), seed=3)
        order = rng.permutation(60)
        first = TuckerRegressionService.fit(x, y, spec)
        second = TuckerRegressionService.fit(x[order], y[order], spec)
        np.testing.assert_allclose(second.coefficient.slope, first.coefficient.slope, rtol=1e-10, atol=1e-10)

    def test_stronger_penalty_shrinks_after_one_sweep(self, rng):
        x = rng.standard_normal((40, 3, 3))
        y = rng.standard_normal((40, 3))
        norms = []
        for lam in (0.0, 1e8):
            spec = RegressionSpecFactory(tucker_rank=(2, 2, 2), lam=lam, max_iters=1, seed=5, regularize_core=True)
            norms.append(np.linalg.norm(TuckerRegressionService.fit(x, y, spec).coefficient.slope))
        assert norms[1] <= norms[0]

    def test_rank_above_mode_size(self, rng):
        with pytest.raises(InvalidRankError):
            TuckerRegressionService.fit(rng.standard_normal((10, 3)), rng.standard_normal((10, 2)),
                                        RegressionSpecFactory(tucker_rank=(4, 1)))

    def test_rank_zero(self, rng):
        with pytest.raises(InvalidRankError):
            TuckerRegressionService.fit(rng.standard_normal((10, 3)), rng.standard_normal((10, 2)),
                                        RegressionSpecFactory(tucker_rank=(0, 1)))

    def test_non_finite_input(self, rng):
        x = rng.standard_normal((10, 3))
        x[2, 1] = np.nan
        with pytest.raises(InvalidDataError):
            TuckerRegressionService.fit(x, rng.standard_normal((10, 2)), RegressionSpecFactory(tucker_rank=(1, 1)))

    def test_sample_count_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            TuckerRegressionService.fit(rng.standard_normal((10, 3)), rng.standard_normal((9, 2)),
                                        RegressionSpecFactory(tucker_rank=(1, 1)))

    def test_non_convergence_is_flagged(self, rng):
        x = rng.standard_normal((40, 3, 3))
        y = rng.standard_normal((40, 2, 2))
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(1, 1, 1, 1), max_iters=1, tol=1e-15))
        assert not fit.converged
        assert fit.iterations == 1
        assert any('did not converge' in w for w in fit.warnings)

    def test_hosvd_falls_back_to_random_for_wide_inputs(self, rng, settings):
        settings.HOSVD_MAX_FEATURES = 4
        x, y, _ = _tucker_problem(rng, samples=50, input_shape=(3, 2), output_shape=(2,), rank=(1, 1, 1))
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(1, 1, 1), init='hosvd'))
        assert fit.diagnostics['init'] == 'random'
        assert any('HOSVD' in w for w in fit.warnings)

    def test_diagnostics_record_output_conditioning(self, rng):
        x, y, _ = _tucker_problem(rng, samples=50, input_shape=(3,), output_shape=(4, 2), rank=(2, 2, 1))
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(2, 2, 1)))
        assert len(fit.diagnostics['output_condition_numbers']) == 2
        assert all(c >= 1.0 for c in fit.diagnostics['output_condition_numbers'])


class TestComponentUpdates:
    @pytest.fixture
    def small_state(self, rng):
        x = rng.standard_normal((20, 3, 2))
        y = rng.standard_normal((20, 2))
        return TuckerRegressionService.initial_state(x, y, RegressionSpecFactory(tucker_rank=(2, 2, 1), seed=11))

    def _design(self, state, setter, shape):
        columns = []
        for k in range(int(np.prod(shape))):
            basis = np.zeros(int(np.prod(shape)))
            basis[k] = 1.0
            setter(basis.reshape(shape))
            columns.append(state.fitted().ravel())
        return np.column_stack(columns)

    def test_input_update_matches_least_squares_oracle(self, small_state):
        state = small_state
        before = state.objective()
        updated = TuckerRegressionService.update_input_factor(0, state)
        original = state.input_factors[0].copy()

        def setter(value):
            state.input_factors[0] = value
        design = self._design(state, setter, original.shape)
        expected = np.linalg.lstsq(design, state.y.ravel(), rcond=None)[0].reshape(original.shape)
        np.testing.assert_allclose(updated, expected, rtol=1e-8, atol=1e-10)

        state.input_factors[0] = updated
        assert state.objective() <= before + 1e-10

    def test_huge_penalty_shrinks_input_update(self, small_state):
        unpenalized = TuckerRegressionService.update_input_factor(1, small_state)
        small_state.lam = 1e8
        penalized = TuckerRegressionService.update_input_factor(1, small_state)
        assert np.linalg.norm(penalized) <= np.linalg.norm(unpenalized)

    def test_output_update_never_increases_objective(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            state = TuckerRegressionService.initial_state(
                rng.standard_normal((25, 3, 2)), rng.standard_normal((25, 3, 2)),
                RegressionSpecFactory(tucker_rank=(2, 1, 2, 1), seed=seed),
            )
            for m in range(2):
                before = state.objective()
                state.output_factors[m] = TuckerRegressionService.update_output_factor(m, state)
                assert state.objective() <= before + 1e-8

    def test_output_update_reduces_to_multivariate_ols(self, rng):
        x = rng.standard_normal((50, 3))
        y = rng.standard_normal((50, 3))
        state = TuckerRegressionService.initial_state(x, y, RegressionSpecFactory(tucker_rank=(3, 3), center=False))
        state.input_factors[0] = np.eye(3)
        state.core = np.eye(3)
        updated = TuckerRegressionService.update_output_factor(0, state)
        expected = np.linalg.solve(x.T @ x, x.T @ y)
        np.testing.assert_allclose(updated.T, expected, rtol=1e-10, atol=1e-12)

    def test_core_with_identity_factors_is_ols(self, rng):
        x = rng.standard_normal((50, 5))
        y = rng.standard_normal((50, 3))
        state = TuckerRegressionService.initial_state(x, y, RegressionSpecFactory(tucker_rank=(5, 3), center=False))
        state.input_factors[0] = np.eye(5)
        state.output_factors[0] = np.eye(3)
        np.testing.assert_allclose(
            TuckerRegressionService.update_core(state), np.linalg.solve(x.T @ x, x.T @ y), rtol=1e-10, atol=1e-12
        )

    def test_core_update_matches_least_squares_oracle(self, small_state):
        state = small_state
        updated = TuckerRegressionService.update_core(state)

        def setter(value):
            state.core = value
        design = self._design(state, setter, updated.shape)
        expected = np.linalg.lstsq(design, state.y.ravel(), rcond=None)[0].reshape(updated.shape)
        np.testing.assert_allclose(updated, expected, rtol=1e-8, atol=1e-10)

    def test_updates_are_fixed_points_at_an_exact_fit(self, rng):
        x, y, _ = _tucker_problem(rng, samples=80, input_shape=(3, 4), output_shape=(3,), rank=(2, 2, 2))
        state = TuckerRegressionService.initial_state(x, y, RegressionSpecFactory(tucker_rank=(2, 2, 2), init='hosvd'))
        assert state.ssr() < 1e-16
        for n in range(2):
            np.testing.assert_allclose(
                TuckerRegressionService.update_input_factor(n, state), state.input_factors[n], rtol=1e-7, atol=1e-9
            )
        np.testing.assert_allclose(
            TuckerRegressionService.update_output_factor(0, state), state.output_factors[0], rtol=1e-7, atol=1e-9
        )
        np.testing.assert_allclose(TuckerRegressionService.update_core(state), state.core, rtol=1e-7, atol=1e-9)


class TestInterceptAndPredict:
    @pytest.fixture
    def fitted(self, rng):
        x = rng.standard_normal((80, 3, 2))
        y = np.tensordot(x, rng.standard_normal((3, 2, 2)), axes=2) + 0.1 * rng.standard_normal((80, 2)) + 1.5
        spec = RegressionSpecFactory(tucker_rank=(2, 2, 2), seed=2)
        return x, y, spec, TuckerRegressionService.fit(x, y, spec)

    def test_mean_zero_data_has_zero_intercept(self, rng):
        x = rng.standard_normal((50, 4))
        y = x @ rng.standard_normal((4, 2)) + rng.standard_normal((50, 2))
        x, y = x - x.mean(axis=0), y - y.mean(axis=0)
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(4, 2)))
        np.testing.assert_allclose(fit.intercept.data, 0.0, atol=1e-10)

    def test_shifting_y_shifts_intercept(self, fitted):
        x, y, _, _ = fitted
        spec = RegressionSpecFactory(tucker_rank=(3, 2, 2), seed=2)
        fit = TuckerRegressionService.fit(x, y, spec)
        shifted = TuckerRegressionService.fit(x, y + 4.0, spec)
        np.testing.assert_allclose(shifted.intercept.data - fit.intercept.data, 4.0, atol=1e-8)

    def test_estimate_intercept_matches_closed_form(self, rng):
        x = rng.standard_normal((40, 3))
        y = rng.standard_normal((40, 2))
        slope = rng.standard_normal((3, 2))
        intercept = TuckerRegressionService.estimate_intercept(x, y, slope)
        np.testing.assert_allclose(intercept.data[0], y.mean(axis=0) - x.mean(axis=0) @ slope, rtol=1e-12)

    def test_full_rank_residuals_have_zero_mean(self, rng):
        x = rng.standard_normal((60, 3))
        y = x @ rng.standard_normal((3, 2)) + rng.standard_normal((60, 2)) + 7.0
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(3, 2)))
        residuals = y - TuckerRegressionService.predict(fit, x).data
        np.testing.assert_allclose(residuals.mean(axis=0), 0.0, atol=1e-10)

    def test_training_predictions_reproduce_ssr(self, fitted):
        x, y, _, fit = fitted
        predictions = TuckerRegressionService.predict(fit, x).data
        assert np.sum((y - predictions) ** 2) == pytest.approx(fit.ssr, rel=1e-10)

    def test_zero_input_predicts_intercept(self, fitted):
        _, _, _, fit = fitted
        predictions = TuckerRegressionService.predict(fit, np.zeros((4, 3, 2))).data
        for row in predictions:
            np.testing.assert_array_equal(row, fit.intercept.data[0])

    def test_single_sample_matches_batch(self, fitted):
        x, _, _, fit = fitted
        batch = TuckerRegressionService.predict(fit, x).data
        single = TuckerRegressionService.predict(fit, x[7:8]).data
        np.testing.assert_allclose(single[0], batch[7], rtol=1e-12, atol=1e-14)

    def test_shape_mismatch(self, fitted):
        _, _, _, fit = fitted
        with pytest.raises(DimensionMismatchError):
            TuckerRegressionService.predict(fit, np.zeros((4, 2, 3)))


class TestFitSerializer:
    def test_round_trips_tensors_through_json(self, rng):
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal((30, 2, 2))
        fit = TuckerRegressionService.fit(x, y, RegressionSpecFactory(tucker_rank=(2, 1, 2)))
        document = json.loads(JSONRenderer().render(RegressionFitSerializer(fit).data))
        assert document['spec']['tucker_rank'] == [2, 1, 2]
        assert document['coefficient']['parameter_count'] == fit.parameter_count
        assert document['iterations'] == fit.iterations
        np.testing.assert_array_equal(from_base64(document['intercept']).data, fit.intercept.data)
        np.testing.assert_array_equal(from_base64(document['coefficient']['core']).data, fit.coefficient.core)
