import logging
import time
from math import prod
from typing import Optional, Tuple

import numpy as np
from django.conf import settings
from prometheus_client import Counter, Histogram

from tensors.algebra import multi_mode_dot_array, unfold_array
from tensors.dense import DenseTensor
from tensors.exceptions import DimensionMismatchError, InvalidDataError, TensorRegError

from .domain import AlsState, RegressionFit, RegressionSpec
from .solvers import solve_normal_equations

logger = logging.getLogger(__name__)

# Prometheus metrics
fit_counter = Counter('tensorreg_fits_total', 'Total Tucker regression fits', ['status'])
fit_duration = Histogram('tensorreg_fit_duration_seconds', 'Tucker regression fit duration')
als_iterations = Counter('tensorreg_als_iterations_total', 'Total ALS sweeps')


def _sample_array(t, name: str) -> np.ndarray:
    array = DenseTensor.coerce(t).data
    if array.ndim < 2:
        raise DimensionMismatchError(f"{name} must have a sample mode and at least one more mode, got {list(array.shape)}")
    if not np.all(np.isfinite(array)):
        raise InvalidDataError(f"{name} contains non-finite entries")
    return array


class TuckerRegressionService:
    """Alternating least squares for Y = A + <X, B> + E with a Tucker-structured B"""

    @staticmethod
    def fit(x, y, spec: RegressionSpec) -> RegressionFit:
        """
        Fit the (optionally ridge-penalized) Tucker regression

        Args:
            x: regressor tensor, samples first (N x I_1 x ... x I_N)
            y: response tensor, samples first (N x J_1 x ... x J_M)
            spec: rank, shrinkage and iteration controls

        Returns:
            RegressionFit; non-convergence is reported through ``converged``
        """
        start = time.perf_counter()
        try:
            state = TuckerRegressionService.initial_state(x, y, spec)
        except TensorRegError:
            fit_counter.labels(status='failed').inc()
            raise

        previous = state.objective()
        trace = [previous]
        converged = False
        iterations = 0
        for iterations in range(1, spec.max_iters + 1):
            TuckerRegressionService.sweep(state)
            current = state.objective()
            trace.append(current)
            if abs(current - previous) / max(previous, 1e-12) < spec.tol:
                converged = True
                break
            previous = current

        if not converged:
            message = f"ALS did not converge within {spec.max_iters} sweeps (rank {list(spec.tucker_rank)}, lambda {spec.lam})"
            logger.warning(message)
            state.warnings.append(message)
        if state.singular_solves:
            state.warnings.append(f"{state.singular_solves} normal-equation solves used the pseudo-inverse")

        coefficient = state.coefficient()
        if spec.center:
            intercept = TuckerRegressionService.estimate_intercept_from_means(
                state.x_mean, state.y_mean, coefficient.slope
            )
        else:
            intercept = DenseTensor(np.zeros((1,) + coefficient.output_shape))

        duration = time.perf_counter() - start
        fit_duration.observe(duration)
        als_iterations.inc(iterations)
        fit_counter.labels(status='converged' if converged else 'not_converged').inc()

        ssr = state.ssr()
        logger.info(
            f"Tucker fit rank={list(spec.tucker_rank)} lambda={spec.lam}: "
            f"{iterations} sweeps, ssr={ssr:.6g}, converged={converged}"
        )
        return RegressionFit(
            coefficient=coefficient,
            intercept=intercept,
            spec=spec,
            objective_trace=tuple(trace),
            ssr=ssr,
            iterations=iterations,
            converged=converged,
            diagnostics={
                'init': state.init,
                'singular_solves': state.singular_solves,
                'damped_core_steps': state.damped_core_steps,
                'output_condition_numbers': coefficient.condition_numbers(),
                'duration_seconds': duration,
            },
            warnings=tuple(state.warnings),
        )

    @staticmethod
    def initial_state(x, y, spec: RegressionSpec) -> AlsState:
        """Validated, centered data with initial factors and a matching core"""
        x_array, y_array = _sample_array(x, 'x'), _sample_array(y, 'y')
        if x_array.shape[0] != y_array.shape[0]:
            raise DimensionMismatchError(
                f"x has {x_array.shape[0]} samples but y has {y_array.shape[0]}"
            )
        input_shape, output_shape = x_array.shape[1:], y_array.shape[1:]
        spec.validate_rank(input_shape, output_shape)

        x_mean = x_array.mean(axis=0) if spec.center else np.zeros(input_shape)
        y_mean = y_array.mean(axis=0) if spec.center else np.zeros(output_shape)
        state = AlsState(
            x=x_array - x_mean,
            y=y_array - y_mean,
            input_factors=[],
            output_factors=[],
            core=None,
            lam=spec.lam,
            regularize_core=spec.regularize_core,
            x_mean=x_mean,
            y_mean=y_mean,
            init=spec.init,
        )

        if spec.init == 'hosvd' and prod(input_shape) > settings.HOSVD_MAX_FEATURES:
            message = (
                f"HOSVD init needs a {prod(input_shape)}-feature OLS solve "
                f"(limit {settings.HOSVD_MAX_FEATURES}), using random init"
            )
            logger.warning(message)
            state.warnings.append(message)
            state.init = 'random'

        if state.init == 'hosvd':
            factors = TuckerRegressionService._hosvd_factors(state, spec.tucker_rank)
        else:
            rng = np.random.default_rng(spec.seed)
            shape = input_shape + output_shape
            factors = [rng.standard_normal((size, rank)) for size, rank in zip(shape, spec.tucker_rank)]
        state.input_factors = factors[:len(input_shape)]
        state.output_factors = factors[len(input_shape):]
        state.core = TuckerRegressionService.update_core(state)
        return state

    @staticmethod
    def _hosvd_factors(state: AlsState, rank: Tuple[int, ...]):
        samples = state.x.shape[0]
        xm = state.x.reshape((samples, -1), order='F')
        ym = state.y.reshape((samples, -1), order='F')
        gram = xm.T @ xm + state.lam * np.eye(xm.shape[1])
        full, fallback = solve_normal_equations(gram, xm.T @ ym, context='HOSVD init')
        state.singular_solves += int(fallback)
        full = full.reshape(state.x.shape[1:] + state.y.shape[1:], order='F')

        factors = []
        for mode, r in enumerate(rank):
            left, _, _ = np.linalg.svd(unfold_array(full, mode), full_matrices=True)
            factors.append(left[:, :r].copy())
        return factors

    @staticmethod
    def sweep(state: AlsState) -> None:
        """One ALS pass: input factors, output factors, then the core"""
        for n in range(state.n_inputs):
            state.input_factors[n] = TuckerRegressionService.update_input_factor(n, state)
        for m in range(state.n_outputs):
            state.output_factors[m] = TuckerRegressionService.update_output_factor(m, state)
        proposal = TuckerRegressionService.update_core(state)
        if state.lam > 0 and not state.regularize_core:
            proposal = TuckerRegressionService._descent_core(state, proposal)
        state.core = proposal

    @staticmethod
    def _descent_core(state: AlsState, proposal: np.ndarray) -> np.ndarray:
        """
        Unpenalized core step that never raises the penalized objective

        The least-squares core is taken when it does not increase
        SSR + lambda * |B|^2. Otherwise the core moves towards it only as far as
        the minimum of that (convex quadratic) objective along the step.
        """
        current = state.core
        start = state.objective()
        state.core = proposal
        full = state.objective()
        if full <= start:
            return proposal

        step = proposal - current
        state.core = current + 0.5 * step
        half = state.objective()
        curvature = 2.0 * (full - 2.0 * half + start)
        slope = full - start - curvature
        t = min(max(-slope / (2.0 * curvature), 0.0), 1.0) if curvature > 0 else 0.0
        state.damped_core_steps += 1
        return current + t * step

    @staticmethod
    def _penalty_gram(state: AlsState, mode: int) -> np.ndarray:
        """<B_-k, B_-k> over every mode but ``mode`` (F_k x F_k)"""
        factors = list(state.factors)
        factors[mode] = None
        partial = multi_mode_dot_array(state.core, factors, range(len(factors)))
        unfolded = unfold_array(partial, mode)
        return unfolded @ unfolded.T

    @staticmethod
    def update_input_factor(n: int, state: AlsState) -> np.ndarray:
        """Exact (ridge) least-squares minimizer over U^(n) with every other component fixed"""
        big_n = state.n_inputs
        samples = state.x.shape[0]
        factor = state.input_factors[n]
        size, rank = factor.shape
        others = [k for k in range(big_n) if k != n]

        w = multi_mode_dot_array(state.x, [state.input_factors[k].T for k in others], [k + 1 for k in others])
        c = multi_mode_dot_array(state.core, state.output_factors, range(big_n, state.core.ndim))
        inner = prod(state.input_factors[k].shape[1] for k in others)
        responses = prod(state.y.shape[1:])

        w_n = np.moveaxis(w, n + 1, 1).reshape((samples, size, inner), order='F')
        c_n = np.moveaxis(c, n, big_n - 1).reshape((inner, rank, responses), order='F')
        y_flat = state.y.reshape((samples, responses), order='F')

        ww = np.einsum('sik,slm->iklm', w_n, w_n, optimize=True)
        cc = np.einsum('kfr,mgr->kfmg', c_n, c_n, optimize=True)
        gram = np.einsum('iklm,kfmg->iflg', ww, cc, optimize=True).reshape((size * rank, size * rank), order='F')
        rhs = np.einsum('sik,kfr,sr->if', w_n, c_n, y_flat, optimize=True).reshape(size * rank, order='F')
        if state.lam > 0:
            gram = gram + state.lam * np.kron(TuckerRegressionService._penalty_gram(state, n), np.eye(size))

        solution, fallback = solve_normal_equations(gram, rhs, context=f'input factor {n}')
        state.singular_solves += int(fallback)
        return solution.reshape((size, rank), order='F')

    @staticmethod
    def update_output_factor(m: int, state: AlsState) -> np.ndarray:
        """Exact (ridge) least-squares minimizer over V^(m) with every other component fixed"""
        big_n = state.n_inputs
        z = multi_mode_dot_array(state.x, [u.T for u in state.input_factors], range(1, big_n + 1))
        q = np.tensordot(z, state.core, axes=(list(range(1, big_n + 1)), list(range(big_n))))
        others = [k for k in range(state.n_outputs) if k != m]
        q = multi_mode_dot_array(q, [state.output_factors[k] for k in others], [k + 1 for k in others])

        o = unfold_array(q, m + 1)
        gram = o @ o.T
        rhs = o @ unfold_array(state.y, m + 1).T
        if state.lam > 0:
            gram = gram + state.lam * TuckerRegressionService._penalty_gram(state, big_n + m)

        solution, fallback = solve_normal_equations(gram, rhs, context=f'output factor {m}')
        state.singular_solves += int(fallback)
        return solution.T

    @staticmethod
    def update_core(state: AlsState) -> np.ndarray:
        """
        Least-squares core given all factors

        The response is projected with the pseudo-inverted output factors. The
        core stays unpenalized unless ``regularize_core`` is set.
        """
        big_n = state.n_inputs
        samples = state.x.shape[0]
        z = multi_mode_dot_array(state.x, [u.T for u in state.input_factors], range(1, big_n + 1))
        y_star = multi_mode_dot_array(
            state.y, [np.linalg.pinv(v) for v in state.output_factors], range(1, state.n_outputs + 1)
        )
        core_shape = z.shape[1:] + y_star.shape[1:]
        zm = z.reshape((samples, -1), order='F')
        ym = y_star.reshape((samples, -1), order='F')

        gram = zm.T @ zm
        if state.regularize_core and state.lam > 0:
            gram = gram + state.lam * np.eye(gram.shape[0])
        solution, fallback = solve_normal_equations(gram, zm.T @ ym, context='core')
        state.singular_solves += int(fallback)
        return solution.reshape(core_shape, order='F')

    @staticmethod
    def estimate_intercept(x, y, slope) -> DenseTensor:
        """A = mean(Y) - <mean(X), B>, shaped 1 x J_1 x ... x J_M"""
        x_array, y_array = _sample_array(x, 'x'), _sample_array(y, 'y')
        return TuckerRegressionService.estimate_intercept_from_means(
            x_array.mean(axis=0), y_array.mean(axis=0), DenseTensor.coerce(slope).data
        )

    @staticmethod
    def estimate_intercept_from_means(x_mean: np.ndarray, y_mean: np.ndarray, slope: np.ndarray) -> DenseTensor:
        if slope.shape[:x_mean.ndim] != x_mean.shape or slope.shape[x_mean.ndim:] != y_mean.shape:
            raise DimensionMismatchError(
                f"Slope of shape {list(slope.shape)} does not map {list(x_mean.shape)} to {list(y_mean.shape)}"
            )
        intercept = y_mean - np.tensordot(x_mean, slope, axes=x_mean.ndim)
        return DenseTensor(intercept.reshape((1,) + y_mean.shape))

    @staticmethod
    def predict(fit: RegressionFit, x_new) -> DenseTensor:
        """Y_hat = A + <X_new, B>, one row per sample of x_new"""
        x_array = _sample_array(x_new, 'x_new')
        input_shape = fit.coefficient.input_shape
        if x_array.shape[1:] != input_shape:
            raise DimensionMismatchError(
                f"x_new modes {list(x_array.shape[1:])} do not match training modes {list(input_shape)}"
            )
        n_inputs = len(input_shape)
        signal = np.tensordot(x_array, fit.coefficient.slope, axes=(list(range(1, n_inputs + 1)), list(range(n_inputs))))
        return DenseTensor(fit.intercept.data + signal)
