import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from regression.domain import RegressionSpec
from regression.services import TuckerRegressionService
from regression.solvers import solve_normal_equations
from tensors.dense import DenseTensor
from tensors.exceptions import (
    DimensionMismatchError, InsufficientSamplesError, InvalidConfigError, InvalidDataError,
)

from .domain import TarModel, VarCoefficients, VarModel

logger = logging.getLogger(__name__)


def _series_array(y, name: str = 'y') -> np.ndarray:
    array = DenseTensor.coerce(y).data
    if array.ndim < 2:
        array = array.reshape(-1, 1)
    if not np.all(np.isfinite(array)):
        raise InvalidDataError(f"{name} contains non-finite entries")
    return array


def lagged_design(y: np.ndarray, lag: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Regressor/target pairs (Y_{t-1..t-p}, Y_t) for t = p..T-1

    With lag 1 the regressor is Y_{t-1} itself; with more lags a leading lag
    mode holds Y_{t-1}, ..., Y_{t-p} (most recent first).
    """
    samples = y.shape[0]
    targets = y[lag:]
    if lag == 1:
        return y[:-1], targets
    regressors = np.stack([y[lag - 1 - k:samples - 1 - k] for k in range(lag)], axis=1)
    return regressors, targets


def _lag_window(history: np.ndarray, lag: int) -> np.ndarray:
    """Regressor for the step after ``history``, as a one-sample batch"""
    if lag == 1:
        return history[-1:]
    return np.stack([history[-1 - k] for k in range(lag)], axis=0)[np.newaxis]


class ForecastService:
    """Tensor autoregression, VAR(1) baselines and recursive multi-step forecasts"""

    @staticmethod
    def fit_tar(y, lag: int, spec: RegressionSpec, labels: Sequence[Sequence[str]] = ()) -> TarModel:
        """
        Fit Y_t = A + <X_t, B> + E_t with X_t the lagged response

        Args:
            y: series tensor, time first (T x J_1 x ... x J_M)
            lag: number of lags p; p > 1 adds a leading lag mode to the regressor
            spec: Tucker rank covers [lag mode,] J_1..J_M, J_1..J_M

        Returns:
            TarModel
        """
        y_array = _series_array(y)
        if lag < 1:
            raise InvalidConfigError(f"Lag must be >= 1, got {lag}")
        if y_array.shape[0] <= lag + 1:
            raise InsufficientSamplesError(
                f"TAR({lag}) needs more than {lag + 1} time points, got {y_array.shape[0]}"
            )
        x, targets = lagged_design(y_array, lag)
        fit = TuckerRegressionService.fit(x, targets, spec)
        logger.info(f"Fitted TAR({lag}) on {targets.shape[0]} pairs, series shape {list(y_array.shape[1:])}")
        return TarModel(
            lag=lag,
            fit=fit,
            series_shape=y_array.shape[1:],
            labels=tuple(tuple(str(label) for label in mode) for mode in labels),
        )

    @staticmethod
    def forecast_recursive(model: TarModel, y_history, horizons: int) -> DenseTensor:
        """Steps 1..H; step 1 uses observed history, later steps feed predictions back"""
        if horizons < 1:
            raise InvalidConfigError(f"Forecast horizon must be >= 1, got {horizons}")
        history = _series_array(y_history, 'y_history')
        if history.shape[1:] != model.series_shape:
            raise DimensionMismatchError(
                f"History series shape {list(history.shape[1:])} does not match the model's {list(model.series_shape)}"
            )
        if history.shape[0] < model.lag:
            raise InsufficientSamplesError(f"History of {history.shape[0]} steps is shorter than lag {model.lag}")

        window = history[-model.lag:]
        forecasts = []
        for _ in range(horizons):
            step = TuckerRegressionService.predict(model.fit, _lag_window(window, model.lag)).data[0]
            forecasts.append(step)
            window = np.concatenate([window[1:], step[np.newaxis]], axis=0)
        return DenseTensor(np.stack(forecasts, axis=0))

    @staticmethod
    def fit_var1_baseline(y_block) -> VarCoefficients:
        """Equation-by-equation OLS with intercept for a T x K panel"""
        y_array = np.asarray(y_block, dtype=np.float64)
        if y_array.ndim == 1:
            y_array = y_array.reshape(-1, 1)
        samples, k = y_array.shape
        if samples <= k + 1:
            raise InsufficientSamplesError(f"VAR(1) on {k} series needs more than {k + 1} time points, got {samples}")
        design = np.column_stack([np.ones(samples - 1), y_array[:-1]])
        solution, fallback = solve_normal_equations(design.T @ design, design.T @ y_array[1:], context='VAR(1) baseline')
        if fallback:
            logger.warning(f"VAR(1) design on {k} series is singular, coefficients are minimum-norm")
        return VarCoefficients(coefficient=solution[1:].T, intercept=solution[0], singular=fallback)

    @staticmethod
    def fit_var_baseline(y, block_mode: Optional[int] = None) -> VarModel:
        """
        One VAR(1) per block along series mode ``block_mode``

        Each block stacks the remaining series modes into K variables; with no
        block mode a single VAR covers every series.
        """
        y_array = _series_array(y)
        series_shape = y_array.shape[1:]
        samples = y_array.shape[0]
        if block_mode is None:
            blocks = (ForecastService.fit_var1_baseline(y_array.reshape((samples, -1), order='F')),)
        else:
            if not 0 <= block_mode < len(series_shape):
                raise InvalidConfigError(f"Block mode {block_mode} out of range for series shape {list(series_shape)}")
            blocks = tuple(
                ForecastService.fit_var1_baseline(
                    np.take(y_array, b, axis=block_mode + 1).reshape((samples, -1), order='F')
                )
                for b in range(series_shape[block_mode])
            )
        logger.info(f"Fitted {len(blocks)} VAR(1) baseline block(s)")
        return VarModel(blocks=blocks, block_mode=block_mode, series_shape=series_shape)

    @staticmethod
    def forecast_var(model: VarModel, y_history, horizons: int) -> DenseTensor:
        if horizons < 1:
            raise InvalidConfigError(f"Forecast horizon must be >= 1, got {horizons}")
        history = _series_array(y_history, 'y_history')
        if history.shape[1:] != model.series_shape:
            raise DimensionMismatchError(
                f"History series shape {list(history.shape[1:])} does not match the model's {list(model.series_shape)}"
            )
        last = history[-1]
        forecasts = []
        for _ in range(horizons):
            if model.block_mode is None:
                block = model.blocks[0]
                flat = block.intercept + block.coefficient @ last.reshape(-1, order='F')
                step = flat.reshape(model.series_shape, order='F')
            else:
                step = np.empty(model.series_shape)
                for b, block in enumerate(model.blocks):
                    current = np.take(last, b, axis=model.block_mode)
                    following = block.intercept + block.coefficient @ current.reshape(-1, order='F')
                    index = [slice(None)] * len(model.series_shape)
                    index[model.block_mode] = b
                    step[tuple(index)] = following.reshape(current.shape, order='F')
            forecasts.append(step)
            last = step
        return DenseTensor(np.stack(forecasts, axis=0))


def rmsfe(fe, horizons: Optional[int] = None) -> float:
    """sqrt(sum_{h=1..H} FE_h^2 / H) for one series' errors at horizons 1..H"""
    fe = np.asarray(fe, dtype=np.float64).ravel()
    horizons = fe.size if horizons is None else horizons
    if not 1 <= horizons <= fe.size:
        raise InvalidConfigError(f"Horizon window {horizons} outside [1, {fe.size}]")
    return float(np.sqrt(np.sum(fe[:horizons] ** 2) / horizons))
