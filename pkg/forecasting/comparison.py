"""Out-of-sample comparison of the TAR against per-block VAR(1) baselines."""
import logging
import math
from dataclasses import replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from regression.domain import RegressionSpec
from selection.services import ModelSelectionService
from tensors.dense import DenseTensor
from tensors.exceptions import InsufficientSamplesError, InvalidConfigError

from .domain import ComparisonReport, DmCell, ForecastReport
from .services import ForecastService, _series_array, lagged_design
from .significance import MIN_PAIRS, dm_test

logger = logging.getLogger(__name__)


def split_lengths(samples: int, fractions: Sequence[float]) -> Tuple[int, int, int]:
    """Train and optimisation lengths are floored, the test segment takes the remainder"""
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidConfigError(f"Split fractions must be three positive values summing to 1, got {list(fractions)}")
    train = int(math.floor(fractions[0] * samples + 1e-9))
    optimize = int(math.floor(fractions[1] * samples + 1e-9))
    return train, optimize, samples - train - optimize


def forecast_errors(y: np.ndarray, start: int, horizons: int, forecaster: Callable[[np.ndarray, int], np.ndarray],
                    model: str, labels: Tuple[str, ...] = ()) -> ForecastReport:
    """
    Errors of H-step forecasts from every origin o = start - 1, ..., T - 2

    Horizons that run past the end of the sample are NaN.
    """
    samples = y.shape[0]
    origins = tuple(range(start - 1, samples - 1))
    series = int(np.prod(y.shape[1:]))
    errors = np.full((len(origins), horizons, series), np.nan)
    for row, origin in enumerate(origins):
        forecasts = forecaster(y[:origin + 1], horizons)
        for h in range(1, horizons + 1):
            if origin + h < samples:
                errors[row, h - 1] = (y[origin + h] - forecasts[h - 1]).reshape(-1, order='F')
    return ForecastReport(model=model, horizons=horizons, origins=origins, errors=errors, series_labels=labels)


def default_block_mode(series_shape: Sequence[int]) -> Optional[int]:
    """The last series mode (the unit, e.g. country) when there are several series modes"""
    return len(series_shape) - 1 if len(series_shape) > 1 else None


def series_labels(series_shape: Sequence[int], labels: Sequence[Sequence[str]] = ()) -> Tuple[str, ...]:
    """One label per series in storage order, joining mode labels with '|'"""
    mode_labels = [
        list(labels[k]) if k < len(labels) and len(labels[k]) == size else [str(i) for i in range(size)]
        for k, size in enumerate(series_shape)
    ]
    names = []
    for flat in range(int(np.prod(series_shape))):
        index = np.unravel_index(flat, tuple(series_shape), order='F')
        names.append('|'.join(mode_labels[k][i] for k, i in enumerate(index)))
    return tuple(names)


def compare_models(y, split: Sequence[float] = (0.7, 0.2, 0.1), ranks: Sequence[Sequence[int]] = ((1, 1, 1, 1),),
                   lambdas: Sequence[float] = (0.0,), horizons: int = 4, lag: int = 1,
                   block_mode: Optional[int] = None, base_spec: Optional[RegressionSpec] = None,
                   alpha: Optional[float] = None, labels: Sequence[Sequence[str]] = (),
                   jobs: int = 1) -> ComparisonReport:
    """
    Select the TAR on the optimisation segment, refit both models on train plus
    optimisation, forecast the test segment and run a DM test per (series, horizon)

    The VAR(1) baseline is fitted separately per slice of ``block_mode``, which
    defaults to the last series mode. A single series mode gets one VAR.
    """
    alpha = settings.DM_ALPHA if alpha is None else alpha
    y_array = _series_array(y)
    samples = y_array.shape[0]
    n_train, n_opt, n_test = split_lengths(samples, split)
    if n_train <= lag + 1 or n_opt < 1 or n_test < 1:
        raise InsufficientSamplesError(
            f"Segments {n_train}/{n_opt}/{n_test} of {samples} time points are too short for TAR({lag})"
        )
    if horizons < 1:
        raise InvalidConfigError(f"Forecast horizon must be >= 1, got {horizons}")
    fit_end = n_train + n_opt
    if block_mode is None:
        block_mode = default_block_mode(y_array.shape[1:])

    x_all, y_all = lagged_design(y_array[:fit_end], lag)
    train_pairs = n_train - lag
    base_spec = base_spec or RegressionSpec(tucker_rank=tuple(ranks[0]))
    selection = ModelSelectionService.grid_search(
        x_all[:train_pairs], y_all[:train_pairs], ranks, lambdas, scoring='holdout',
        x_val=x_all[train_pairs:], y_val=y_all[train_pairs:], base_spec=base_spec, jobs=jobs,
    )
    best = selection.best_cell
    logger.info(f"TAR selection on the optimisation segment: rank {list(best.rank)}, lambda {best.lam}")

    tar = ForecastService.fit_tar(
        y_array[:fit_end], lag, replace(base_spec, tucker_rank=best.rank, lam=best.lam), labels=labels
    )
    var = ForecastService.fit_var_baseline(y_array[:fit_end], block_mode=block_mode)

    names = series_labels(y_array.shape[1:], labels)
    tar_report = forecast_errors(
        y_array, fit_end, horizons, lambda history, steps: ForecastService.forecast_recursive(tar, history, steps).data,
        'tar', names,
    )
    var_report = forecast_errors(
        y_array, fit_end, horizons, lambda history, steps: ForecastService.forecast_var(var, history, steps).data,
        'var', names,
    )

    cells = []
    for index, name in enumerate(names):
        for h in range(1, horizons + 1):
            fe_tar, fe_var = tar_report.horizon_errors(h, index), var_report.horizon_errors(h, index)
            if fe_tar.size < MIN_PAIRS or fe_tar.size <= h:
                cells.append(DmCell(index, name, h, None, note=f'{fe_tar.size} error pairs'))
                continue
            result = dm_test(fe_tar, fe_var, h, alpha=alpha)
            cells.append(DmCell(index, name, h, result, significant=result.p_value < alpha))

    report = ComparisonReport(
        segments=(n_train, n_opt, n_test),
        tar=tar,
        selection=selection,
        tar_forecasts=tar_report,
        var_forecasts=var_report,
        dm_cells=tuple(cells),
        alpha=alpha,
        var=var,
        config={'lag': lag, 'horizons': horizons, 'block_mode': block_mode, 'split': list(split)},
    )
    summary = report.rejection_summary()
    logger.info(
        f"DM comparison: {summary['rejections']} of {summary['tested']} cells reject equal accuracy, "
        f"{summary['favor_tar']} favor the TAR"
    )
    return report
