"""Diebold-Mariano test of equal predictive accuracy with the Harvey small-sample correction."""
import logging
import math
from typing import Optional

import numpy as np
from django.conf import settings
from scipy import stats

from tensors.exceptions import DimensionMismatchError, InsufficientSamplesError, InvalidConfigError, InvalidDataError

from .domain import DmResult

logger = logging.getLogger(__name__)

MIN_PAIRS = 8


def autocovariance(d: np.ndarray, lag: int) -> float:
    """(1/n) sum_{t >= lag} (d_t - mean)(d_{t-lag} - mean)"""
    centered = d - d.mean()
    return float(np.dot(centered[lag:], centered[:d.size - lag]) / d.size)


def dm_test(fe1, fe2, h: int = 1, alpha: Optional[float] = None) -> DmResult:
    """
    Two-sided test of E[FE1^2 - FE2^2] = 0

    The long-run variance uses h - 1 autocovariances with a rectangular window
    and the statistic is referred to Student-t with n - 1 degrees of freedom. A
    positive statistic means model 1 has the larger loss, so it favors model 2.
    """
    alpha = settings.DM_ALPHA if alpha is None else alpha
    fe1 = np.asarray(fe1, dtype=np.float64).ravel()
    fe2 = np.asarray(fe2, dtype=np.float64).ravel()
    if fe1.shape != fe2.shape:
        raise DimensionMismatchError(f"Error series have {fe1.size} and {fe2.size} entries")
    if not (np.all(np.isfinite(fe1)) and np.all(np.isfinite(fe2))):
        raise InvalidDataError("Forecast errors must be finite")
    n = fe1.size
    if n < MIN_PAIRS:
        raise InsufficientSamplesError(f"Diebold-Mariano test needs at least {MIN_PAIRS} error pairs, got {n}")
    if not 1 <= h < n:
        raise InvalidConfigError(f"Horizon must lie in [1, {n - 1}], got {h}")

    d = fe1 ** 2 - fe2 ** 2
    mean = float(d.mean())
    gamma0 = autocovariance(d, 0)
    variance = (gamma0 + 2.0 * sum(autocovariance(d, k) for k in range(1, h))) / n
    degenerate = False

    if gamma0 == 0.0:
        degenerate = True
        if mean == 0.0:
            statistic, p_value = 0.0, 1.0
        else:
            statistic, p_value = math.copysign(math.inf, mean), 0.0
        logger.warning(f"Loss differential has zero variance (mean {mean}), DM test is degenerate")
    else:
        if variance <= 0.0:
            degenerate = True
            logger.warning(f"Long-run variance {variance:.3g} is not positive at h={h}, using the lag-0 variance")
            variance = gamma0 / n
        correction = math.sqrt((n + 1 - 2 * h + h * (h - 1) / n) / n)
        statistic = mean / math.sqrt(variance) * correction
        p_value = float(min(1.0, 2.0 * stats.t.sf(abs(statistic), df=n - 1)))

    if p_value < alpha and statistic != 0.0:
        favored = 'model-2' if statistic > 0 else 'model-1'
    else:
        favored = 'none'
    return DmResult(
        statistic=float(statistic),
        p_value=p_value,
        horizon=h,
        n=n,
        favored=favored,
        degenerate=degenerate,
    )
