"""Symmetric normal-equation solves with a pseudo-inverse fallback."""
import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from django.conf import settings

logger = logging.getLogger(__name__)


def solve_normal_equations(gram: np.ndarray, rhs: np.ndarray, rcond: Optional[float] = None,
                           context: str = '') -> Tuple[np.ndarray, bool]:
    """
    Solve gram @ z = rhs for a symmetric positive semidefinite gram

    Cholesky is tried first. A failed or near-singular factorization falls back
    to the Moore-Penrose pseudo-inverse with eigenvalue cutoff rcond * max.

    Returns:
        (solution, used_fallback)
    """
    rcond = settings.PINV_RCOND if rcond is None else rcond
    gram = 0.5 * (gram + gram.T)
    try:
        factor, lower = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        diag = np.abs(np.diag(factor))
        if diag.min() ** 2 > rcond * diag.max() ** 2:
            return scipy.linalg.cho_solve((factor, lower), rhs, check_finite=False), False
    except np.linalg.LinAlgError:
        pass

    logger.warning(f"Singular normal equations{' in ' + context if context else ''}, using pseudo-inverse")
    return scipy.linalg.pinvh(gram, rtol=rcond) @ rhs, True
