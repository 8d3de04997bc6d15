from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class SeparableCorrelationSet:
    """
    Flip-flop estimate of a Kronecker-separable residual covariance.

    ``modes`` are the residual tensor axes that were estimated (axis 0 is the
    sample mode); ``correlations[k]`` and ``covariances[k]`` belong to
    ``modes[k]``. Covariances are trace-normalised to their dimension since the
    overall scale is split arbitrarily between the factors.

    By default the sample axis is left out and treated as independent, so
    ``modes`` starts at 1 rather than covering every mode of the residuals.
    ``flip_flop(..., include_sample_mode=True)`` estimates the T x T sample
    covariance too and puts axis 0 first.
    """
    modes: Tuple[int, ...]
    correlations: Tuple[np.ndarray, ...]
    covariances: Tuple[np.ndarray, ...]
    iterations: int
    converged: bool
    change_trace: Tuple[float, ...] = ()
    jittered: Tuple[int, ...] = ()
    labels: Tuple[Tuple[str, ...], ...] = ()

    def correlation(self, mode: int) -> np.ndarray:
        return self.correlations[self.modes.index(mode)]

    def mode_labels(self, mode: int) -> Tuple[str, ...]:
        size = self.correlation(mode).shape[0]
        position = self.modes.index(mode)
        if position < len(self.labels) and len(self.labels[position]) == size:
            return self.labels[position]
        return tuple(str(i) for i in range(size))

    def matrix_rows(self, mode: int) -> List[Dict]:
        """Long-format rows (mode, row, column, correlation) for one mode"""
        corr = self.correlation(mode)
        names = self.mode_labels(mode)
        return [
            {'mode': mode, 'row': names[p], 'column': names[q], 'correlation': float(corr[p, q])}
            for p in range(corr.shape[0]) for q in range(corr.shape[1])
        ]


@dataclass(frozen=True, eq=False)
class BiplotData:
    """First two principal components of a correlation matrix, loadings scaled by sqrt(eigenvalue)"""
    labels: Tuple[str, ...]
    loadings: np.ndarray
    eigenvalues: np.ndarray
    explained_variance: np.ndarray
    mode: Optional[int] = None

    @property
    def components(self) -> int:
        return self.loadings.shape[1]

    def rows(self) -> List[Dict]:
        rows = []
        for i, label in enumerate(self.labels):
            row = {'label': label}
            for k in range(self.components):
                row[f'pc{k + 1}'] = float(self.loadings[i, k])
            if self.mode is not None:
                row['mode'] = self.mode
            rows.append(row)
        return rows

