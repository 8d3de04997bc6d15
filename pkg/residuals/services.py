import logging
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg
from django.conf import settings

from regression.domain import RegressionFit
from regression.services import TuckerRegressionService
from tensors.algebra import multi_mode_dot_array, unfold_array
from tensors.dense import DenseTensor
from tensors.exceptions import (
    DimensionMismatchError,
    InvalidConfigError,
    InvalidDataError,
    NotPositiveSemidefiniteError,
)

from .domain import BiplotData, SeparableCorrelationSet

logger = logging.getLogger(__name__)

JITTER = 1e-8
PSD_TOL = 1e-8


def covariance_to_correlation(sigma: np.ndarray) -> np.ndarray:
    """D^-1/2 Sigma D^-1/2 with an exact unit diagonal and entries clipped to [-1, 1]"""
    scale = np.sqrt(np.diag(sigma))
    corr = sigma / np.outer(scale, scale)
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


class ResidualAnalysisService:
    """Separable covariance of regression residuals and the PCA coordinates of its correlations"""

    @staticmethod
    def residuals_from_fit(fit: RegressionFit, x, y) -> DenseTensor:
        """E = Y - A - <X, B>"""
        y_array = np.asarray(y.data if isinstance(y, DenseTensor) else y, dtype=np.float64)
        predicted = TuckerRegressionService.predict(fit, x).data
        if y_array.shape != predicted.shape:
            raise DimensionMismatchError(
                f"y has shape {list(y_array.shape)}, predictions have shape {list(predicted.shape)}"
            )
        return DenseTensor(y_array - predicted)

    @staticmethod
    def _whitener(sigma: np.ndarray) -> np.ndarray:
        """L^-1 for Sigma = L L^T, so that L^-1 Sigma L^-T = I"""
        lower = np.linalg.cholesky(sigma)
        return scipy.linalg.solve_triangular(lower, np.eye(sigma.shape[0]), lower=True)

    @staticmethod
    def flip_flop(residuals, max_iters: Optional[int] = None, tol: Optional[float] = None,
                  include_sample_mode: bool = False,
                  labels: Sequence[Sequence[str]] = ()) -> SeparableCorrelationSet:
        """
        Kronecker-separable covariance of a residual tensor by the flip-flop iteration

        Every sweep re-estimates each mode's covariance from the residuals whitened
        along all other estimated modes. The sample mode (axis 0) is treated as
        independent unless ``include_sample_mode`` is set. Size-1 modes keep [[1]].

        Args:
            residuals: T x J_1 x ... x J_M residual tensor
            max_iters: sweep limit, FLIP_FLOP_MAX_ITERS when None
            tol: bound on the largest relative Frobenius change of any covariance
            include_sample_mode: estimate a T x T covariance for axis 0 as well
            labels: optional per-mode labels for the J modes

        Returns:
            SeparableCorrelationSet
        """
        max_iters = settings.FLIP_FLOP_MAX_ITERS if max_iters is None else int(max_iters)
        tol = settings.FLIP_FLOP_TOL if tol is None else float(tol)
        if max_iters < 1 or not tol > 0:
            raise InvalidConfigError(f"Flip-flop needs max_iters >= 1 and tol > 0, got {max_iters} and {tol}")
        e = np.asarray(residuals.data if isinstance(residuals, DenseTensor) else residuals, dtype=np.float64)
        if e.ndim < 2:
            raise DimensionMismatchError(f"Residual tensor must have order >= 2, got shape {list(e.shape)}")
        if not np.all(np.isfinite(e)):
            raise InvalidDataError("Residual tensor contains non-finite entries")

        modes = tuple(range(0 if include_sample_mode else 1, e.ndim))
        sigmas = {mode: np.eye(e.shape[mode]) for mode in modes}
        whiteners = {mode: None for mode in modes}
        jittered = set()
        trace: List[float] = []
        converged = False
        iterations = 0

        for iterations in range(1, max_iters + 1):
            change = 0.0
            for mode in modes:
                size = e.shape[mode]
                if size == 1:
                    continue
                matrices = [whiteners.get(k) if k != mode else None for k in range(e.ndim)]
                unfolded = unfold_array(multi_mode_dot_array(e, matrices, range(e.ndim)), mode)
                columns = unfolded.shape[1]
                sigma = unfolded @ unfolded.T / columns
                total = np.trace(sigma)
                if total <= 0:
                    raise InvalidDataError(f"Residuals along mode {mode} are identically zero")
                sigma = size * (sigma + sigma.T) / (2.0 * total)
                if columns < size:
                    sigma += JITTER * np.eye(size)
                    if mode not in jittered:
                        logger.warning(f"Mode {mode} has {columns} columns for {size} rows, adding ridge jitter")
                        jittered.add(mode)
                try:
                    whitener = ResidualAnalysisService._whitener(sigma)
                except np.linalg.LinAlgError:
                    sigma += JITTER * np.eye(size)
                    jittered.add(mode)
                    logger.warning(f"Covariance of mode {mode} is singular, adding ridge jitter")
                    whitener = ResidualAnalysisService._whitener(sigma)
                previous = sigmas[mode]
                change = max(change, float(np.linalg.norm(sigma - previous) / np.linalg.norm(previous)))
                sigmas[mode] = sigma
                whiteners[mode] = whitener
            trace.append(change)
            if change < tol:
                converged = True
                break

        if not converged:
            logger.warning(f"Flip-flop did not converge in {max_iters} sweeps, last change {trace[-1]:.3g}")
        logger.info(f"Flip-flop on shape {list(e.shape)} finished after {iterations} sweep(s)")

        mode_labels = tuple(tuple(str(label) for label in mode) for mode in labels)
        if include_sample_mode and mode_labels:
            mode_labels = (tuple(str(t) for t in range(e.shape[0])),) + mode_labels
        return SeparableCorrelationSet(
            modes=modes,
            correlations=tuple(covariance_to_correlation(sigmas[mode]) for mode in modes),
            covariances=tuple(sigmas[mode] for mode in modes),
            iterations=iterations,
            converged=converged,
            change_trace=tuple(trace),
            jittered=tuple(sorted(jittered)),
            labels=mode_labels,
        )

    @staticmethod
    def correlation_pca(corr, labels: Sequence[str] = (), components: int = 2,
                        mode: Optional[int] = None) -> BiplotData:
        """
        Biplot loadings v_k * sqrt(lambda_k) of the leading components

        Eigenvalues are sorted nonincreasing and each component is signed so its
        largest-magnitude loading is positive.
        """
        corr = np.asarray(corr, dtype=np.float64)
        if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
            raise DimensionMismatchError(f"Correlation matrix must be square, got shape {list(corr.shape)}")
        if not np.all(np.isfinite(corr)):
            raise InvalidDataError("Correlation matrix contains non-finite entries")
        if not np.allclose(corr, corr.T, rtol=0.0, atol=1e-10):
            raise InvalidDataError("Correlation matrix is not symmetric")
        size = corr.shape[0]
        if labels and len(labels) != size:
            raise DimensionMismatchError(f"{len(labels)} labels for a {size} x {size} matrix")

        eigenvalues, eigenvectors = np.linalg.eigh(corr)
        if eigenvalues[0] < -PSD_TOL:
            raise NotPositiveSemidefiniteError(f"Correlation matrix has eigenvalue {eigenvalues[0]:.3g}")
        order = np.argsort(eigenvalues)[::-1]
        eigenvalues = np.clip(eigenvalues[order], 0.0, None)
        eigenvectors = eigenvectors[:, order]

        keep = min(components, size)
        vectors = eigenvectors[:, :keep].copy()
        for k in range(keep):
            if vectors[np.argmax(np.abs(vectors[:, k])), k] < 0:
                vectors[:, k] = -vectors[:, k]
        total = eigenvalues.sum()
        explained = eigenvalues / total if total > 0 else np.zeros(size)
        return BiplotData(
            labels=tuple(str(label) for label in labels) or tuple(str(i) for i in range(size)),
            loadings=vectors * np.sqrt(eigenvalues[:keep]),
            eigenvalues=eigenvalues,
            explained_variance=explained,
            mode=mode,
        )
