import logging
import math
from dataclasses import asdict, replace
from typing import List, Optional, Sequence

import numpy as np
from celery import group
from django.conf import settings
from prometheus_client import Counter

from regression.domain import RegressionSpec
from regression.services import TuckerRegressionService
from tensors.codec import to_base64
from tensors.dense import DenseTensor
from tensors.exceptions import (
    DimensionMismatchError, InsufficientSamplesError, InvalidConfigError, InvalidDataError,
    InvalidGridError, NoViableCellError,
)

from .domain import SCORING_CHOICES, U_MODE_CHOICES, SelectionCell, SelectionReport

logger = logging.getLogger(__name__)

# Prometheus metrics
grid_cell_counter = Counter('tensorreg_grid_cells_total', 'Total grid cells evaluated', ['status'])


def bic(ssr: float, u: int, w: int) -> float:
    """
    Bayesian information criterion u*ln(ssr/u) + w*ln(u)

    A zero SSR (perfect fit) returns negative infinity.
    """
    if u <= 1:
        raise InsufficientSamplesError(f"BIC needs more than one data point, got u={u}")
    if w < 1:
        raise InvalidConfigError(f"BIC needs at least one estimated element, got w={w}")
    if not ssr >= 0:
        raise InvalidDataError(f"SSR must be a nonnegative number, got {ssr}")
    if ssr == 0:
        return -math.inf
    return u * math.log(ssr / u) + w * math.log(u)


class ModelSelectionService:
    """BIC grid search over Tucker rank and ridge shrinkage"""

    @staticmethod
    def grid_search(x, y, ranks: Sequence[Sequence[int]], lambdas: Sequence[float], scoring: str = 'train',
                    x_val=None, y_val=None, base_spec: Optional[RegressionSpec] = None,
                    u_mode: str = 'entries', jobs: int = 1) -> SelectionReport:
        """
        Fit one model per (rank, lambda) cell and select the minimum-BIC cell

        Args:
            ranks: Tucker rank tuples, one entry per input and output mode
            lambdas: ridge shrinkage values
            scoring: 'train' scores the training fit, 'holdout' the predictions on (x_val, y_val)
            base_spec: iteration controls and the seed shared by every cell
            u_mode: 'entries' counts response entries as data points, 'samples' counts samples
            jobs: 1 evaluates in-process, more dispatches a Celery group

        Returns:
            SelectionReport; failed cells are kept but never selected
        """
        x, y = DenseTensor.coerce(x), DenseTensor.coerce(y)
        ranks = [tuple(int(r) for r in rank) for rank in ranks]
        lambdas = [float(lam) for lam in lambdas]
        if not ranks or not lambdas:
            raise InvalidGridError("Rank and lambda grids must both be nonempty")
        if any(lam < 0 or not math.isfinite(lam) for lam in lambdas):
            raise InvalidGridError(f"Lambda grid values must be finite and >= 0, got {lambdas}")
        if scoring not in SCORING_CHOICES:
            raise InvalidConfigError(f"scoring must be one of {SCORING_CHOICES}, got {scoring!r}")
        if u_mode not in U_MODE_CHOICES:
            raise InvalidConfigError(f"u_mode must be one of {U_MODE_CHOICES}, got {u_mode!r}")
        if scoring == 'holdout':
            if x_val is None or y_val is None:
                raise InvalidConfigError("Holdout scoring needs x_val and y_val")
            x_val, y_val = DenseTensor.coerce(x_val), DenseTensor.coerce(y_val)
            if x_val.shape[1:] != x.shape[1:] or y_val.shape[1:] != y.shape[1:] or x_val.shape[0] != y_val.shape[0]:
                raise DimensionMismatchError(
                    f"Holdout shapes {list(x_val.shape)} / {list(y_val.shape)} do not match "
                    f"training shapes {list(x.shape)} / {list(y.shape)}"
                )
        else:
            x_val = y_val = None

        base_spec = base_spec or RegressionSpec(tucker_rank=ranks[0])
        specs = [replace(base_spec, tucker_rank=rank, lam=lam) for rank in ranks for lam in lambdas]
        logger.info(f"Evaluating {len(specs)} grid cells ({scoring} scoring, jobs={jobs})")

        if jobs > 1:
            cells = ModelSelectionService._dispatch(x, y, specs, x_val, y_val, u_mode)
        else:
            cells = [
                ModelSelectionService.evaluate_cell(index, x, y, spec, x_val, y_val, u_mode)
                for index, spec in enumerate(specs)
            ]

        report = ModelSelectionService.select(cells, n_inputs=x.order - 1, scoring=scoring, u_mode=u_mode)
        best = report.best_cell
        if best.fit is None:
            refit = ModelSelectionService.evaluate_cell(best.index, x, y, specs[best.index], x_val, y_val, u_mode)
            cells = list(report.cells)
            cells[report.best] = refit
            report = replace(report, cells=tuple(cells))
        logger.info(
            f"Selected rank {list(best.rank)} lambda {best.lam} with BIC {best.bic:.6g} "
            f"({len(report.failed_cells)} failed cells)"
        )
        return report

    @staticmethod
    def evaluate_cell(index: int, x: DenseTensor, y: DenseTensor, spec: RegressionSpec,
                      x_val: Optional[DenseTensor] = None, y_val: Optional[DenseTensor] = None,
                      u_mode: str = 'entries') -> SelectionCell:
        """Fit and score one cell; any failure is recorded on the cell"""
        try:
            x, y = DenseTensor.coerce(x), DenseTensor.coerce(y)
            if x_val is not None:
                x_val, y_val = DenseTensor.coerce(x_val), DenseTensor.coerce(y_val)
            fit = TuckerRegressionService.fit(x, y, spec)
            if x_val is not None:
                scored_y = y_val.data
                residuals = scored_y - TuckerRegressionService.predict(fit, x_val).data
                ssr = float(np.sum(residuals ** 2))
            else:
                scored_y = y.data
                ssr = fit.ssr
            u = scored_y.size if u_mode == 'entries' else scored_y.shape[0]
            w = fit.parameter_count

            perfect_fit = ssr <= settings.PERFECT_FIT_RTOL * float(np.sum(scored_y ** 2))
            score = bic(0.0 if perfect_fit else ssr, u, w)
            if math.isnan(score):
                raise InvalidDataError(f"BIC is undefined for SSR {ssr}")
        except Exception as e:
            grid_cell_counter.labels(status='failed').inc()
            logger.error(f"Grid cell {index} (rank {list(spec.tucker_rank)}, lambda {spec.lam}) failed: {e}")
            return SelectionCell(index=index, rank=spec.tucker_rank, lam=spec.lam, status='failed', error=str(e))

        grid_cell_counter.labels(status='ok').inc()
        return SelectionCell(
            index=index,
            rank=spec.tucker_rank,
            lam=spec.lam,
            bic=score,
            ssr=0.0 if perfect_fit else ssr,
            u=int(u),
            w=int(w),
            converged=fit.converged,
            iterations=fit.iterations,
            perfect_fit=perfect_fit,
            fit=fit,
        )

    @staticmethod
    def select(cells: Sequence[SelectionCell], n_inputs: int, scoring: str = 'train',
               u_mode: str = 'entries') -> SelectionReport:
        """Deterministic reduction: the minimum of SelectionCell.sort_key over viable cells"""
        cells = tuple(sorted(cells, key=lambda cell: cell.index))
        viable = [cell for cell in cells if not cell.failed]
        if not viable:
            raise NoViableCellError(f"All {len(cells)} grid cells failed")
        best = min(viable, key=SelectionCell.sort_key)
        tied = [cell for cell in viable if cell.bic == best.bic]
        if len(tied) > 1:
            note = (
                f"{len(tied)} cells tied at BIC {best.bic}; "
                f"chose the fewest parameters, then the smallest lambda, then the smallest rank"
            )
        else:
            note = 'unique minimum'
        return SelectionReport(
            cells=cells,
            best=cells.index(best),
            n_inputs=n_inputs,
            scoring=scoring,
            u_mode=u_mode,
            tie_break_note=note,
        )

    @staticmethod
    def _dispatch(x, y, specs: List[RegressionSpec], x_val, y_val, u_mode: str) -> List[SelectionCell]:
        from .tasks import evaluate_grid_cell

        shared = {
            'x': to_base64(x),
            'y': to_base64(y),
            'x_val': to_base64(x_val) if x_val is not None else None,
            'y_val': to_base64(y_val) if y_val is not None else None,
            'u_mode': u_mode,
        }
        job = group(
            evaluate_grid_cell.s({**shared, 'index': index, 'spec': asdict(spec)})
            for index, spec in enumerate(specs)
        )
        result = job.apply_async()
        logger.info(f"Dispatched {len(specs)} grid cells as group {result.id}")
        records = result.get()
        return [SelectionCell.from_record(record) for record in records]
