import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
from django.conf import settings

from regression.domain import RegressionFit
from selection.domain import SelectionReport
from tensors.dense import DenseTensor
from tensors.exceptions import InvalidScenarioError


@dataclass(frozen=True)
class ArrayNormalSpec:
    """Array-normal design: shape T x I_1 x ... x I_N with an AR(1)-style correlation per mode"""
    shape: Tuple[int, ...]
    rhos: Tuple[float, ...]
    seed: int = field(default_factory=lambda: settings.DEFAULT_SEED)

    def __post_init__(self):
        object.__setattr__(self, 'shape', tuple(int(s) for s in self.shape))
        object.__setattr__(self, 'rhos', tuple(float(r) for r in self.rhos))
        if len(self.shape) < 2:
            raise InvalidScenarioError(f"Array normal shape needs a sample mode and one more mode, got {list(self.shape)}")
        if any(s < 1 for s in self.shape):
            raise InvalidScenarioError(f"Mode sizes must be >= 1, got {list(self.shape)}")
        if len(self.rhos) != len(self.shape):
            raise InvalidScenarioError(f"{len(self.rhos)} correlations given for {len(self.shape)} modes")
        for rho in self.rhos:
            if not 0.0 <= rho < 1.0:
                raise InvalidScenarioError(f"Correlation {rho} outside [0, 1)")

    def covariance(self, mode: int) -> np.ndarray:
        """Sigma with entries rho^|p - q|"""
        return scipy.linalg.toeplitz(self.rhos[mode] ** np.arange(self.shape[mode]))


@dataclass(frozen=True)
class CollinearRegressionScenario:
    array_normal: ArrayNormalSpec
    true_rank: Tuple[int, ...]
    snr: float
    output_shape: Tuple[int, ...] = ()
    seed: int = field(default_factory=lambda: settings.DEFAULT_SEED)

    def __post_init__(self):
        output_shape = tuple(int(s) for s in self.output_shape) or self.input_shape
        object.__setattr__(self, 'output_shape', output_shape)
        object.__setattr__(self, 'true_rank', tuple(int(r) for r in self.true_rank))
        if not self.snr > 0 or not math.isfinite(self.snr):
            raise InvalidScenarioError(f"SNR must be a finite value > 0, got {self.snr}")
        shape = self.input_shape + output_shape
        if len(self.true_rank) != len(shape):
            raise InvalidScenarioError(f"True rank {list(self.true_rank)} does not match coefficient shape {list(shape)}")
        if any(not 1 <= r <= s for r, s in zip(self.true_rank, shape)):
            raise InvalidScenarioError(f"True rank {list(self.true_rank)} exceeds coefficient shape {list(shape)}")

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return self.array_normal.shape[1:]

    @property
    def samples(self) -> int:
        return self.array_normal.shape[0]

    @classmethod
    def macro_design(cls, snr: float, seed: int) -> 'CollinearRegressionScenario':
        """100 x 6 x 19 collinear regressors, Tucker-(2, 3, 2, 3) coefficient"""
        return cls(
            array_normal=ArrayNormalSpec(shape=(100, 6, 19), rhos=(0.1, 0.95, 0.8), seed=seed),
            true_rank=(2, 3, 2, 3),
            snr=snr,
            seed=seed,
        )


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    x: DenseTensor
    y: DenseTensor
    slope: DenseTensor
    kappa: float
    realized_snr: float


@dataclass(frozen=True)
class RecoveryCell:
    rank: Tuple[int, ...]
    lam: float
    bic: float
    ssr: float
    w: int
    compression: float
    relative_error: float
    converged: bool
    status: str = 'ok'


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    cells: Tuple[RecoveryCell, ...]
    best: int
    coefficient_shape: Tuple[int, ...]
    n_input_modes: int
    selection: SelectionReport
    estimate: Optional[DenseTensor] = None

    @property
    def best_cell(self) -> RecoveryCell:
        return self.cells[self.best]

    def rows(self) -> List[Dict]:
        rows = []
        for k, cell in enumerate(self.cells):
            row = {f'r{m + 1}': r for m, r in enumerate(cell.rank)}
            row.update({
                'lambda': cell.lam,
                'bic': cell.bic,
                'ssr': cell.ssr,
                'w': cell.w,
                'compression': cell.compression,
                'relative_error': cell.relative_error,
                'converged': cell.converged,
                'status': cell.status,
                'best': k == self.best,
            })
            rows.append(row)
        return rows


@dataclass(frozen=True, eq=False)
class CollinearityResult:
    scenario: CollinearRegressionScenario
    report: SelectionReport
    kappa: float
    realized_snr: float
    holdout_energy: float

    @property
    def selected(self) -> Tuple[int, int, float]:
        """(f, g, lambda) of the selected cell"""
        cell = self.report.best_cell
        return cell.rank[0], cell.rank[1], cell.lam

    @property
    def selected_fit(self) -> Optional[RegressionFit]:
        return self.report.best_fit

    def table_one(self) -> List[Dict]:
        """Per lambda: minimum BIC over ranks and the (f, g) attaining it"""
        rows = []
        lambdas = sorted({cell.lam for cell in self.report.cells})
        for lam in lambdas:
            viable = [c for c in self.report.cells if c.lam == lam and not c.failed]
            if not viable:
                rows.append({'lambda': lam, 'bic': math.nan, 'f': None, 'g': None})
                continue
            cell = min(viable, key=lambda c: c.sort_key())
            rows.append({'lambda': lam, 'bic': cell.bic, 'f': cell.rank[0], 'g': cell.rank[1]})
        return rows


@dataclass(frozen=True, eq=False)
class CollinearityStudy:
    snr: float
    results: Tuple[CollinearityResult, ...]

    def selections(self) -> List[Dict]:
        rows = []
        for index, result in enumerate(self.results):
            f, g, lam = result.selected
            rows.append({
                'replicate': index,
                'seed': result.scenario.seed,
                'f': f,
                'g': g,
                'lambda': lam,
                'bic': result.report.best_cell.bic,
                'realized_snr': result.realized_snr,
            })
        return rows

    def frequency_table(self) -> List[Dict]:
        """How often each (f, g, lambda) was selected, most frequent first"""
        counts: Dict[Tuple[int, int, float], int] = {}
        for result in self.results:
            counts[result.selected] = counts.get(result.selected, 0) + 1
        total = len(self.results)
        ordered = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
        return [
            {'f': f, 'g': g, 'lambda': lam, 'count': count, 'frequency': count / total}
            for (f, g, lam), count in ordered
        ]
