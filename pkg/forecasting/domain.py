import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from regression.domain import RegressionFit
from selection.domain import SelectionReport

FAVORED_CHOICES = ('model-1', 'model-2', 'none')


@dataclass(frozen=True, eq=False)
class TarModel:
    """Tensor autoregression: the regressor is the response lagged along the sample mode"""
    lag: int
    fit: RegressionFit
    series_shape: Tuple[int, ...]
    labels: Tuple[Tuple[str, ...], ...] = ()


@dataclass(frozen=True, eq=False)
class VarCoefficients:
    """y_t = intercept + coefficient @ y_{t-1}"""
    coefficient: np.ndarray
    intercept: np.ndarray
    singular: bool = False


@dataclass(frozen=True, eq=False)
class VarModel:
    """Independent VAR(1) per block along ``block_mode`` of the series modes"""
    blocks: Tuple[VarCoefficients, ...]
    block_mode: Optional[int]
    series_shape: Tuple[int, ...]


@dataclass(frozen=True)
class DmResult:
    statistic: float
    p_value: float
    horizon: int
    n: int
    loss: str = 'squared'
    favored: str = 'none'
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class ForecastReport:
    """Forecast errors FE[origin, h - 1, series] of one model over a test segment"""
    model: str
    horizons: int
    origins: Tuple[int, ...]
    errors: np.ndarray
    series_labels: Tuple[str, ...] = ()

    @property
    def series_count(self) -> int:
        return self.errors.shape[2]

    def rmsfe_by_horizon(self) -> np.ndarray:
        """(H, series) root mean squared error over the origins that reach each horizon"""
        return np.sqrt(np.nanmean(self.errors ** 2, axis=0))

    def rmsfe_by_series(self) -> np.ndarray:
        """Mean over origins with a full window of the H-step RMSFE"""
        complete = ~np.any(np.isnan(self.errors), axis=(1, 2))
        if not np.any(complete):
            return np.full(self.series_count, math.nan)
        return np.sqrt(np.mean(self.errors[complete] ** 2, axis=1)).mean(axis=0)

    def horizon_errors(self, h: int, series: int) -> np.ndarray:
        """Available errors at horizon h (1-based) for one series, in origin order"""
        column = self.errors[:, h - 1, series]
        return column[~np.isnan(column)]


@dataclass(frozen=True)
class DmCell:
    series_index: int
    series: str
    horizon: int
    result: Optional[DmResult]
    significant: bool = False
    note: str = ''


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    segments: Tuple[int, int, int]
    tar: TarModel
    selection: SelectionReport
    tar_forecasts: ForecastReport
    var_forecasts: ForecastReport
    dm_cells: Tuple[DmCell, ...]
    alpha: float
    config: Dict = field(default_factory=dict)
    var: Optional[VarModel] = None

    def rejection_summary(self) -> Dict:
        """Counts of significant DM cells and the share favoring each model (model-1 is the TAR)"""
        tested = [cell for cell in self.dm_cells if cell.result is not None]
        rejected = [cell for cell in tested if cell.significant]
        favor_tar = sum(cell.result.favored == 'model-1' for cell in rejected)
        favor_var = sum(cell.result.favored == 'model-2' for cell in rejected)
        return {
            'tested': len(tested),
            'rejections': len(rejected),
            'favor_tar': favor_tar,
            'favor_var': favor_var,
            'favor_tar_share': favor_tar / len(rejected) if rejected else math.nan,
            'indistinguishable_share': 1 - len(rejected) / len(tested) if tested else math.nan,
        }

    def rows(self) -> List[Dict]:
        rows = []
        tar_rmsfe, var_rmsfe = self.tar_forecasts.rmsfe_by_horizon(), self.var_forecasts.rmsfe_by_horizon()
        for cell in self.dm_cells:
            h, series_index = cell.horizon, cell.series_index
            result = cell.result
            rows.append({
                'series': cell.series,
                'horizon': h,
                'rmsfe_tar': tar_rmsfe[h - 1, series_index],
                'rmsfe_var': var_rmsfe[h - 1, series_index],
                'dm_statistic': result.statistic if result else math.nan,
                'p_value': result.p_value if result else math.nan,
                'n': result.n if result else 0,
                'significant': cell.significant,
                'favored': ('tar' if result.favored == 'model-1' else 'var') if cell.significant else 'none',
                'note': cell.note,
            })
        return rows
