import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from regression.domain import RegressionFit

SCORING_CHOICES = ('train', 'holdout')
U_MODE_CHOICES = ('entries', 'samples')


@dataclass(frozen=True, eq=False)
class SelectionCell:
    index: int
    rank: Tuple[int, ...]
    lam: float
    bic: float = math.nan
    ssr: float = math.nan
    u: int = 0
    w: int = 0
    converged: bool = False
    iterations: int = 0
    perfect_fit: bool = False
    status: str = 'ok'
    error: str = ''
    fit: Optional[RegressionFit] = field(default=None, repr=False)

    @property
    def failed(self) -> bool:
        return self.status != 'ok'

    def sort_key(self):
        """Minimum BIC, then fewest parameters, then smallest lambda, then smallest rank tuple"""
        return (self.bic, self.w, self.lam, self.rank)

    def as_record(self) -> Dict:
        record = asdict(self)
        record.pop('fit')
        record['rank'] = list(self.rank)
        return record

    @classmethod
    def from_record(cls, record: Dict) -> 'SelectionCell':
        values = dict(record)
        values['rank'] = tuple(values['rank'])
        values.pop('fit', None)
        return cls(**values)


@dataclass(frozen=True, eq=False)
class SelectionReport:
    cells: Tuple[SelectionCell, ...]
    best: int
    n_inputs: int
    scoring: str
    u_mode: str
    tie_break_note: str

    @property
    def best_cell(self) -> SelectionCell:
        return self.cells[self.best]

    @property
    def best_fit(self) -> Optional[RegressionFit]:
        return self.best_cell.fit

    @property
    def failed_cells(self) -> List[SelectionCell]:
        return [cell for cell in self.cells if cell.failed]

    def rows(self) -> List[Dict]:
        """One flat record per cell; input ranks as f1.., output ranks as g1.."""
        rows = []
        for cell in self.cells:
            row = {'cell': cell.index}
            for k, r in enumerate(cell.rank):
                name = f'f{k + 1}' if k < self.n_inputs else f'g{k - self.n_inputs + 1}'
                row[name] = r
            row.update({
                'lambda': cell.lam,
                'ssr': cell.ssr,
                'u': cell.u,
                'w': cell.w,
                'bic': cell.bic,
                'converged': cell.converged,
                'perfect_fit': cell.perfect_fit,
                'status': cell.status,
                'best': cell.index == self.best_cell.index,
            })
            rows.append(row)
        return rows


def symmetric_rank_grid(mode_ranges: Sequence[Sequence[int]], repeats: int = 2) -> List[Tuple[int, ...]]:
    """Every combination of the per-mode ranges, repeated: ``[f, g, f, g]`` for two ranges"""
    return [tuple(combo) * repeats for combo in itertools.product(*mode_ranges)]


def uniform_rank_grid(ranks: Sequence[int], order: int) -> List[Tuple[int, ...]]:
    """``[r, r, ..., r]`` of length ``order`` for each r"""
    return [(int(r),) * order for r in ranks]
