"""Tucker-structured regression types.

The slope tensor B has shape I_1 x ... x I_N x J_1 x ... x J_M and is stored
as a core G (F_1 x ... x F_N x P_1 x ... x P_M) with input factors U^(n)
(I_n x F_n) and output factors V^(m) (J_m x P_m).
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from tensors.algebra import multi_mode_dot_array
from tensors.dense import DenseTensor
from tensors.exceptions import InvalidConfigError, InvalidRankError

INIT_CHOICES = ('random', 'hosvd')


@dataclass(frozen=True, eq=False)
class TuckerCoefficient:
    core: np.ndarray
    input_factors: Tuple[np.ndarray, ...]
    output_factors: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, 'input_factors', tuple(np.asarray(u, dtype=np.float64) for u in self.input_factors))
        object.__setattr__(self, 'output_factors', tuple(np.asarray(v, dtype=np.float64) for v in self.output_factors))
        object.__setattr__(self, 'core', np.asarray(self.core, dtype=np.float64))

    @property
    def factors(self) -> Tuple[np.ndarray, ...]:
        return self.input_factors + self.output_factors

    @property
    def tucker_rank(self) -> Tuple[int, ...]:
        return tuple(int(s) for s in self.core.shape)

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return tuple(u.shape[0] for u in self.input_factors)

    @property
    def output_shape(self) -> Tuple[int, ...]:
        return tuple(v.shape[0] for v in self.output_factors)

    @property
    def parameter_count(self) -> int:
        return int(self.core.size + sum(f.size for f in self.factors))

    @cached_property
    def slope(self) -> np.ndarray:
        return multi_mode_dot_array(self.core, self.factors, range(self.core.ndim))

    def reconstruct(self) -> DenseTensor:
        return DenseTensor(self.slope)

    def condition_numbers(self) -> List[float]:
        """Condition number of every output factor"""
        return [float(np.linalg.cond(v)) for v in self.output_factors]


@dataclass(frozen=True)
class RegressionSpec:
    lam: float = 0.0
    tucker_rank: Tuple[int, ...] = ()
    max_iters: int = field(default_factory=lambda: settings.ALS_MAX_ITERS)
    tol: float = field(default_factory=lambda: settings.ALS_TOL)
    center: bool = True
    init: str = 'random'
    seed: int = field(default_factory=lambda: settings.DEFAULT_SEED)
    regularize_core: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'tucker_rank', tuple(int(r) for r in self.tucker_rank))
        object.__setattr__(self, 'lam', float(self.lam))
        if self.lam < 0 or not np.isfinite(self.lam):
            raise InvalidConfigError(f"lambda must be a finite value >= 0, got {self.lam}")
        if not self.tol > 0:
            raise InvalidConfigError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise InvalidConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.init not in INIT_CHOICES:
            raise InvalidConfigError(f"init must be one of {INIT_CHOICES}, got {self.init!r}")
        if self.seed < 0:
            raise InvalidConfigError(f"seed must be unsigned, got {self.seed}")

    def validate_rank(self, input_shape: Sequence[int], output_shape: Sequence[int]) -> None:
        shape = tuple(input_shape) + tuple(output_shape)
        if len(self.tucker_rank) != len(shape):
            raise InvalidRankError(
                f"Tucker rank {list(self.tucker_rank)} has {len(self.tucker_rank)} entries, "
                f"coefficient of shape {list(shape)} needs {len(shape)}"
            )
        for k, (rank, size) in enumerate(zip(self.tucker_rank, shape)):
            if not 1 <= rank <= size:
                raise InvalidRankError(f"Rank {rank} on mode {k} must lie in [1, {size}]")


@dataclass(frozen=True, eq=False)
class RegressionFit:
    coefficient: TuckerCoefficient
    intercept: DenseTensor
    spec: RegressionSpec
    objective_trace: Tuple[float, ...]
    ssr: float
    iterations: int
    converged: bool
    diagnostics: Dict = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()

    @property
    def lam(self) -> float:
        return self.spec.lam

    @property
    def parameter_count(self) -> int:
        return self.coefficient.parameter_count


@dataclass
class AlsState:
    """Mutable iterate of the alternating least squares sweep.

    ``x`` and ``y`` are the (possibly centered) sample-first arrays.
    """
    x: np.ndarray
    y: np.ndarray
    input_factors: List[np.ndarray]
    output_factors: List[np.ndarray]
    core: Optional[np.ndarray]
    lam: float = 0.0
    regularize_core: bool = False
    singular_solves: int = 0
    damped_core_steps: int = 0
    x_mean: Optional[np.ndarray] = None
    y_mean: Optional[np.ndarray] = None
    init: str = 'random'
    warnings: List[str] = field(default_factory=list)

    @property
    def n_inputs(self) -> int:
        return self.x.ndim - 1

    @property
    def n_outputs(self) -> int:
        return self.y.ndim - 1

    @property
    def factors(self) -> List[np.ndarray]:
        return self.input_factors + self.output_factors

    def slope(self) -> np.ndarray:
        return multi_mode_dot_array(self.core, self.factors, range(self.core.ndim))

    def fitted(self) -> np.ndarray:
        inputs = list(range(1, self.n_inputs + 1))
        return np.tensordot(self.x, self.slope(), axes=(inputs, list(range(self.n_inputs))))

    def ssr(self) -> float:
        return float(np.sum((self.y - self.fitted()) ** 2))

    def objective(self) -> float:
        value = self.ssr()
        if self.lam > 0:
            value += self.lam * float(np.sum(self.slope() ** 2))
        return value

    def coefficient(self) -> TuckerCoefficient:
        return TuckerCoefficient(
            core=self.core.copy(),
            input_factors=tuple(u.copy() for u in self.input_factors),
            output_factors=tuple(v.copy() for v in self.output_factors),
        )
