"""Dense tensor container.

Entries are linearized first-index-fastest (Fortran order): the entry at
multi-index (i_1, ..., i_N) sits at offset i_1 + I_1 * (i_2 + I_2 * (...)).
Mode-0 fibers are therefore contiguous and the mode-0 unfolding is a reshape.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from .exceptions import DimensionMismatchError, InvalidDataError, InvalidPartitionError


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Immutable, float64, order >= 1 tensor"""
    data: np.ndarray

    def __post_init__(self):
        array = np.array(self.data, dtype=np.float64, order='F', copy=True)
        if array.ndim == 0:
            array = array.reshape(1)
        if any(size < 1 for size in array.shape):
            raise InvalidDataError(f"Every mode size must be >= 1, got {array.shape}")
        array.setflags(write=False)
        object.__setattr__(self, 'data', array)

    @classmethod
    def coerce(cls, value: Union['DenseTensor', np.ndarray, Sequence]) -> 'DenseTensor':
        if isinstance(value, DenseTensor):
            return value
        return cls(np.asarray(value, dtype=np.float64))

    @classmethod
    def from_linear(cls, values: Sequence[float], shape: Sequence[int]) -> 'DenseTensor':
        """Build a tensor from entries given in storage order"""
        values = np.asarray(values, dtype=np.float64).ravel()
        shape = tuple(int(s) for s in shape)
        if values.size != int(np.prod(shape)):
            raise DimensionMismatchError(
                f"{values.size} entries cannot fill a tensor of shape {list(shape)}"
            )
        return cls(values.reshape(shape, order='F'))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def linear_index(self, index: Sequence[int]) -> int:
        if len(index) != self.order:
            raise DimensionMismatchError(f"Index {tuple(index)} does not match order {self.order}")
        return int(np.ravel_multi_index(tuple(index), self.shape, order='F'))

    def multi_index(self, offset: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(offset, self.shape, order='F'))

    def __getitem__(self, index):
        return self.data[index]

    def linear(self) -> np.ndarray:
        """Entries in storage order"""
        return self.data.ravel(order='F')

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def allclose(self, other: 'DenseTensor', rtol: float = 1e-12, atol: float = 0.0) -> bool:
        other = DenseTensor.coerce(other)
        return self.shape == other.shape and np.allclose(self.data, other.data, rtol=rtol, atol=atol)

    def __repr__(self):
        return f"DenseTensor(shape={list(self.shape)})"


@dataclass(frozen=True)
class ModePartition:
    """Row and column mode groups of a matricization (0-based mode indices)"""
    row_modes: Tuple[int, ...]
    col_modes: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'row_modes', tuple(int(m) for m in self.row_modes))
        object.__setattr__(self, 'col_modes', tuple(int(m) for m in self.col_modes))

    @classmethod
    def mode_n(cls, n: int, order: int) -> 'ModePartition':
        """The n-mode matricization: mode n on rows, the rest ascending on columns"""
        return cls((n,), tuple(m for m in range(order) if m != n))

    @classmethod
    def vectorization(cls, order: int) -> 'ModePartition':
        return cls(tuple(range(order)), ())

    def validate(self, order: int) -> None:
        modes = self.row_modes + self.col_modes
        if len(set(modes)) != len(modes):
            raise InvalidPartitionError(
                f"Row modes {list(self.row_modes)} and column modes {list(self.col_modes)} overlap"
            )
        if sorted(modes) != list(range(order)):
            raise InvalidPartitionError(
                f"Partition {list(self.row_modes)} x {list(self.col_modes)} does not cover modes 0..{order - 1}"
            )
