"""Multilinear algebra primitives.

Public operations take and return DenseTensor; the ``*_array`` kernels work on
plain float64 ndarrays and are what the estimation code calls in its inner
loops. All unfoldings use first-index-fastest ordering inside the row group and
inside the column group.
"""
from typing import Sequence, Union

import numpy as np

from .dense import DenseTensor, ModePartition
from .exceptions import DimensionMismatchError, InvalidPartitionError

TensorLike = Union[DenseTensor, np.ndarray]


def _as_array(t: TensorLike) -> np.ndarray:
    if isinstance(t, DenseTensor):
        return t.data
    return np.asarray(t, dtype=np.float64)


def matricize_array(array: np.ndarray, row_modes: Sequence[int], col_modes: Sequence[int]) -> np.ndarray:
    row_modes, col_modes = list(row_modes), list(col_modes)
    rows = int(np.prod([array.shape[m] for m in row_modes], dtype=np.int64))
    cols = int(np.prod([array.shape[m] for m in col_modes], dtype=np.int64))
    return np.transpose(array, row_modes + col_modes).reshape((rows, cols), order='F')


def unfold_array(array: np.ndarray, mode: int) -> np.ndarray:
    """n-mode unfolding: mode fibers become columns"""
    others = [m for m in range(array.ndim) if m != mode]
    return matricize_array(array, [mode], others)


def fold_array(matrix: np.ndarray, row_modes: Sequence[int], col_modes: Sequence[int],
               shape: Sequence[int]) -> np.ndarray:
    order = list(row_modes) + list(col_modes)
    permuted_shape = [shape[m] for m in order]
    array = np.reshape(matrix, permuted_shape, order='F')
    return np.transpose(array, np.argsort(order))


def mode_dot_array(array: np.ndarray, matrix: np.ndarray, mode: int) -> np.ndarray:
    """array x_mode matrix, with matrix of shape (J, I_mode)"""
    return np.moveaxis(np.tensordot(matrix, array, axes=(1, mode)), 0, mode)


def multi_mode_dot_array(array: np.ndarray, matrices: Sequence[np.ndarray], modes: Sequence[int]) -> np.ndarray:
    for matrix, mode in zip(matrices, modes):
        if matrix is not None:
            array = mode_dot_array(array, matrix, mode)
    return array


def matricize(t: TensorLike, partition: ModePartition) -> np.ndarray:
    """General matricization into a J x K matrix.

    Rows enumerate the row modes and columns the column modes, each group
    linearized first-index-fastest in the order the partition lists them.
    """
    array = _as_array(t)
    partition.validate(array.ndim)
    return matricize_array(array, partition.row_modes, partition.col_modes)


def vectorize(t: TensorLike) -> np.ndarray:
    array = _as_array(t)
    return array.ravel(order='F').copy()


def fold(m: np.ndarray, partition: ModePartition, shape: Sequence[int]) -> DenseTensor:
    """Inverse of matricize for the same partition and shape"""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    partition.validate(len(shape))
    rows = int(np.prod([shape[i] for i in partition.row_modes], dtype=np.int64))
    cols = int(np.prod([shape[i] for i in partition.col_modes], dtype=np.int64))
    if m.ndim == 1 and cols == 1:
        m = m.reshape(-1, 1)
    if m.shape != (rows, cols):
        raise DimensionMismatchError(
            f"Matrix of shape {list(m.shape)} cannot fold into {list(shape)} "
            f"with partition {list(partition.row_modes)} x {list(partition.col_modes)}"
        )
    return DenseTensor(fold_array(m, partition.row_modes, partition.col_modes, shape))


def n_mode_product(t: TensorLike, v: np.ndarray, n: int) -> DenseTensor:
    array = _as_array(t)
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if not 0 <= n < array.ndim:
        raise InvalidPartitionError(f"Mode {n} out of range for order {array.ndim}")
    if v.shape[1] != array.shape[n]:
        raise DimensionMismatchError(
            f"Matrix with {v.shape[1]} columns cannot multiply mode {n} of size {array.shape[n]}"
        )
    return DenseTensor(mode_dot_array(array, v, n))


def contracted_product(a: TensorLike, b: TensorLike, modes_a: Sequence[int],
                       modes_b: Sequence[int]) -> DenseTensor:
    """Sum over paired modes; result keeps a's free modes, then b's free modes.

    Contracting every mode yields a shape-[1] tensor holding the inner product.
    """
    a_array, b_array = _as_array(a), _as_array(b)
    modes_a, modes_b = list(modes_a), list(modes_b)
    if len(modes_a) != len(modes_b):
        raise DimensionMismatchError(
            f"Cannot pair {len(modes_a)} modes of a with {len(modes_b)} modes of b"
        )
    for ma, mb in zip(modes_a, modes_b):
        if a_array.shape[ma] != b_array.shape[mb]:
            raise DimensionMismatchError(
                f"Mode {ma} of a (size {a_array.shape[ma]}) does not match "
                f"mode {mb} of b (size {b_array.shape[mb]})"
            )
    return DenseTensor(np.tensordot(a_array, b_array, axes=(modes_a, modes_b)))


def inner_product(a: TensorLike, b: TensorLike) -> float:
    a_array, b_array = _as_array(a), _as_array(b)
    if a_array.shape != b_array.shape:
        raise DimensionMismatchError(f"Shapes {list(a_array.shape)} and {list(b_array.shape)} differ")
    return float(np.tensordot(a_array, b_array, axes=a_array.ndim))


def frobenius_norm(t: TensorLike) -> float:
    return float(np.linalg.norm(_as_array(t).ravel()))


def tucker_reconstruct(g: TensorLike, factors: Sequence[np.ndarray]) -> DenseTensor:
    """G x_0 factors[0] x_1 factors[1] ...; a 1-D factor is a single column"""
    core = _as_array(g)
    factors = [np.asarray(f).reshape(-1, 1) if np.ndim(f) == 1 else np.asarray(f) for f in factors]
    if len(factors) != core.ndim:
        raise DimensionMismatchError(f"{len(factors)} factors given for a core of order {core.ndim}")
    for k, factor in enumerate(factors):
        if factor.shape[1] != core.shape[k]:
            raise DimensionMismatchError(
                f"Factor {k} has {factor.shape[1]} columns but core mode {k} has size {core.shape[k]}"
            )
    return DenseTensor(multi_mode_dot_array(core, factors, range(core.ndim)))
