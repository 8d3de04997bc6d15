"""Long-format CSV <-> dense tensor conversion.

Each CSV row holds one tensor cell: a label per mode (sample mode first) and
a value. The label cross product defines the dense tensor.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from tensors.codec import read_dtf1
from tensors.dense import DenseTensor
from tensors.exceptions import (
    DimensionMismatchError,
    DuplicateCellError,
    InvalidConfigError,
    InvalidDataError,
    MissingCellError,
    NonNumericValueError,
)

logger = logging.getLogger(__name__)

FILL_CHOICES = ('error', 'zero', 'mean')
ORDER_CHOICES = ('first-seen', 'lexicographic')
CSV_FLOAT_FORMAT = '%.17g'


@dataclass(frozen=True, eq=False)
class IngestedTensor:
    tensor: DenseTensor
    labels: Tuple[Tuple[str, ...], ...]
    mode_columns: Tuple[str, ...]
    value_column: str
    filled: int = 0

    @property
    def series_labels(self) -> Tuple[Tuple[str, ...], ...]:
        """Labels of every mode except the sample mode"""
        return self.labels[1:]


def _row_number(index: int) -> int:
    """1-based file line of a data row (the header is line 1)"""
    return int(index) + 2


def ingest_csv(path: Union[str, Path], mode_columns: Sequence[str], value_column: str = 'value',
               fill: str = 'error', order: str = 'first-seen') -> IngestedTensor:
    """
    Build a dense tensor from a long-format CSV

    Args:
        path: CSV file with a header row
        mode_columns: one column per tensor mode, the sample mode first
        value_column: column holding the cell values
        fill: 'error' rejects missing cells, 'zero' fills them with 0, 'mean' with
            the mean of the observed cells sharing their non-sample labels
        order: label order per mode, 'first-seen' or 'lexicographic'

    Returns:
        IngestedTensor
    """
    mode_columns = tuple(mode_columns)
    if not mode_columns:
        raise InvalidConfigError("At least one mode column is required")
    if fill not in FILL_CHOICES:
        raise InvalidConfigError(f"fill must be one of {FILL_CHOICES}, got {fill!r}")
    if order not in ORDER_CHOICES:
        raise InvalidConfigError(f"order must be one of {ORDER_CHOICES}, got {order!r}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidDataError(f"Cannot read CSV {path}: {e}") from e
    missing_columns = [c for c in mode_columns + (value_column,) if c not in frame.columns]
    if missing_columns:
        raise InvalidDataError(f"{path} has no column(s) {missing_columns}; header is {list(frame.columns)}")
    if frame.empty:
        raise InvalidDataError(f"{path} holds no data rows")

    values = pd.to_numeric(frame[value_column].str.strip(), errors='coerce')
    bad = ~np.isfinite(values.to_numpy(dtype=np.float64))
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        raise NonNumericValueError(
            f"{path} line {_row_number(index)}: value {frame[value_column].iloc[index]!r} is not a finite number"
        )

    duplicated = frame.duplicated(subset=list(mode_columns), keep='first')
    if duplicated.any():
        index = int(np.flatnonzero(duplicated.to_numpy())[0])
        cell = {c: frame[c].iloc[index] for c in mode_columns}
        raise DuplicateCellError(f"{path} line {_row_number(index)}: duplicate cell {cell}")

    labels = []
    for column in mode_columns:
        seen = pd.unique(frame[column])
        labels.append(tuple(sorted(seen)) if order == 'lexicographic' else tuple(seen))
    shape = tuple(len(mode) for mode in labels)

    codes = tuple(
        pd.Categorical(frame[column], categories=mode).codes
        for column, mode in zip(mode_columns, labels)
    )
    data = np.full(shape, np.nan)
    data[codes] = values.to_numpy(dtype=np.float64)

    absent = np.isnan(data)
    filled = int(absent.sum())
    if filled:
        if fill == 'error':
            first = np.argwhere(absent)[0]
            cell = {c: labels[m][i] for m, (c, i) in enumerate(zip(mode_columns, first))}
            raise MissingCellError(f"{path}: {filled} missing cell(s), first is {cell}")
        if fill == 'zero':
            data[absent] = 0.0
        else:
            series_mean = np.nanmean(data, axis=0, keepdims=True)
            series_mean = np.where(np.isnan(series_mean), np.nanmean(data), series_mean)
            data = np.where(absent, np.broadcast_to(series_mean, shape), data)
        logger.warning(f"Filled {filled} missing cell(s) of {path} with fill={fill}")

    logger.info(f"Ingested {len(frame)} rows of {path} into a tensor of shape {list(shape)}")
    return IngestedTensor(
        tensor=DenseTensor(data),
        labels=tuple(labels),
        mode_columns=mode_columns,
        value_column=value_column,
        filled=filled,
    )


def export_csv(path: Union[str, Path], tensor, labels: Optional[Sequence[Sequence[str]]] = None,
               mode_columns: Optional[Sequence[str]] = None, value_column: str = 'value') -> Path:
    """Write a tensor as long-format CSV, last mode varying fastest, values at 17 significant digits"""
    tensor = DenseTensor.coerce(tensor)
    labels = [tuple(str(i) for i in range(s)) for s in tensor.shape] if labels is None else \
        [tuple(str(label) for label in mode) for mode in labels]
    if [len(mode) for mode in labels] != list(tensor.shape):
        raise DimensionMismatchError(
            f"Label counts {[len(mode) for mode in labels]} do not match tensor shape {list(tensor.shape)}"
        )
    mode_columns = list(mode_columns) if mode_columns else [f'mode{m}' for m in range(tensor.order)]
    if len(mode_columns) != tensor.order:
        raise DimensionMismatchError(f"{len(mode_columns)} mode columns for a tensor of order {tensor.order}")

    index = pd.MultiIndex.from_product(labels, names=mode_columns)
    frame = pd.DataFrame({value_column: tensor.data.ravel(order='C')}, index=index).reset_index()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    logger.info(f"Exported tensor of shape {list(tensor.shape)} to {path}")
    return path


def load_tensor(path: Union[str, Path], mode_columns: Sequence[str] = (), value_column: str = 'value',
                fill: str = 'error', order: str = 'first-seen') -> IngestedTensor:
    """DTF1 files by content, anything ending in .csv through ingest_csv"""
    path = Path(path)
    if path.suffix.lower() == '.csv':
        if not mode_columns:
            raise InvalidConfigError(f"Reading {path} needs the mode columns")
        return ingest_csv(path, mode_columns, value_column, fill=fill, order=order)
    tensor = read_dtf1(path)
    return IngestedTensor(
        tensor=tensor,
        labels=tuple(tuple(str(i) for i in range(s)) for s in tensor.shape),
        mode_columns=tuple(f'mode{m}' for m in range(tensor.order)),
        value_column=value_column,
    )


def read_series_csv(path: Union[str, Path], column: Optional[str] = None) -> np.ndarray:
    """One numeric column of a CSV; ``column`` may be omitted when the file has a single column"""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InvalidDataError(f"Cannot read CSV {path}: {e}") from e
    if column is None:
        if frame.shape[1] != 1:
            raise InvalidConfigError(f"{path} has columns {list(frame.columns)}; name the one to use")
        column = frame.columns[0]
    if column not in frame.columns:
        raise InvalidDataError(f"{path} has no column {column!r}")
    values = pd.to_numeric(frame[column], errors='coerce').to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        index = int(np.flatnonzero(bad)[0])
        raise NonNumericValueError(f"{path} line {_row_number(index)}: {frame[column].iloc[index]!r} is not a finite number")
    return values
