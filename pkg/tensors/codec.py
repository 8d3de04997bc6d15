"""DTF1 binary tensor format.

Layout: b"DTF1", order as uint32 LE, each mode size as uint64 LE, then the
entries as float64 LE in first-index-fastest order.
"""
import base64
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .dense import DenseTensor
from .exceptions import TensorFormatError

logger = logging.getLogger(__name__)

MAGIC = b'DTF1'


def encode_dtf1(t: DenseTensor) -> bytes:
    t = DenseTensor.coerce(t)
    header = MAGIC + struct.pack('<I', t.order) + struct.pack(f'<{t.order}Q', *t.shape)
    return header + t.linear().astype('<f8').tobytes()


def decode_dtf1(payload: bytes) -> DenseTensor:
    if len(payload) < 8 or payload[:4] != MAGIC:
        raise TensorFormatError("Payload does not start with the DTF1 magic bytes")
    (order,) = struct.unpack_from('<I', payload, 4)
    if order < 1:
        raise TensorFormatError(f"DTF1 order must be >= 1, got {order}")
    offset = 8 + 8 * order
    if len(payload) < offset:
        raise TensorFormatError("DTF1 header is truncated")
    shape = struct.unpack_from(f'<{order}Q', payload, 8)
    count = int(np.prod(shape, dtype=np.int64))
    if len(payload) != offset + 8 * count:
        raise TensorFormatError(
            f"DTF1 body holds {(len(payload) - offset) // 8} entries, shape {list(shape)} needs {count}"
        )
    values = np.frombuffer(payload, dtype='<f8', count=count, offset=offset)
    return DenseTensor.from_linear(values, shape)


def write_dtf1(path: Union[str, Path], t: DenseTensor) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_dtf1(t))
    logger.info(f"Wrote tensor of shape {list(DenseTensor.coerce(t).shape)} to {path}")
    return path


def read_dtf1(path: Union[str, Path]) -> DenseTensor:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise TensorFormatError(f"Cannot read tensor file {path}: {e}") from e
    return decode_dtf1(payload)


def to_base64(t: DenseTensor) -> str:
    return base64.b64encode(encode_dtf1(t)).decode('ascii')


def from_base64(text: str) -> DenseTensor:
    try:
        payload = base64.b64decode(text.encode('ascii'), validate=True)
    except ValueError as e:
        raise TensorFormatError(f"Invalid base64 tensor payload: {e}") from e
    return decode_dtf1(payload)
