"""Binary tensor files: magic "OMNT", u32 version, u64 rows, u64 cols,
little-endian float64 row-major payload. Writes are atomic
(temp-then-rename) and a round trip is bitwise lossless.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import TensorFileError

MAGIC = b"OMNT"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def save_tensor(path: str | Path, tensor: np.ndarray) -> None:
    t = np.ascontiguousarray(tensor, dtype=np.float64)
    if t.ndim != 2:
        raise TensorFileError(f"tensor files hold 2-D matrices, got ndim={t.ndim}")
    if not np.isfinite(t).all():
        raise TensorFileError("refusing to store non-finite values")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, t.shape[0], t.shape[1]))
        fh.write(t.astype("<f8", copy=False).tobytes())
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_tensor(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise TensorFileError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(header)
        if magic != MAGIC:
            raise TensorFileError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise TensorFileError(f"{path}: unsupported version {version}")
        payload = fh.read()
    expected = rows * cols * 8
    if len(payload) != expected:
        raise TensorFileError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)
    if not np.isfinite(data).all():
        raise TensorFileError(f"{path}: payload contains non-finite values")
    return data
