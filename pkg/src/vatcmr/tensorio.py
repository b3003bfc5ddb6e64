"""Minimal binary tensor container ("VATT" files).

Layout, all little-endian:

    magic   4 bytes  b"VATT"
    version u16      currently 1
    dtype   u8       0 = float32
    rank    u8
    dims    u32 * rank
    payload row-major dtype values

The format is intentionally tiny so that any language can read it with a
few lines of code.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError

MAGIC = b"VATT"
FORMAT_VERSION = 1

_DTYPE_CODES = {0: np.dtype("<f4")}
_CODE_FOR_DTYPE = {np.dtype("float32"): 0}


def write_tensor(path: str | Path, array: np.ndarray) -> None:
    """Write ``array`` to ``path`` as a VATT file. Data is stored as float32."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    header = MAGIC + struct.pack("<HBB", FORMAT_VERSION, 0, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b""
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dims)
        fh.write(arr.astype("<f4", copy=False).tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a VATT file back into a float32 array.

    Raises DataFormatError if the file is missing, truncated, or not a
    VATT container.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise DataFormatError(f"cannot read tensor file {path}: {exc}") from exc

    if len(blob) < 8:
        raise DataFormatError(f"tensor file {path} is truncated (no header)")
    if blob[:4] != MAGIC:
        raise DataFormatError(f"tensor file {path} has bad magic {blob[:4]!r}")
    version, dtype_code, rank = struct.unpack("<HBB", blob[4:8])
    if version != FORMAT_VERSION:
        raise DataFormatError(f"tensor file {path} has unsupported version {version}")
    if dtype_code not in _DTYPE_CODES:
        raise DataFormatError(f"tensor file {path} has unknown dtype code {dtype_code}")

    dims_end = 8 + 4 * rank
    if len(blob) < dims_end:
        raise DataFormatError(f"tensor file {path} is truncated (incomplete dims)")
    shape = struct.unpack(f"<{rank}I", blob[8:dims_end]) if rank else ()

    dtype = _DTYPE_CODES[dtype_code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if rank else dtype.itemsize
    payload = blob[dims_end:]
    if len(payload) != expected:
        raise DataFormatError(
            f"tensor file {path} payload is {len(payload)} bytes, expected {expected}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(np.float32)
