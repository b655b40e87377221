"""
FTS1 tensor container
=====================
Layout (all little-endian):

  b"FTS1" | u8 dtype tag (0 = f64 real, 1 = f64 complex) | u8 rank |
  rank × u32 extents | raw payload, row-major

Complex payloads interleave (re, im) pairs. Boolean and integer tensors are
stored as f64 real.
"""

import logging
import struct
from pathlib import Path

import numpy as np
import torch

from src.core.errors import ContainerFormatError, ShapeError

logger = logging.getLogger(__name__)

MAGIC = b"FTS1"
DTYPE_REAL = 0
DTYPE_COMPLEX = 1

_NUMPY_DTYPES = {DTYPE_REAL: np.dtype("<f8"), DTYPE_COMPLEX: np.dtype("<c16")}


def encode_fts(tensor: torch.Tensor) -> bytes:
    t = tensor.detach().cpu()
    if t.dim() > 255:
        raise ShapeError(f"FTS1 supports rank <= 255, got {t.dim()}.")
    if any(n < 1 or n >= 2**32 for n in t.shape):
        raise ShapeError(f"FTS1 extents must lie in [1, 2^32), got {tuple(t.shape)}.")
    if t.is_complex():
        tag = DTYPE_COMPLEX
        arr = t.to(torch.complex128).numpy()
    else:
        tag = DTYPE_REAL
        arr = t.to(torch.float64).numpy()
    header = MAGIC + struct.pack("<BB", tag, t.dim()) + struct.pack(f"<{t.dim()}I", *t.shape)
    return header + np.ascontiguousarray(arr, dtype=_NUMPY_DTYPES[tag]).tobytes()


def decode_fts(buf: bytes, offset: int = 0) -> tuple[torch.Tensor, int]:
    """Decode one tensor starting at `offset`. Returns (tensor, end offset)."""
    if len(buf) < offset + 6:
        raise ContainerFormatError(f"FTS1 header truncated at offset {offset}.")
    if buf[offset:offset + 4] != MAGIC:
        raise ContainerFormatError(f"Bad FTS1 magic {bytes(buf[offset:offset + 4])!r} at offset {offset}.")
    tag, rank = struct.unpack_from("<BB", buf, offset + 4)
    if tag not in _NUMPY_DTYPES:
        raise ContainerFormatError(f"Unknown FTS1 dtype tag {tag}.")
    pos = offset + 6
    if len(buf) < pos + 4 * rank:
        raise ContainerFormatError("FTS1 extent table truncated.")
    extents = struct.unpack_from(f"<{rank}I", buf, pos)
    pos += 4 * rank
    if any(n < 1 for n in extents):
        raise ContainerFormatError(f"FTS1 extents must be >= 1, got {extents}.")
    dtype = _NUMPY_DTYPES[tag]
    count = int(np.prod(extents, dtype=np.int64)) if extents else 1
    nbytes = count * dtype.itemsize
    if len(buf) < pos + nbytes:
        raise ContainerFormatError(f"FTS1 payload truncated: need {nbytes} bytes, have {len(buf) - pos}.")
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=pos).reshape(extents).copy()
    return torch.from_numpy(arr), pos + nbytes


def write_fts(path: str | Path, tensor: torch.Tensor) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = encode_fts(tensor)
    path.write_bytes(payload)
    logger.debug("FTS1 written | path=%s shape=%s bytes=%d", path, tuple(tensor.shape), len(payload))


def read_fts(path: str | Path) -> torch.Tensor:
    buf = Path(path).read_bytes()
    tensor, end = decode_fts(buf)
    if end != len(buf):
        raise ContainerFormatError(f"{path}: {len(buf) - end} trailing bytes after FTS1 payload.")
    return tensor
