"""
Minimal single-file NIfTI-1 reader/writer
=========================================
Uncompressed `.nii` only (magic "n+1\\0" at byte 344, 348-byte header).
Supported voxel types: int16, uint16, float32. The reader never returns a
partially decoded image: every inconsistency raises a NiftiFormatError
subclass before any voxel is converted.

Arrays use the canonical (x, y, z, ...) axis order, x fastest on disk.
"""

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from src.core.errors import NiftiDtypeError, NiftiHeaderError, NiftiMagicError, NiftiTruncatedError

logger = logging.getLogger(__name__)

HEADER_SIZE = 348
MAGIC = b"n+1\x00"
DEFAULT_VOX_OFFSET = 352

# (struct format, field name), in on-disk order
NIFTI1_FIELDS = [
    ("i", "sizeof_hdr"),
    ("10s", "data_type"),
    ("18s", "db_name"),
    ("i", "extents"),
    ("h", "session_error"),
    ("b", "regular"),
    ("b", "dim_info"),
    ("8h", "dim"),
    ("f", "intent_p1"),
    ("f", "intent_p2"),
    ("f", "intent_p3"),
    ("h", "intent_code"),
    ("h", "datatype"),
    ("h", "bitpix"),
    ("h", "slice_start"),
    ("8f", "pixdim"),
    ("f", "vox_offset"),
    ("f", "scl_slope"),
    ("f", "scl_inter"),
    ("h", "slice_end"),
    ("b", "slice_code"),
    ("b", "xyzt_units"),
    ("f", "cal_max"),
    ("f", "cal_min"),
    ("f", "slice_duration"),
    ("f", "toffset"),
    ("i", "glmax"),
    ("i", "glmin"),
    ("80s", "descrip"),
    ("24s", "aux_file"),
    ("h", "qform_code"),
    ("h", "sform_code"),
    ("f", "quatern_b"),
    ("f", "quatern_c"),
    ("f", "quatern_d"),
    ("f", "qoffset_x"),
    ("f", "qoffset_y"),
    ("f", "qoffset_z"),
    ("4f", "srow_x"),
    ("4f", "srow_y"),
    ("4f", "srow_z"),
    ("16s", "intent_name"),
    ("4s", "magic"),
]
NIFTI1_STRUCT_FORMAT = "".join(fmt for fmt, _ in NIFTI1_FIELDS)
assert struct.calcsize("=" + NIFTI1_STRUCT_FORMAT) == HEADER_SIZE

# NIfTI datatype code → (numpy base dtype, bitpix)
DATATYPES = {
    4: ("i2", 16),  # int16
    16: ("f4", 32),  # float32
    512: ("u2", 16),  # uint16
}
DATATYPE_CODES = {"int16": 4, "float32": 16, "uint16": 512}


@dataclass
class NiftiImage:
    data: torch.Tensor
    pixdim: tuple[float, ...]
    datatype: int
    header: dict = field(repr=False, default_factory=dict)


def _field_count(fmt: str) -> int:
    """Number of values struct yields for one field format."""
    if fmt.endswith("s"):
        return 1
    return int(fmt[:-1]) if len(fmt) > 1 else 1


def unpack_header(raw: bytes, endian: str) -> dict:
    values = struct.unpack(endian + NIFTI1_STRUCT_FORMAT, raw[:HEADER_SIZE])
    header, i = {}, 0
    for fmt, name in NIFTI1_FIELDS:
        n = _field_count(fmt)
        header[name] = values[i] if n == 1 else tuple(values[i : i + n])
        i += n
    return header


def pack_header(header: dict, endian: str = "<") -> bytes:
    values = []
    for fmt, name in NIFTI1_FIELDS:
        value = header[name]
        values.extend(value if _field_count(fmt) > 1 else [value])
    return struct.pack(endian + NIFTI1_STRUCT_FORMAT, *values)


def _detect_endian(raw: bytes) -> str:
    for endian in ("<", ">"):
        if struct.unpack(endian + "i", raw[:4])[0] == HEADER_SIZE:
            return endian
    raise NiftiMagicError("sizeof_hdr is not 348 in either byte order.")


def _shape(header: dict) -> tuple[int, ...]:
    dim = header["dim"]
    rank = dim[0]
    if not 1 <= rank <= 7:
        raise NiftiHeaderError(f"dim[0] must be in 1..7, got {rank}.")
    shape = tuple(dim[1 : rank + 1])
    if any(d < 1 for d in shape):
        raise NiftiHeaderError(f"Non-positive extent in dim {shape}.")
    return shape


def parse_nifti1(buf: bytes, source: str = "<bytes>") -> tuple[dict, np.ndarray]:
    """Validate and decode a NIfTI-1 byte string into (header, raw voxel array)."""
    if len(buf) < HEADER_SIZE:
        raise NiftiTruncatedError(f"{source}: {len(buf)} bytes is shorter than the {HEADER_SIZE}-byte header.")
    endian = _detect_endian(buf)
    header = unpack_header(buf, endian)
    if header["magic"] != MAGIC:
        raise NiftiMagicError(f"{source}: magic {header['magic']!r} is not {MAGIC!r}.")

    code = header["datatype"]
    if code not in DATATYPES:
        raise NiftiDtypeError(f"{source}: unsupported datatype code {code}.")
    base, bitpix = DATATYPES[code]
    if header["bitpix"] != bitpix:
        raise NiftiHeaderError(f"{source}: bitpix {header['bitpix']} does not match datatype {code}.")

    shape = _shape(header)
    offset = header["vox_offset"]
    if not math.isfinite(offset) or offset < HEADER_SIZE or offset != int(offset):
        raise NiftiHeaderError(f"{source}: invalid vox_offset {offset}.")
    offset = int(offset)
    count = math.prod(shape)
    nbytes = count * (bitpix // 8)
    if offset + nbytes > len(buf):
        raise NiftiTruncatedError(f"{source}: payload needs {offset + nbytes} bytes, file has {len(buf)}.")

    dtype = np.dtype(base).newbyteorder(endian)
    raw = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
    return header, raw.reshape(shape, order="F")


def _scaled(header: dict, raw: np.ndarray, source: str) -> np.ndarray:
    slope, inter = header["scl_slope"], header["scl_inter"]
    values = raw.astype(np.float64)
    if not (math.isfinite(slope) and math.isfinite(inter)):
        raise NiftiHeaderError(f"{source}: non-finite scaling slope={slope} inter={inter}.")
    if slope != 0:
        values = values * slope + inter
    if not np.isfinite(values).all():
        raise NiftiHeaderError(f"{source}: voxel payload holds non-finite values.")
    return values


def min_max(values: torch.Tensor) -> torch.Tensor:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return torch.zeros_like(values)
    return (values - lo) / (hi - lo)


def read_nifti1(path: str | Path, normalize: bool = True) -> NiftiImage:
    """Read a .nii file; scl_slope/scl_inter applied, then min-max scaled to [0, 1] unless `normalize` is off."""
    path = Path(path)
    buf = path.read_bytes()
    header, raw = parse_nifti1(buf, str(path))
    data = torch.from_numpy(_scaled(header, raw, str(path)).copy())
    if normalize:
        data = min_max(data)
    rank = header["dim"][0]
    logger.info("NIfTI read | path=%s shape=%s datatype=%d", path, tuple(data.shape), header["datatype"])
    return NiftiImage(data, tuple(header["pixdim"][1 : rank + 1]), header["datatype"], header)


def default_header() -> dict:
    header = {}
    for fmt, name in NIFTI1_FIELDS:
        n = _field_count(fmt)
        if fmt.endswith("s"):
            header[name] = b""
        else:
            zero = 0.0 if fmt[-1] == "f" else 0
            header[name] = zero if n == 1 else (zero,) * n
    header["sizeof_hdr"] = HEADER_SIZE
    header["magic"] = MAGIC
    header["vox_offset"] = float(DEFAULT_VOX_OFFSET)
    header["scl_slope"] = 1.0
    return header


def write_nifti1(
    path: str | Path,
    data: np.ndarray | torch.Tensor,
    dtype: str = "float32",
    slope: float = 1.0,
    inter: float = 0.0,
    pixdim: tuple[float, ...] | None = None,
    endian: str = "<",
) -> None:
    """Write `data` (canonical axis order) as a single-file NIfTI-1 image; values are stored raw."""
    if dtype not in DATATYPE_CODES:
        raise NiftiDtypeError(f"Unsupported output dtype '{dtype}'. Valid: {', '.join(DATATYPE_CODES)}.")
    array = data.detach().cpu().numpy() if isinstance(data, torch.Tensor) else np.asarray(data)
    if not 1 <= array.ndim <= 7:
        raise NiftiHeaderError(f"NIfTI-1 holds 1 to 7 axes, got {array.ndim}.")
    code = DATATYPE_CODES[dtype]
    base, bitpix = DATATYPES[code]
    spacing = tuple(pixdim) if pixdim is not None else (1.0,) * array.ndim

    header = default_header()
    header["dim"] = (array.ndim, *array.shape, *([1] * (7 - array.ndim)))
    header["pixdim"] = (1.0, *spacing, *([0.0] * (7 - len(spacing))))
    header["datatype"] = code
    header["bitpix"] = bitpix
    header["scl_slope"] = float(slope)
    header["scl_inter"] = float(inter)

    payload = array.astype(np.dtype(base).newbyteorder(endian)).tobytes(order="F")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    extension = b"\x00" * (DEFAULT_VOX_OFFSET - HEADER_SIZE)
    path.write_bytes(pack_header(header, endian) + extension + payload)
    logger.debug("NIfTI written | path=%s shape=%s dtype=%s", path, array.shape, dtype)
