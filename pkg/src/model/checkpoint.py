"""
SSPF1 checkpoints
=================
  b"SSPF1" | u32 LE header length | UTF-8 JSON manifest | FTS1 payloads

The manifest lists every entry as {path, dtype, shape, trainable, offset};
offsets count from the first byte after the manifest.
"""

import json
import logging
import struct
from pathlib import Path

import torch

from src.core.errors import CheckpointMissingError, ContainerFormatError
from src.numeric import decode_fts, encode_fts

from .params import ParamStore

logger = logging.getLogger(__name__)

MAGIC = b"SSPF1"
VERSION = 1


def save_checkpoint(path: str | Path, store: ParamStore, metadata: dict | None = None) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, param in store.items():
        blob = encode_fts(param)
        entries.append(
            {
                "path": name,
                "dtype": "f64",
                "shape": list(param.shape),
                "trainable": param.requires_grad,
                "offset": offset,
            }
        )
        blobs.append(blob)
        offset += len(blob)
    manifest = {"version": VERSION, "metadata": metadata or {}, "entries": entries}
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(MAGIC + struct.pack("<I", len(header)) + header + b"".join(blobs))
    logger.info("Checkpoint saved | path=%s entries=%d bytes=%d", path, len(entries), offset)


def read_checkpoint(path: str | Path) -> tuple[dict, dict[str, tuple[torch.Tensor, bool]]]:
    """Returns (metadata, {path: (tensor, trainable)})."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointMissingError(f"Checkpoint '{path}' does not exist.")
    buf = path.read_bytes()
    if buf[:5] != MAGIC or len(buf) < 9:
        raise ContainerFormatError(f"{path}: not an SSPF1 checkpoint.")
    (header_len,) = struct.unpack_from("<I", buf, 5)
    start = 9 + header_len
    try:
        manifest = json.loads(buf[9:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContainerFormatError(f"{path}: unreadable manifest ({e}).") from e
    if manifest.get("version") != VERSION:
        raise ContainerFormatError(f"{path}: unsupported checkpoint version {manifest.get('version')}.")
    entries = {}
    try:
        for entry in manifest["entries"]:
            tensor, _ = decode_fts(buf, start + entry["offset"])
            if list(tensor.shape) != entry["shape"]:
                raise ContainerFormatError(f"{path}: entry '{entry['path']}' shape mismatch.")
            entries[entry["path"]] = (tensor, entry["trainable"])
    except (KeyError, TypeError) as e:
        raise ContainerFormatError(f"{path}: malformed manifest entry ({e!r}).") from e
    return manifest.get("metadata", {}), entries


def load_into(store: ParamStore, path: str | Path, restore_flags: bool = False) -> dict:
    """Copy checkpoint values into matching store entries; returns the metadata."""
    metadata, entries = read_checkpoint(path)
    missing = [name for name in store if name not in entries]
    if missing:
        raise ContainerFormatError(f"{path}: checkpoint lacks {len(missing)} parameter(s), e.g. '{missing[0]}'.")
    with torch.no_grad():
        for name, param in store.items():
            tensor, trainable = entries[name]
            if tensor.shape != param.shape:
                raise ContainerFormatError(f"{path}: '{name}' has shape {tuple(tensor.shape)}, expected {tuple(param.shape)}.")
            param.copy_(tensor)
            if restore_flags:
                param.requires_grad_(trainable)
    logger.info("Checkpoint loaded | path=%s entries=%d", path, len(entries))
    return metadata
