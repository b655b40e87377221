import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TypeVar

import torch

from src.core.errors import ConfigError, DataIOError, ShapeError
from src.numeric import Rng, read_fts, write_fts

from .nifti import read_nifti1
from .phantom import VIEWS, Phantom, phantom_generate

logger = logging.getLogger(__name__)

T = TypeVar("T")

MANIFEST_NAME = "manifest.txt"
ROLES = ("volume", "labels")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    role: str
    channels: int

    def line(self) -> str:
        return f"{self.path}\t{self.role}\t{self.channels}"


def split_dataset(items: Sequence[T], fractions: Sequence[float], seed: int) -> tuple[list[T], list[T], list[T]]:
    """Deterministic shuffle, then (train, val, test) partition by fraction."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"Split fractions must be three non-negative values summing to 1, got {tuple(fractions)}.")
    n = len(items)
    order = Rng(seed).permutation(n).tolist()
    n_train = min(n, round(fractions[0] * n))
    n_val = min(n - n_train, round(fractions[1] * n))
    shuffled = [items[i] for i in order]
    return shuffled[:n_train], shuffled[n_train : n_train + n_val], shuffled[n_train + n_val :]


def phantom_dataset(seed: int, count: int, size: int) -> list[Phantom]:
    """`count` phantoms, item i seeded with seed ^ i, views cycling axial/coronal/sagittal."""
    if count < 1:
        raise ConfigError(f"Phantom count must be >= 1, got {count}.")
    root = Rng(seed)
    return [phantom_generate(root.derive(i), size, size, VIEWS[i % len(VIEWS)]) for i in range(count)]


def write_manifest(path: str | Path, entries: Sequence[ManifestEntry]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(entry.line() + "\n" for entry in entries), encoding="utf-8")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"Manifest '{path}' does not exist.")
    entries = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[1] not in ROLES:
            raise DataIOError(f"{path}:{lineno}: expected 'path<TAB>role<TAB>channels' with role in {ROLES}.")
        try:
            channels = int(parts[2])
        except ValueError:
            raise DataIOError(f"{path}:{lineno}: channel count '{parts[2]}' is not an integer.") from None
        entries.append(ManifestEntry(parts[0], parts[1], channels))
    return entries


def write_phantom_set(phantoms: Sequence[Phantom], out_dir: str | Path) -> Path:
    """One volume file and one labels file per phantom, plus the manifest. Returns the manifest path."""
    out_dir = Path(out_dir)
    entries = []
    for i, ph in enumerate(phantoms):
        volume_name, labels_name = f"phantom_{i:04d}.fts", f"labels_{i:04d}.fts"
        write_fts(out_dir / volume_name, ph.volume)
        write_fts(out_dir / labels_name, torch.stack([ph.tissue_labels.double(), ph.lesion_mask.double()]))
        entries.append(ManifestEntry(volume_name, "volume", ph.volume.shape[0]))
        entries.append(ManifestEntry(labels_name, "labels", 2))
    manifest = out_dir / MANIFEST_NAME
    write_manifest(manifest, entries)
    logger.info("Phantoms written | count=%d dir=%s", len(phantoms), out_dir)
    return manifest


def _load_volume(path: Path, channels: int) -> torch.Tensor:
    if path.suffix == ".nii":
        data = read_nifti1(path).data
        if data.dim() == 2:
            data = data.unsqueeze(-1)
        # (x, y, c) → [C, H, W] with y as rows
        volume = data.reshape(data.shape[0], data.shape[1], -1).permute(2, 1, 0).contiguous()
    else:
        volume = read_fts(path)
    if volume.dim() != 3 or volume.shape[0] != channels:
        raise ShapeError(f"{path}: expected {channels} channels in a [C,H,W] volume, got {tuple(volume.shape)}.")
    return volume


def load_manifest_dataset(manifest: str | Path) -> list[Phantom]:
    """Volumes (FTS1 or .nii) with their following labels entry; missing labels become empty maps."""
    manifest = Path(manifest)
    root = manifest.parent
    items: list[Phantom] = []
    for entry in read_manifest(manifest):
        if entry.role == "volume":
            volume = _load_volume(root / entry.path, entry.channels)
            h, w = volume.shape[-2:]
            items.append(
                Phantom(volume, torch.zeros(h, w, dtype=torch.long), torch.zeros(h, w, dtype=torch.bool), "file", len(items))
            )
            continue
        if not items:
            raise DataIOError(f"{manifest}: labels entry '{entry.path}' precedes any volume.")
        labels = read_fts(root / entry.path)
        target = items[-1]
        if labels.shape != (2, *target.volume.shape[-2:]):
            raise ShapeError(f"{entry.path}: labels shape {tuple(labels.shape)} does not match its volume.")
        target.tissue_labels = labels[0].round().long()
        target.lesion_mask = labels[1] > 0.5
    logger.info("Manifest dataset loaded | path=%s items=%d", manifest, len(items))
    return items


def label_subset(items: Sequence[T], fraction: float) -> list[T]:
    """First ⌈fraction·n⌉ items, for label-efficient fine-tuning."""
    if not 0 < fraction <= 1:
        raise ConfigError(f"label_fraction must be in (0, 1], got {fraction}.")
    return list(items[: max(1, math.ceil(fraction * len(items)))])
