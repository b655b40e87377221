"""
Overlap and surface-distance metrics for binary masks.

Distances are in pixels (unit spacing). Boundary pixels are mask pixels with
at least one 4-neighbour outside the mask; pixels beyond the image edge count
as outside.
"""

import logging

import numpy as np
import torch
from scipy.ndimage import binary_erosion, generate_binary_structure
from scipy.spatial.distance import cdist

from src.core.errors import ShapeError, UndefinedMetricError

logger = logging.getLogger(__name__)

_CROSS = generate_binary_structure(2, 1)


def _as_bool(mask: torch.Tensor | np.ndarray) -> np.ndarray:
    if isinstance(mask, torch.Tensor):
        mask = mask.detach().cpu().numpy()
    return np.asarray(mask).astype(bool)


def _check_masks(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"Mask shapes differ: {a.shape} vs {b.shape}.")


def dice(pred_mask, target_mask, warnings: list[str] | None = None) -> float:
    """2|A∩B| / (|A|+|B|); two empty masks score 1.0 and the convention is recorded."""
    a, b = _as_bool(pred_mask), _as_bool(target_mask)
    _check_masks(a, b)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        message = "Dice of two empty masks reported as 1.0."
        logger.warning(message)
        if warnings is not None:
            warnings.append(message)
        return 1.0
    return 2.0 * int((a & b).sum()) / total


def boundary(mask: np.ndarray) -> np.ndarray:
    """Coordinates [K, ndim] of boundary pixels."""
    interior = binary_erosion(mask, structure=_CROSS if mask.ndim == 2 else None, border_value=0)
    return np.argwhere(mask & ~interior)


def hd95(pred_mask, target_mask) -> float:
    """95th percentile (linear interpolation) of symmetric boundary-to-boundary nearest distances."""
    a, b = _as_bool(pred_mask), _as_bool(target_mask)
    _check_masks(a, b)
    if not a.any() or not b.any():
        raise UndefinedMetricError("hd95 is undefined when either mask is empty.")
    ba, bb = boundary(a), boundary(b)
    d = cdist(ba, bb)
    distances = np.concatenate([d.min(axis=1), d.min(axis=0)])
    return float(np.percentile(distances, 95))


def per_class_dice(pred_labels, target_labels, classes: int, warnings: list[str] | None = None) -> dict[int, float]:
    """Dice for every foreground class 1..classes-1."""
    p, t = _as_labels(pred_labels), _as_labels(target_labels)
    return {k: dice(p == k, t == k, warnings) for k in range(1, classes)}


def _as_labels(labels) -> np.ndarray:
    if isinstance(labels, torch.Tensor):
        labels = labels.detach().cpu().numpy()
    return np.asarray(labels).astype(np.int64)
