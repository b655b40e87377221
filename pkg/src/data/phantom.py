"""
Synthetic MRI-like phantoms
===========================
Nested ellipses (scalp/skull ring, brain, ventricles) with an optional lesion
blob, rendered into six pseudo-sequence channels that share one geometry but
map tissue classes to different intensities. A smooth multiplicative bias
field emulates field inhomogeneity.

Tissue labels: 0 background, 1 skull/scalp, 2 parenchyma, 3 CSF/ventricles.
"""

import logging
import math
from dataclasses import dataclass

import torch

from src.core.errors import ConfigError, ShapeError
from src.numeric import Rng

logger = logging.getLogger(__name__)

MIN_EXTENT = 32
SEQUENCES = ("T1w", "T2w", "FLAIR", "DWI", "SWI", "T2starw")
VIEWS = ("axial", "coronal", "sagittal")

# rows: sequence; columns: background, skull, parenchyma, CSF, lesion
BASE_INTENSITY = torch.tensor(
    [
        [0.00, 0.70, 0.60, 0.20, 0.45],
        [0.00, 0.30, 0.45, 0.90, 0.75],
        [0.00, 0.40, 0.55, 0.10, 0.90],
        [0.00, 0.15, 0.50, 0.25, 0.85],
        [0.00, 0.50, 0.60, 0.70, 0.35],
        [0.00, 0.35, 0.50, 0.80, 0.60],
    ]
)

# (skull half-axis x, skull half-axis y) per view
_VIEW_AXES = {"axial": (0.80, 0.90), "coronal": (0.85, 0.80), "sagittal": (0.90, 0.75)}


@dataclass
class Phantom:
    volume: torch.Tensor  # [6, H, W] in [0, 1]
    tissue_labels: torch.Tensor  # [H, W] int64
    lesion_mask: torch.Tensor  # [H, W] bool
    view: str = "axial"
    seed: int = 0


def _ellipse(x, y, cx, cy, ax, ay, theta) -> torch.Tensor:
    dx, dy = x - cx, y - cy
    c, s = math.cos(theta), math.sin(theta)
    u = (dx * c + dy * s) / ax
    v = (-dx * s + dy * c) / ay
    return u * u + v * v <= 1.0


def phantom_generate(rng: Rng, height: int, width: int, view: str = "axial") -> Phantom:
    if height < MIN_EXTENT or width < MIN_EXTENT:
        raise ShapeError(f"Phantom extent must be >= {MIN_EXTENT}, got {height}x{width}.")
    if view not in VIEWS:
        raise ConfigError(f"Unknown phantom view '{view}'. Valid views: {', '.join(VIEWS)}.")

    y, x = torch.meshgrid(torch.linspace(-1, 1, height), torch.linspace(-1, 1, width), indexing="ij")
    cx, cy = rng.scalar(-0.05, 0.05), rng.scalar(-0.05, 0.05)
    theta = rng.scalar(-0.2, 0.2)
    base_ax, base_ay = _VIEW_AXES[view]
    ax, ay = base_ax * rng.scalar(0.95, 1.05), base_ay * rng.scalar(0.95, 1.05)

    skull = _ellipse(x, y, cx, cy, ax, ay, theta)
    brain_scale = rng.scalar(0.82, 0.88)
    brain = _ellipse(x, y, cx, cy, ax * brain_scale, ay * brain_scale, theta)

    vent_w, vent_h = 0.08 * rng.scalar(0.8, 1.2), 0.22 * rng.scalar(0.8, 1.2)
    if view == "sagittal":
        ventricles = _ellipse(x, y, cx, cy, vent_h, vent_w, theta)
    else:
        offset = 0.12 * ax
        ventricles = _ellipse(x, y, cx - offset, cy, vent_w, vent_h, theta + 0.15) | _ellipse(
            x, y, cx + offset, cy, vent_w, vent_h, theta - 0.15
        )
    ventricles &= brain

    labels = torch.zeros(height, width, dtype=torch.long)
    labels[skull] = 1
    labels[brain] = 2
    labels[ventricles] = 3

    lesion = torch.zeros(height, width, dtype=torch.bool)
    if rng.scalar() < 0.5:
        angle = rng.scalar(0.0, 2.0 * math.pi)
        radius = rng.scalar(0.2, 0.6)
        lx = cx + radius * ax * brain_scale * math.cos(angle)
        ly = cy + radius * ay * brain_scale * math.sin(angle)
        size = rng.scalar(0.06, 0.15)
        lesion = _ellipse(x, y, lx, ly, size, size * rng.scalar(0.7, 1.3), rng.scalar(0.0, math.pi)) & (labels == 2)

    intensity = BASE_INTENSITY * rng.uniform(BASE_INTENSITY.shape, 0.9, 1.1)
    classes = labels.clone()
    classes[lesion] = 4
    volume = intensity[:, classes]  # [6, H, W]

    # low-frequency parenchyma texture shared by all sequences
    fx, fy = rng.scalar(2.0, 5.0), rng.scalar(2.0, 5.0)
    phase_x, phase_y = rng.scalar(0.0, 2 * math.pi), rng.scalar(0.0, 2 * math.pi)
    texture = 0.05 * torch.sin(fx * x + phase_x) * torch.cos(fy * y + phase_y)
    volume = volume + texture * (labels == 2) * rng.uniform((6, 1, 1), 0.5, 1.5)

    a = rng.uniform((3,), -0.1, 0.1)
    bias_field = 1.0 + a[0] * x + a[1] * y + a[2] * (x * x + y * y)
    volume = (volume * bias_field).clamp(0.0, 1.0)

    logger.debug("Phantom | seed=%d view=%s size=%dx%d lesion=%d", rng.seed, view, height, width, int(lesion.sum()))
    return Phantom(volume, labels, lesion, view, rng.seed)


def phantom_sections(rng: Rng, height: int, width: int) -> list[Phantom]:
    """One phantom per orthogonal view, each from its own derived stream."""
    return [phantom_generate(rng.derive(i + 1), height, width, view) for i, view in enumerate(VIEWS)]
