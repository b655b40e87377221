"""Fine-tuning augmentation: joint flip, small rotation and intensity jitter."""

import math

import torch
import torch.nn.functional as F

from src.numeric import Rng

MAX_ROTATION_DEG = 15.0
JITTER = 0.10


def _rotate(x: torch.Tensor, theta: torch.Tensor, mode: str) -> torch.Tensor:
    grid = F.affine_grid(theta, list(x.shape), align_corners=False)
    return F.grid_sample(x, grid, mode=mode, padding_mode="zeros", align_corners=False)


def finetune_augment(
    inputs: torch.Tensor,
    targets: torch.Tensor,
    rng: Rng,
    labels: bool = False,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Apply one random flip/rotation/jitter draw per sample to input and target alike.

    inputs [B,C,h,w]; targets [B,C',H,W] images or [B,H,W] label maps (`labels`).
    Rotation works in normalized coordinates, so differently sized input and
    target (super-resolution) stay aligned. Labels use nearest sampling and no jitter.
    """
    out_in, out_tg = [], []
    for i in range(inputs.shape[0]):
        x, y = inputs[i : i + 1], targets[i : i + 1]
        if labels:
            y = y.unsqueeze(1).to(x.dtype)
        for dim in (-1, -2):
            if rng.scalar() < 0.5:
                x, y = x.flip(dim), y.flip(dim)
        angle = math.radians(rng.scalar(-MAX_ROTATION_DEG, MAX_ROTATION_DEG))
        c, s = math.cos(angle), math.sin(angle)
        theta = torch.tensor([[[c, -s, 0.0], [s, c, 0.0]]], dtype=x.dtype)
        x = _rotate(x, theta, "bilinear")
        y = _rotate(y, theta, "nearest" if labels else "bilinear")
        gain = rng.scalar(1.0 - JITTER, 1.0 + JITTER)
        x = x * gain
        if labels:
            y = y.squeeze(1).round().long()
        else:
            y = y * gain
        out_in.append(x)
        out_tg.append(y)
    return torch.cat(out_in), torch.cat(out_tg)
