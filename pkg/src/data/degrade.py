import logging
import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from src.core.errors import ConfigError, ShapeError
from src.model.config import TaskKind
from src.numeric import Rng

logger = logging.getLogger(__name__)

NOISE_GRID = (0.05, 0.10, 0.15, 0.20, 0.25)
SR_FACTORS = (2, 3, 4)


@dataclass(frozen=True)
class DegradationSpec:
    task: TaskKind
    sr_factor: int = 2
    sigma: float = 0.10
    blur_sigma: float = 1.0
    sigma_override: bool = False

    def __post_init__(self):
        if self.sr_factor not in SR_FACTORS:
            raise ConfigError(f"SR factor must be one of {SR_FACTORS}, got {self.sr_factor}.")
        if self.sigma < 0 or self.blur_sigma < 0:
            raise ConfigError(f"Degradation sigmas must be >= 0, got sigma={self.sigma} blur={self.blur_sigma}.")
        if not self.sigma_override and not any(math.isclose(self.sigma, s) for s in NOISE_GRID):
            raise ConfigError(f"Noise sigma {self.sigma} is not on the grid {NOISE_GRID}; set sigma_override to use it.")

    @classmethod
    def for_task(cls, task: TaskKind | str, sigma: float = 0.10, blur_sigma: float = 1.0) -> "DegradationSpec":
        task = TaskKind.parse(task)
        return cls(task, sr_factor=task.scale if task.scale > 1 else 2, sigma=sigma, blur_sigma=blur_sigma,
                   sigma_override=not any(math.isclose(sigma, s) for s in NOISE_GRID))


def _as_4d(image: torch.Tensor) -> tuple[torch.Tensor, int]:
    ndim = image.dim()
    if ndim == 2:
        return image[None, None], ndim
    if ndim == 3:
        return image[None], ndim
    if ndim == 4:
        return image, ndim
    raise ShapeError(f"Expected a 2-D, 3-D or 4-D image, got shape {tuple(image.shape)}.")


def _restore(x: torch.Tensor, ndim: int) -> torch.Tensor:
    return x.reshape(x.shape[4 - ndim:]) if ndim < 4 else x


def degrade_sr(image: torch.Tensor, r: int) -> torch.Tensor:
    """r×r box-average downsampling over the last two axes."""
    if r < 1 or image.shape[-2] % r or image.shape[-1] % r:
        raise ShapeError(f"Factor {r} does not divide image extent {tuple(image.shape[-2:])}.")
    x, ndim = _as_4d(image)
    return _restore(F.avg_pool2d(x, r), ndim)


def upsample_nearest(image: torch.Tensor, r: int) -> torch.Tensor:
    return image.repeat_interleave(r, dim=-2).repeat_interleave(r, dim=-1)


def add_gaussian_noise(image: torch.Tensor, sigma: float, rng: Rng) -> torch.Tensor:
    """i.i.d. additive N(0, sigma²); no clipping."""
    if sigma < 0:
        raise ConfigError(f"Noise sigma must be >= 0, got {sigma}.")
    if sigma == 0:
        return image.clone()
    return image + rng.normal(image.shape, std=sigma)


def gaussian_kernel1d(sigma: float) -> torch.Tensor:
    radius = max(1, math.ceil(3 * sigma))
    t = torch.arange(-radius, radius + 1, dtype=torch.float64)
    k = torch.exp(-(t * t) / (2 * sigma * sigma))
    return k / k.sum()


def degrade_blur(image: torch.Tensor, sigma: float) -> torch.Tensor:
    """Separable Gaussian blur, reflect border. sigma=0 is the identity."""
    if sigma < 0:
        raise ConfigError(f"Blur sigma must be >= 0, got {sigma}.")
    if sigma == 0:
        return image.clone()
    x, ndim = _as_4d(image)
    k = gaussian_kernel1d(sigma).to(x.dtype)
    radius = k.numel() // 2
    if radius >= min(x.shape[-2:]):
        raise ShapeError(f"Blur sigma {sigma} too large for image extent {tuple(x.shape[-2:])}.")
    b, c, h, w = x.shape
    flat = x.reshape(b * c, 1, h, w)
    flat = F.conv2d(F.pad(flat, (radius, radius, 0, 0), mode="reflect"), k.view(1, 1, 1, -1))
    flat = F.conv2d(F.pad(flat, (0, 0, radius, radius), mode="reflect"), k.view(1, 1, -1, 1))
    return _restore(flat.reshape(b, c, h, w), ndim)


def make_pair(
    volume: torch.Tensor,
    labels: torch.Tensor,
    spec: DegradationSpec,
    rng: Rng,
    out_channels: int = 3,
) -> tuple[torch.Tensor, torch.Tensor]:
    """(network input, target) for one [C,H,W] volume."""
    task = spec.task
    if task is TaskKind.SEGMENT:
        return volume, labels.long()
    if task is TaskKind.RECON:
        return volume, volume
    target = volume[..., :out_channels, :, :]
    if task.scale > 1:
        return degrade_sr(volume, task.scale), target
    if task is TaskKind.DENOISE:
        return add_gaussian_noise(volume, spec.sigma, rng), target
    if task is TaskKind.DEBLUR:
        return degrade_blur(volume, spec.blur_sigma), target
    raise ConfigError(f"No degradation registered for task '{task.value}'.")
