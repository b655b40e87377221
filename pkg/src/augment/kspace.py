"""
Frequency-weighted k-space noise
================================
    F'(u,v) = F(u,v) + λ·|F(u,v)|·W(u,v)·η(u,v)

η is complex Gaussian with independent N(0, σ²) real and imaginary parts,
drawn Hermitian-symmetric so that the perturbed patch stays real. W is a
radial ramp, 0 at DC, 1 at the highest radial frequency of the grid.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import torch

from src.core.errors import ConfigError, ShapeError, SizingError
from src.numeric import Rng, fft2, ifft2, is_power_of_two

logger = logging.getLogger(__name__)


class WeightKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class NoiseSpec:
    lam: float = 0.5
    sigma: float = 0.1
    weight_kind: WeightKind = WeightKind.LINEAR
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0 or self.sigma < 0:
            raise ConfigError(f"Noise amplitude and std must be >= 0, got lambda={self.lam} sigma={self.sigma}.")
        object.__setattr__(self, "weight_kind", WeightKind(self.weight_kind))


def radial_index(height: int, width: int) -> torch.Tensor:
    """Radial frequency |(u, v)| of every bin under FFT index folding."""
    u = torch.fft.fftfreq(height, d=1.0 / height).abs()
    v = torch.fft.fftfreq(width, d=1.0 / width).abs()
    return torch.sqrt(u[:, None] ** 2 + v[None, :] ** 2)


def radial_weight(height: int, width: int, kind: WeightKind | str = WeightKind.LINEAR) -> torch.Tensor:
    if height < 1 or width < 1:
        raise ShapeError(f"radial_weight needs H,W >= 1, got {height}x{width}.")
    r = radial_index(height, width)
    r_max = r.max()
    if r_max == 0:
        return torch.zeros(height, width)
    ramp = r / r_max
    return ramp if WeightKind(kind) is WeightKind.LINEAR else ramp**2


def hermitian_noise(shape, sigma: float, rng: Rng) -> torch.Tensor:
    """Complex field with E|η|² = 2σ² per bin whose inverse DFT is real."""
    height, width = shape[-2], shape[-1]
    real_field = rng.normal(shape, std=sigma)
    return fft2(real_field) * math.sqrt(2.0 / (height * width))


def kspace_noise(patch: torch.Tensor, spec: NoiseSpec, rng: Rng | None = None) -> torch.Tensor:
    """Perturb [..., h, w] patches in k-space; leading axes are independent patches."""
    if patch.dim() < 2:
        raise ShapeError(f"kspace_noise expects [..., h, w], got shape {tuple(patch.shape)}.")
    for axis in (patch.dim() - 2, patch.dim() - 1):
        if not is_power_of_two(patch.shape[axis]):
            raise SizingError(axis, patch.shape[axis])
    if spec.lam == 0:
        return patch.clone()
    rng = rng if rng is not None else Rng(spec.seed)
    height, width = patch.shape[-2], patch.shape[-1]
    spectrum = fft2(patch)
    weight = radial_weight(height, width, spec.weight_kind)
    eta = hermitian_noise(patch.shape, spec.sigma, rng)
    noisy = spectrum + spec.lam * spectrum.abs() * weight * eta
    return ifft2(noisy).real


def to_patches(image: torch.Tensor, patch_size: int) -> torch.Tensor:
    """[C, H, W] → [C, gh, gw, P, P]."""
    c, h, w = image.shape
    gh, gw = h // patch_size, w // patch_size
    return image.reshape(c, gh, patch_size, gw, patch_size).permute(0, 1, 3, 2, 4)


def from_patches(patches: torch.Tensor) -> torch.Tensor:
    """Inverse of to_patches."""
    c, gh, gw, p, _ = patches.shape
    return patches.permute(0, 1, 3, 2, 4).reshape(c, gh * p, gw * p)


def noise_visible_patches(
    image: torch.Tensor,
    patch_size: int,
    visible: torch.Tensor,
    spec: NoiseSpec,
    rng: Rng,
) -> torch.Tensor:
    """Apply kspace_noise to every channel of every visible patch of a [C, H, W] image.

    `visible` is a flat [N] boolean grid in row-major patch order.
    """
    if image.shape[-1] % patch_size or image.shape[-2] % patch_size:
        raise ShapeError(f"Patch size {patch_size} does not divide image shape {tuple(image.shape)}.")
    patches = to_patches(image, patch_size)
    noised = kspace_noise(patches, spec, rng)
    keep = visible.view(1, patches.shape[1], patches.shape[2], 1, 1)
    return from_patches(torch.where(keep, noised, patches))


def ring_noise_power(clean: torch.Tensor, noised: torch.Tensor) -> list[float]:
    """Mean |F' − F|² per integer radial ring over the last two axes (ring 0 = DC)."""
    delta = (fft2(noised) - fft2(clean)).abs() ** 2
    rings = radial_index(clean.shape[-2], clean.shape[-1]).round().long()
    flat = delta.reshape(-1, rings.numel())
    powers = []
    for ring in range(int(rings.max()) + 1):
        sel = (rings.reshape(-1) == ring)
        powers.append(flat[:, sel].mean().item() if sel.any() else 0.0)
    return powers
