import logging
from dataclasses import dataclass, field

import torch

from src.core.errors import ConfigError
from src.numeric import Rng

from .kspace import NoiseSpec, noise_visible_patches
from .masking import MaskPlan, check_p_base, edge_energy, plan_mask, plan_uniform

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentConfig:
    patch_size: int = 16
    p_base: float = 0.25
    tau: float = 0.5
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    inv_freq_mask: bool = True
    fft_noise: bool = True

    def __post_init__(self):
        check_p_base(self.p_base)
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {self.tau}.")
        if self.patch_size < 1:
            raise ConfigError(f"patch_size must be >= 1, got {self.patch_size}.")


@dataclass
class AugmentedSample:
    clean: torch.Tensor  # [C, H, W]
    corrupted: torch.Tensor  # [C, H, W], masked patches zeroed
    plan: MaskPlan


class SpectralAugmentor:
    """Pretraining corruption: plan a mask, noise the visible patches, blank the masked ones.

    With `inv_freq_mask` off the plan is uniform at p_base; with `fft_noise`
    off the visible patches pass through unchanged.
    """

    def __init__(self, config: AugmentConfig):
        self.config = config

    def plan(self, image: torch.Tensor, rng: Rng) -> MaskPlan:
        cfg = self.config
        if cfg.inv_freq_mask:
            return plan_mask(edge_energy(image.mean(0)), cfg.patch_size, cfg.p_base, cfg.tau, rng)
        return plan_uniform(image.shape[-2], image.shape[-1], cfg.patch_size, cfg.p_base, rng)

    def __call__(self, image: torch.Tensor, rng: Rng) -> AugmentedSample:
        plan = self.plan(image, rng.derive(1))
        if self.config.fft_noise:
            noised = noise_visible_patches(image, self.config.patch_size, ~plan.decisions, self.config.noise, rng.derive(2))
        else:
            noised = image
        corrupted = torch.where(plan.pixel_mask(), torch.zeros_like(noised), noised)
        return AugmentedSample(image, corrupted, plan)
