from .kspace import NoiseSpec, WeightKind, kspace_noise, noise_visible_patches, radial_index, radial_weight, ring_noise_power
from .masking import EdgeMap, MaskPlan, Tier, apply_mask, edge_energy, mask_rows, plan_mask, plan_uniform
from .pipeline import AugmentConfig, AugmentedSample, SpectralAugmentor

__all__ = [
    "AugmentConfig",
    "AugmentedSample",
    "EdgeMap",
    "MaskPlan",
    "NoiseSpec",
    "SpectralAugmentor",
    "Tier",
    "WeightKind",
    "apply_mask",
    "edge_energy",
    "kspace_noise",
    "mask_rows",
    "noise_visible_patches",
    "plan_mask",
    "plan_uniform",
    "radial_index",
    "radial_weight",
    "ring_noise_power",
]
