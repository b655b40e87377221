"""
Inverse-frequency hierarchical masking
======================================
Patches rich in edge energy are masked LESS often than flat background
patches, so anatomical detail stays visible and the model reconstructs the
low-frequency context around it.

Tier rule: per-patch mean edge energy is split at its tau-quantile; patches at
or above it (ties included) are high-edge with probability 0.5·p_base, the rest
are low-edge with the probability that brings the expected masked fraction of
the whole image back to p_base.
"""

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import torch
import torch.nn.functional as F

from src.core.errors import ConfigError, ShapeError
from src.numeric import Rng

logger = logging.getLogger(__name__)


class Tier(str, Enum):
    HIGH_EDGE = "high-edge"
    LOW_EDGE = "low-edge"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class EdgeMap:
    values: torch.Tensor  # [H, W], >= 0


@dataclass
class MaskPlan:
    patch_size: int
    grid: tuple[int, int]
    tiers: list[Tier]
    probs: torch.Tensor  # [N] float64
    decisions: torch.Tensor  # [N] bool, True = masked
    seed: int
    warnings: list[str] = field(default_factory=list)

    @property
    def num_patches(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def masked_fraction(self) -> float:
        return self.decisions.double().mean().item()

    @property
    def expected_fraction(self) -> float:
        return self.probs.mean().item()

    def pixel_mask(self) -> torch.Tensor:
        """[H, W] boolean map of pixels that belong to masked patches."""
        grid = self.decisions.view(self.grid)
        return grid.repeat_interleave(self.patch_size, 0).repeat_interleave(self.patch_size, 1)

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["patch_index", "tier", "prob", "masked"])
            for i, (tier, prob, masked) in enumerate(zip(self.tiers, self.probs.tolist(), self.decisions.tolist())):
                writer.writerow([i, tier.value, repr(prob), int(masked)])


def edge_energy(image: torch.Tensor) -> EdgeMap:
    """E = (|∇x I| + |∇y I|) / 2 with central differences and replicated borders."""
    if image.dim() != 2:
        raise ShapeError(f"edge_energy expects [H,W], got shape {tuple(image.shape)}.")
    if image.shape[0] < 2 or image.shape[1] < 2:
        raise ShapeError(f"edge_energy needs H,W >= 2, got {tuple(image.shape)}.")
    padded = F.pad(image[None, None], (1, 1, 1, 1), mode="replicate")[0, 0]
    grad_x = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    grad_y = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return EdgeMap(values=(grad_x.abs() + grad_y.abs()) / 2.0)


def _check_grid(height: int, width: int, patch_size: int) -> tuple[int, int]:
    if patch_size < 1 or height % patch_size or width % patch_size:
        raise ShapeError(f"Patch size {patch_size} does not divide image extent {height}x{width}.")
    return height // patch_size, width // patch_size


def check_p_base(p_base: float) -> None:
    if not 0.0 < p_base <= 1.0:
        raise ConfigError(f"p_base must lie in (0, 1], got {p_base}.")


def plan_mask(edges: EdgeMap, patch_size: int, p_base: float, tau: float, rng: Rng) -> MaskPlan:
    check_p_base(p_base)
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie in (0, 1), got {tau}.")
    values = edges.values
    grid = _check_grid(values.shape[0], values.shape[1], patch_size)
    patch_means = F.avg_pool2d(values[None, None], patch_size)[0, 0].reshape(-1)
    threshold = torch.quantile(patch_means, tau)
    high = patch_means >= threshold

    n = patch_means.numel()
    n_high = int(high.sum())
    n_low = n - n_high
    p_high = 0.5 * p_base
    warnings: list[str] = []
    if n_low:
        p_low = (p_base * n - p_high * n_high) / n_low
        if p_low > 1.0:
            warnings.append(f"low-edge probability {p_low:.4f} clamped to 1; global target {p_base} not reachable")
            p_low = 1.0
    else:
        p_low = 0.0
        warnings.append(f"no low-edge patches; expected masked fraction is {p_high} instead of {p_base}")
    for message in warnings:
        logger.warning("Mask plan | %s", message)

    probs = torch.where(high, torch.tensor(p_high), torch.tensor(p_low))
    decisions = rng.uniform((n,)) < probs
    tiers = [Tier.HIGH_EDGE if h else Tier.LOW_EDGE for h in high.tolist()]
    logger.debug(
        "Mask plan | grid=%s high=%d p_high=%.4f p_low=%.4f masked=%d",
        grid, n_high, p_high, p_low, int(decisions.sum()),
    )
    return MaskPlan(patch_size, grid, tiers, probs, decisions, rng.seed, warnings)


def plan_uniform(height: int, width: int, patch_size: int, p_base: float, rng: Rng) -> MaskPlan:
    """Edge-agnostic plan: every patch masked with probability p_base."""
    check_p_base(p_base)
    grid = _check_grid(height, width, patch_size)
    n = grid[0] * grid[1]
    probs = torch.full((n,), float(p_base))
    decisions = rng.uniform((n,)) < probs
    return MaskPlan(patch_size, grid, [Tier.UNIFORM] * n, probs, decisions, rng.seed)


def apply_mask(tokens: torch.Tensor, plan: MaskPlan, mask_token: torch.Tensor) -> torch.Tensor:
    """Replace masked rows of [..., N, D] by `mask_token`; other rows pass through untouched."""
    if tokens.shape[-2] != plan.num_patches:
        raise ShapeError(f"Token count {tokens.shape[-2]} does not match plan grid {plan.grid}.")
    return mask_rows(tokens, plan.decisions, mask_token)


def mask_rows(tokens: torch.Tensor, decisions: torch.Tensor, mask_token: torch.Tensor) -> torch.Tensor:
    """Row replacement for [..., N, D] tokens given [..., N] boolean decisions."""
    if mask_token.shape != tokens.shape[-1:]:
        raise ShapeError(f"Mask token shape {tuple(mask_token.shape)} does not match D={tokens.shape[-1]}.")
    return torch.where(decisions.unsqueeze(-1), mask_token.expand_as(tokens), tokens)
