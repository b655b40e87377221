import logging

import torch
import torch.nn.functional as F

from src.augment.masking import MaskPlan
from src.core.errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)


def _pixel_mask(plans: MaskPlan | list[MaskPlan], like: torch.Tensor) -> torch.Tensor:
    """Boolean pixel mask broadcastable against `like` ([C,H,W] or [B,C,H,W])."""
    if isinstance(plans, MaskPlan):
        return plans.pixel_mask().expand(like.shape)
    if len(plans) != like.shape[0]:
        raise ShapeError(f"{len(plans)} mask plans for a batch of {like.shape[0]}.")
    return torch.stack([p.pixel_mask().expand(like.shape[1:]) for p in plans])


def recon_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    plan: MaskPlan | list[MaskPlan] | None,
    mode: str = "masked-only",
) -> torch.Tensor:
    """MSE over pixels of masked patches, or over all pixels.

    Masked-only with nothing masked contributes zero (kept on the graph).
    """
    if pred.shape != target.shape:
        raise ShapeError(f"Prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ.")
    if mode == "all-pixels" or plan is None:
        return F.mse_loss(pred, target)
    if mode != "masked-only":
        raise ConfigError(f"Unknown reconstruction mode '{mode}'.")
    mask = _pixel_mask(plan, pred)
    count = int(mask.sum())
    if count == 0:
        return (pred * 0.0).sum()
    diff = (pred - target)[mask]
    return (diff * diff).sum() / count


def consistency_loss(emb_a: torch.Tensor, emb_b: torch.Tensor) -> torch.Tensor:
    """1 − cos(a, b) over the last axis, averaged over any leading axes. Zero vectors give 1."""
    if emb_a.shape != emb_b.shape:
        raise ShapeError(f"Embedding shapes differ: {tuple(emb_a.shape)} vs {tuple(emb_b.shape)}.")
    norm_a, norm_b = emb_a.norm(dim=-1), emb_b.norm(dim=-1)
    degenerate = (norm_a == 0) | (norm_b == 0)
    if bool(degenerate.any()):
        logger.warning("Consistency loss | zero embedding vector, cosine taken as 0")
    denom = torch.where(degenerate, torch.ones_like(norm_a), norm_a * norm_b)
    cos = (emb_a * emb_b).sum(dim=-1) / denom
    cos = torch.where(degenerate, torch.zeros_like(cos), cos)
    return (1.0 - cos).mean()


def total_loss(sup: torch.Tensor, con: torch.Tensor | float, lam: float) -> torch.Tensor:
    """L_sup + λ·L_con; λ = 0 returns `sup` itself."""
    if lam < 0:
        raise ConfigError(f"lambda must be >= 0, got {lam}.")
    if lam == 0:
        return sup
    return sup + lam * con


def segmentation_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Per-pixel cross-entropy; logits [B,K,H,W] or [K,H,W], labels [B,H,W] or [H,W]."""
    if logits.dim() == 3:
        logits, labels = logits.unsqueeze(0), labels.unsqueeze(0)
    if logits.shape[-2:] != labels.shape[-2:] or logits.shape[0] != labels.shape[0]:
        raise ShapeError(f"Logits {tuple(logits.shape)} do not align with labels {tuple(labels.shape)}.")
    return F.cross_entropy(logits, labels.long())


def task_loss(pred: torch.Tensor, target: torch.Tensor, segment: bool) -> torch.Tensor:
    if segment:
        return segmentation_loss(pred, target)
    if pred.shape != target.shape:
        raise ShapeError(f"Prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ.")
    return F.mse_loss(pred, target)
