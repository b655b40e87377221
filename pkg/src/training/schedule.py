import math

import torch
from torch.optim.lr_scheduler import LambdaLR

from src.core.errors import ConfigError


def _check_steps(total_steps: int, warmup_steps: int) -> None:
    if total_steps < 1 or not 0 <= warmup_steps < total_steps:
        raise ConfigError(f"Need 0 <= warmup_steps < total_steps, got {warmup_steps} and {total_steps}.")


def lr_at(step: int, total_steps: int, warmup_steps: int, lr0: float) -> float:
    """Linear warm-up 0 → lr0, then cosine annealing to 0 at `total_steps`."""
    if step < 0:
        raise ConfigError(f"Step must be >= 0, got {step}.")
    _check_steps(total_steps, warmup_steps)
    if step < warmup_steps:
        return lr0 * step / warmup_steps
    progress = min(1.0, (step - warmup_steps) / (total_steps - warmup_steps))
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * progress))


def build_scheduler(optimizer: torch.optim.Optimizer, total_steps: int, warmup_steps: int) -> LambdaLR:
    """LambdaLR over `lr_at`; the optimizer's initial lr plays lr0."""
    _check_steps(total_steps, warmup_steps)
    return LambdaLR(optimizer, lambda step: lr_at(step, total_steps, warmup_steps, 1.0))
