import logging
from typing import Sequence

import torch

from src.core.errors import ContractError
from src.model.params import ParamStore

logger = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


def build_optimizer(store: ParamStore, lr: float) -> torch.optim.Adam:
    """Adam over the store's currently trainable entries only."""
    params = store.trainable()
    if not params:
        raise ContractError("No trainable parameters to optimize.")
    logger.debug("Optimizer built | params=%d elements=%d lr=%.3g", len(params), store.count("trainable"), lr)
    return torch.optim.Adam(params, lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS)


def _params(optimizer: torch.optim.Optimizer) -> list[torch.Tensor]:
    return [p for group in optimizer.param_groups for p in group["params"]]


def optimizer_step(
    optimizer: torch.optim.Optimizer,
    lr: float | None = None,
    grads: Sequence[torch.Tensor | None] | None = None,
) -> None:
    """One bias-corrected Adam update, then clear gradients.

    `grads`, when given, must align one-to-one with the optimizer's parameters
    and replaces whatever backward() left in `.grad`.
    """
    params = _params(optimizer)
    frozen = [i for i, p in enumerate(params) if not p.requires_grad]
    if frozen:
        raise ContractError(f"Optimizer holds {len(frozen)} frozen parameter(s); rebuild it after freezing.")
    if grads is not None:
        if len(grads) != len(params):
            raise ContractError(f"{len(grads)} gradients for {len(params)} parameters.")
        for p, g in zip(params, grads):
            if g is not None and g.shape != p.shape:
                raise ContractError(f"Gradient shape {tuple(g.shape)} does not match parameter {tuple(p.shape)}.")
            p.grad = None if g is None else g.detach().clone()
    if lr is not None:
        for group in optimizer.param_groups:
            group["lr"] = lr
    optimizer.step()
    optimizer.zero_grad(set_to_none=True)
