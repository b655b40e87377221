"""
Reverse-mode differentiation contract
=====================================
The tape is torch autograd: every tensor produced from a `requires_grad`
leaf is a node whose parents and local rules torch records. This module adds
the scalar-loss precondition and a central-difference oracle used to verify
every differentiable operation in the package.
"""

import logging
from collections.abc import Callable, Sequence

import torch

from src.core.errors import ContractError

logger = logging.getLogger(__name__)


def backward(loss: torch.Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into `.grad` of every reachable leaf."""
    if loss.numel() != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {tuple(loss.shape)}.")
    if not loss.requires_grad:
        raise ContractError("Loss is not connected to any differentiable input.")
    loss.backward()


def finite_diff_grad(
    f: Callable[[torch.Tensor], torch.Tensor | float],
    x: torch.Tensor,
    eps: float = 1e-5,
) -> torch.Tensor:
    """Central differences (f(x+εe) − f(x−εe)) / 2ε for every element of x."""
    if eps <= 0:
        raise ContractError(f"Finite-difference step must be positive, got {eps}.")
    point = x.detach().clone()
    grad = torch.zeros_like(point)
    flat = point.view(-1)
    gflat = grad.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            f_plus = float(f(point))
            flat[i] = orig - eps
            f_minus = float(f(point))
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def relative_error(a: torch.Tensor, b: torch.Tensor) -> float:
    """Norm-wise relative difference ‖a − b‖ / max(‖a‖, ‖b‖, 1e-12)."""
    denom = max(a.norm().item(), b.norm().item(), 1e-12)
    return (a - b).norm().item() / denom


def gradient_check(
    f: Callable[..., torch.Tensor],
    inputs: Sequence[torch.Tensor],
    eps: float = 1e-5,
) -> float:
    """Worst relative error between autograd and finite differences over `inputs`.

    `f` maps the inputs to a scalar tensor.
    """
    leaves = [t.detach().clone().requires_grad_(True) for t in inputs]
    backward(f(*leaves))
    worst = 0.0
    for i, leaf in enumerate(leaves):
        analytic = leaf.grad if leaf.grad is not None else torch.zeros_like(leaf)
        fixed = [t.detach() for t in leaves]

        def partial(x: torch.Tensor, i: int = i) -> torch.Tensor:
            args = list(fixed)
            args[i] = x
            return f(*args)

        numeric = finite_diff_grad(partial, leaf, eps)
        err = relative_error(analytic, numeric)
        logger.debug("Gradient check | input=%d shape=%s rel_err=%.3e", i, tuple(leaf.shape), err)
        worst = max(worst, err)
    return worst
