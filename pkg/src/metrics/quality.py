import math

import torch
import torch.nn.functional as F

from src.core.errors import ConfigError, ShapeError

SSIM_SIGMA = 1.5


def _check_pair(pred: torch.Tensor, target: torch.Tensor) -> None:
    if pred.shape != target.shape:
        raise ShapeError(f"Metric inputs differ in shape: {tuple(pred.shape)} vs {tuple(target.shape)}.")


def psnr(pred: torch.Tensor, target: torch.Tensor, peak: float = 1.0) -> float:
    """10·log10(peak²/MSE) in dB; identical inputs give math.inf."""
    _check_pair(pred, target)
    if peak <= 0:
        raise ConfigError(f"PSNR peak must be > 0, got {peak}.")
    mse = float(((pred.double() - target.double()) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = 11, sigma: float = SSIM_SIGMA) -> torch.Tensor:
    t = torch.arange(size, dtype=torch.float64) - (size - 1) / 2
    g = torch.exp(-(t * t) / (2 * sigma * sigma))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim(
    pred: torch.Tensor,
    target: torch.Tensor,
    window: int = 11,
    k1: float = 0.01,
    k2: float = 0.03,
    peak: float = 1.0,
) -> float:
    """Mean Gaussian-weighted SSIM over all valid windows (and channels, for [C,H,W])."""
    _check_pair(pred, target)
    if pred.dim() not in (2, 3):
        raise ShapeError(f"SSIM expects [H,W] or [C,H,W], got {tuple(pred.shape)}.")
    if pred.shape[-2] < window or pred.shape[-1] < window:
        raise ShapeError(f"Image {tuple(pred.shape[-2:])} is smaller than the {window}x{window} SSIM window.")
    x = pred.double().reshape(-1, 1, *pred.shape[-2:])
    y = target.double().reshape(-1, 1, *target.shape[-2:])
    w = gaussian_window(window).view(1, 1, window, window)
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2

    mu_x, mu_y = F.conv2d(x, w), F.conv2d(y, w)
    var_x = F.conv2d(x * x, w) - mu_x * mu_x
    var_y = F.conv2d(y * y, w) - mu_y * mu_y
    cov = F.conv2d(x * y, w) - mu_x * mu_y

    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float((num / den).mean())
