"""
Dense tensor operations
=======================
Thin, contract-checking wrappers over torch for the handful of operations
every other module builds on. All of them are differentiable through torch
autograd; the wrappers only add the shape preconditions and error types.

FFT convention: forward unnormalised, inverse carries 1/(H·W). Only the last
two axes are transformed and both must be powers of two.
"""

import torch
import torch.nn.functional as F

from src.core.errors import ContractError, ShapeError, SizingError


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _check_fft_extents(x: torch.Tensor) -> None:
    if x.dim() < 2:
        raise ShapeError(f"FFT needs at least two axes, got shape {tuple(x.shape)}.")
    for axis in (x.dim() - 2, x.dim() - 1):
        if not is_power_of_two(x.shape[axis]):
            raise SizingError(axis, x.shape[axis])


def fft2(x: torch.Tensor) -> torch.Tensor:
    """Unnormalised 2-D DFT over the last two axes; earlier axes are batch."""
    _check_fft_extents(x)
    if not x.is_complex():
        x = x.to(torch.complex128)
    return torch.fft.fft2(x, norm="backward")


def ifft2(x: torch.Tensor) -> torch.Tensor:
    """Inverse of fft2, scaled by 1/(H·W)."""
    _check_fft_extents(x)
    if not x.is_complex():
        x = x.to(torch.complex128)
    return torch.fft.ifft2(x, norm="backward")


def conv2d(
    x: torch.Tensor,
    kernel: torch.Tensor,
    bias: torch.Tensor | None = None,
    padding: str = "same",
) -> torch.Tensor:
    """Cross-correlation of [C_in,H,W] (or [B,C_in,H,W]) with [C_out,C_in,kh,kw].

    Same padding keeps H and W and fills the border with zeros.
    """
    if kernel.dim() != 4:
        raise ShapeError(f"Kernel must be [C_out,C_in,kh,kw], got shape {tuple(kernel.shape)}.")
    unbatched = x.dim() == 3
    if unbatched:
        x = x.unsqueeze(0)
    if x.dim() != 4:
        raise ShapeError(f"Input must be [C,H,W] or [B,C,H,W], got shape {tuple(x.shape)}.")
    c_out, c_in, kh, kw = kernel.shape
    if x.shape[1] != c_in:
        raise ShapeError(f"Channel mismatch: input has {x.shape[1]} channels, kernel expects {c_in}.")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"Bias must have shape ({c_out},), got {tuple(bias.shape)}.")
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"Same padding needs odd kernel extents, got {kh}x{kw}.")
        pad = (kh // 2, kw // 2)
    elif padding == "valid":
        pad = (0, 0)
    else:
        raise ShapeError(f"Unknown padding mode '{padding}'.")
    out = F.conv2d(x, kernel, bias, padding=pad)
    return out.squeeze(0) if unbatched else out


def pixel_shuffle(x: torch.Tensor, r: int) -> torch.Tensor:
    """[C·r², H, W] → [C, rH, rW]; out(c, r·i+di, r·j+dj) = in(c·r² + di·r + dj, i, j)."""
    if r < 1:
        raise ShapeError(f"Upscale factor must be >= 1, got {r}.")
    if x.dim() < 3 or x.shape[-3] % (r * r) != 0:
        raise ShapeError(f"Channel count of shape {tuple(x.shape)} is not divisible by r²={r * r}.")
    return F.pixel_shuffle(x, r)


def pixel_unshuffle(x: torch.Tensor, r: int) -> torch.Tensor:
    """Inverse of pixel_shuffle: [C, rH, rW] → [C·r², H, W]."""
    if r < 1:
        raise ShapeError(f"Downscale factor must be >= 1, got {r}.")
    if x.dim() < 3 or x.shape[-1] % r != 0 or x.shape[-2] % r != 0:
        raise ShapeError(f"Spatial extents of shape {tuple(x.shape)} are not divisible by r={r}.")
    return F.pixel_unshuffle(x, r)


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.dim() != 2 or b.dim() != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {tuple(a.shape)} and {tuple(b.shape)}.")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"Inner extents differ: {tuple(a.shape)} @ {tuple(b.shape)}.")
    return a @ b


def softmax(x: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """Max-subtracted softmax along `dim`."""
    if not torch.isfinite(x).all():
        raise ContractError("softmax input contains NaN or Inf.")
    return torch.softmax(x, dim=dim)
