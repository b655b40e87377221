"""
Building blocks of the encoder-decoder
======================================
ICN (instance-centre norm), multi-head attention, the frequency-gated FFN and
the slim convolution stacks used for heads and tails.

Token tensors are batched [B, N, D]; token grids are (gh, gw) with N = gh·gw in
row-major order.
"""

import logging
import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.core.errors import ConfigError, ShapeError
from src.numeric import fft2, ifft2, is_power_of_two, pixel_shuffle, softmax

logger = logging.getLogger(__name__)


def _expand_mask(mask: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    """Leading-axes masks ([N] for [N, D]) gain trailing singleton axes, then broadcast."""
    m = mask.bool()
    while m.dim() < x.dim():
        m = m.unsqueeze(-1)
    try:
        return m.expand_as(x)
    except RuntimeError:
        raise ShapeError(f"Mask shape {tuple(mask.shape)} does not fit tensor shape {tuple(x.shape)}.") from None


def icn(
    x: torch.Tensor,
    mask: torch.Tensor | None = None,
    eps: float = 1e-5,
    batched: bool = False,
) -> torch.Tensor:
    """(x − μ_fg) / (σ_fg + ε) with statistics over foreground elements only.

    The normalisation applies to every element. With `batched`, axis 0 indexes
    independent instances. An empty mask falls back to whole-tensor statistics.
    """
    dims = tuple(range(1, x.dim())) if batched else tuple(range(x.dim()))
    if mask is None:
        weights = torch.ones_like(x)
    else:
        weights = _expand_mask(mask, x).to(x.dtype)
    count = weights.sum(dim=dims, keepdim=True)
    empty = count == 0
    if empty.any():
        logger.warning("ICN | empty foreground mask for %d instance(s); using whole-tensor statistics", int(empty.sum()))
        weights = torch.where(empty, torch.ones_like(weights), weights)
        count = weights.sum(dim=dims, keepdim=True)
    mu = (x * weights).sum(dim=dims, keepdim=True) / count
    var = ((x - mu) ** 2 * weights).sum(dim=dims, keepdim=True) / count
    return (x - mu) / (var.sqrt() + eps)


class LearnableGELU(nn.Module):
    """x·sigmoid(β_c·x) with one learnable sharpness per channel; β=1.702 approximates GELU.

    The per-channel β adds 32 parameters to a 32-wide two-conv stack, so the
    denoise head counts 11,040 and the denoise tail 10,147 rather than the
    11,008 and 10,115 of the plain convolutions.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.beta = nn.Parameter(torch.full((channels,), 1.702))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * torch.sigmoid(self.beta.view(-1, 1, 1) * x)


class ConvStack(nn.Module):
    """`layers` same-padded 3×3 convs with LearnableGELU between them."""

    def __init__(self, in_channels: int, hidden: int, out_channels: int, layers: int = 2):
        super().__init__()
        modules: list[nn.Module] = []
        width = in_channels
        for i in range(layers):
            last = i == layers - 1
            out = out_channels if last else hidden
            modules.append(nn.Conv2d(width, out, 3, padding=1))
            if not last:
                modules.append(LearnableGELU(out))
            width = out
        self.body = nn.Sequential(*modules)
        for m in self.body:
            if isinstance(m, nn.Conv2d):
                nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)


class Tail(nn.Module):
    """Conv stack followed by pixel shuffle when `scale` > 1."""

    def __init__(self, channels: int, out_channels: int, layers: int, scale: int = 1):
        super().__init__()
        self.scale = scale
        self.convs = ConvStack(channels, channels, out_channels * scale * scale, layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.convs(x)
        return pixel_shuffle(y, self.scale) if self.scale > 1 else y


class Attention(nn.Module):
    """Multi-head scaled dot-product attention, scale 1/√d_k.

    `query_bias` / `key_bias` are added to the query and key inputs before
    projection (used for the decoder task token).
    """

    def __init__(self, dim: int, heads: int, head_dim: int):
        super().__init__()
        if heads * head_dim != dim:
            raise ConfigError(f"heads*head_dim must equal dim, got {heads}*{head_dim} != {dim}.")
        self.heads = heads
        self.head_dim = head_dim
        self.scale = head_dim**-0.5
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.proj = nn.Linear(dim, dim)

    def _split(self, t: torch.Tensor) -> torch.Tensor:
        b, n, _ = t.shape
        return t.view(b, n, self.heads, self.head_dim).transpose(1, 2)

    def attention_weights(self, query, key, query_bias=None, key_bias=None) -> torch.Tensor:
        """[B, heads, N_q, N_k] row-stochastic attention weights."""
        if query_bias is not None:
            query = query + query_bias
        if key_bias is not None:
            key = key + key_bias
        q = self._split(self.q(query))
        k = self._split(self.k(key))
        return softmax(q @ k.transpose(-2, -1) * self.scale, dim=-1)

    def forward(self, query, key=None, value=None, query_bias=None, key_bias=None) -> torch.Tensor:
        key = query if key is None else key
        value = key if value is None else value
        weights = self.attention_weights(query, key, query_bias, key_bias)
        out = weights @ self._split(self.v(value))
        b, _, n, _ = out.shape
        return self.proj(out.transpose(1, 2).reshape(b, n, self.heads * self.head_dim))


class MSABlock(nn.Module):
    """ICN → multi-head self-attention → output projection → residual."""

    def __init__(self, dim: int, heads: int, head_dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.attn = Attention(dim, heads, head_dim)

    def forward(self, z: torch.Tensor, token_mask: torch.Tensor | None = None) -> torch.Tensor:
        return z + self.attn(icn(z, token_mask, self.eps, batched=True))


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


def _check_grid(tokens: torch.Tensor, grid: tuple[int, int]) -> None:
    if tokens.shape[-2] != grid[0] * grid[1]:
        raise ShapeError(f"Token count {tokens.shape[-2]} does not match grid {grid}.")


def _next_power_of_two(n: int) -> int:
    return 1 if n <= 1 else 1 << math.ceil(math.log2(n))


def frequency_gate(x_hat: torch.Tensor, grid: tuple[int, int]) -> torch.Tensor:
    """sigmoid(Re ifft2(|fft2(x̂)|)) along the token grid, per channel; [B, N, D] → [B, N, D].

    Grids whose sides are not powers of two are zero-padded for the transform
    and cropped afterwards.
    """
    _check_grid(x_hat, grid)
    b, n, d = x_hat.shape
    gh, gw = grid
    spatial = x_hat.transpose(1, 2).reshape(b, d, gh, gw)
    ph, pw = _next_power_of_two(gh), _next_power_of_two(gw)
    if (ph, pw) != (gh, gw):
        spatial = F.pad(spatial, (0, pw - gw, 0, ph - gh))
    gate = ifft2(fft2(spatial).abs()).real[..., :gh, :gw]
    return torch.sigmoid(gate.reshape(b, d, n).transpose(1, 2))


class FGFFN(nn.Module):
    """FFN(x̂) ⊙ frequency_gate(x̂); the caller adds the residual."""

    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.ffn = Mlp(dim, hidden)

    def forward(self, x_hat: torch.Tensor, grid: tuple[int, int]) -> torch.Tensor:
        _check_grid(x_hat, grid)
        if not (is_power_of_two(grid[0]) and is_power_of_two(grid[1])):
            logger.debug("FG-FFN | padding token grid %s to powers of two", grid)
        return self.ffn(x_hat) * frequency_gate(x_hat, grid)


class EncoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, head_dim: int, hidden: int, eps: float):
        super().__init__()
        self.eps = eps
        self.msa = MSABlock(dim, heads, head_dim, eps)
        self.fg_ffn = FGFFN(dim, hidden)

    def forward(self, z: torch.Tensor, grid: tuple[int, int], token_mask: torch.Tensor | None = None) -> torch.Tensor:
        z = self.msa(z, token_mask)
        return z + self.fg_ffn(icn(z, token_mask, self.eps, batched=True), grid)


class DecoderLayer(nn.Module):
    """Self-attention, task-token cross-attention over the encoder memory, FFN; pre-norm residuals."""

    def __init__(self, dim: int, heads: int, head_dim: int, hidden: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.self_attn = Attention(dim, heads, head_dim)
        self.norm2 = nn.LayerNorm(dim)
        self.cross_attn = Attention(dim, heads, head_dim)
        self.norm3 = nn.LayerNorm(dim)
        self.ffn = Mlp(dim, hidden)

    def forward(self, z: torch.Tensor, memory: torch.Tensor, task_token: torch.Tensor) -> torch.Tensor:
        z = z + self.self_attn(self.norm1(z))
        z = z + self.cross_attn(self.norm2(z), memory, memory, query_bias=task_token, key_bias=task_token)
        return z + self.ffn(self.norm3(z))
