"""
SSPFormer network
=================
Per-task slim conv head → patch tokens + learnable positions → L encoder layers
(ICN, MSA, FG-FFN) → l decoder layers with a per-task token → linear
de-embedding → per-task conv tail (pixel shuffle for super-resolution).

Parameter paths: heads.<task>.*, encoder.*, decoder.*, tails.<task>.*.
"""

import logging
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.augment.masking import mask_rows
from src.core.errors import ShapeError, UnknownTaskError

from .config import ModelConfig, TaskKind
from .layers import ConvStack, DecoderLayer, EncoderLayer, Tail

logger = logging.getLogger(__name__)


@dataclass
class TokenSequence:
    tokens: torch.Tensor  # [B, N, D] patch projections p_i
    positions: torch.Tensor  # [1, N, D] learnable e_i
    grid: tuple[int, int]

    @property
    def z0(self) -> torch.Tensor:
        return self.tokens + self.positions


def _batched(x: torch.Tensor, ndim: int) -> tuple[torch.Tensor, bool]:
    if x.dim() == ndim - 1:
        return x.unsqueeze(0), True
    if x.dim() != ndim:
        raise ShapeError(f"Expected a {ndim - 1}-D or {ndim}-D tensor, got shape {tuple(x.shape)}.")
    return x, False


class Encoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.embed_dim
        self.config = config
        self.patch_embed = nn.Conv2d(config.channels, d, config.patch_size, stride=config.patch_size)
        gh, gw = config.position_grid
        self.positions = nn.Parameter(torch.zeros(1, gh * gw, d))
        self.mask_token = nn.Parameter(torch.zeros(d))
        self.layers = nn.ModuleList(
            EncoderLayer(d, config.heads, config.head_dim, config.mlp_ratio * d, config.icn_epsilon)
            for _ in range(config.encoder_layers)
        )

    def positions_for(self, grid: tuple[int, int]) -> torch.Tensor:
        """Positions for `grid`, bilinearly resampled when it differs from the trained grid."""
        base = self.config.position_grid
        if grid == base:
            return self.positions
        d = self.positions.shape[-1]
        spatial = self.positions.transpose(1, 2).reshape(1, d, *base)
        resized = F.interpolate(spatial, size=grid, mode="bilinear", align_corners=False)
        return resized.reshape(1, d, grid[0] * grid[1]).transpose(1, 2)

    def embed(self, f: torch.Tensor) -> TokenSequence:
        p = self.config.patch_size
        if f.shape[-2] % p or f.shape[-1] % p:
            raise ShapeError(f"Patch size {p} does not divide feature map {tuple(f.shape[-2:])}.")
        grid = (f.shape[-2] // p, f.shape[-1] // p)
        tokens = self.patch_embed(f).flatten(2).transpose(1, 2)
        return TokenSequence(tokens, self.positions_for(grid), grid)

    def forward(self, z: torch.Tensor, grid: tuple[int, int], token_mask: torch.Tensor | None = None) -> torch.Tensor:
        for layer in self.layers:
            z = layer(z, grid, token_mask)
        return z


class Decoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.embed_dim
        self.config = config
        self.layers = nn.ModuleList(
            DecoderLayer(d, config.heads, config.head_dim, config.mlp_ratio * d)
            for _ in range(config.decoder_layers)
        )
        self.task_tokens = nn.ParameterDict({task.value: nn.Parameter(torch.zeros(d)) for task in TaskKind})
        self.deembed = nn.Linear(d, config.channels * config.patch_size**2)

    def forward(self, f_e: torch.Tensor, grid: tuple[int, int], task: TaskKind) -> torch.Tensor:
        token = self.task_tokens[task.value]
        z = f_e
        for layer in self.layers:
            z = layer(z, f_e, token)
        return self.fold(self.deembed(z), grid)

    def fold(self, patches: torch.Tensor, grid: tuple[int, int]) -> torch.Tensor:
        """[B, N, C·P·P] → [B, C, gh·P, gw·P]."""
        b = patches.shape[0]
        c, p = self.config.channels, self.config.patch_size
        gh, gw = grid
        x = patches.view(b, gh, gw, c, p, p).permute(0, 3, 1, 4, 2, 5)
        return x.reshape(b, c, gh * p, gw * p)


def _tail_channels(config: ModelConfig, task: TaskKind) -> int:
    if task is TaskKind.RECON:
        return config.in_channels
    if task is TaskKind.SEGMENT:
        return config.seg_classes
    return config.out_channels


class SSPFormer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c = config.channels
        self.heads = nn.ModuleDict(
            {task.value: ConvStack(config.in_channels, c, c, config.conv_layers) for task in TaskKind}
        )
        self.encoder = Encoder(config)
        self.decoder = Decoder(config)
        self.tails = nn.ModuleDict(
            {
                task.value: Tail(c, _tail_channels(config, task), config.conv_layers, task.scale)
                for task in TaskKind
            }
        )
        self.reset_parameters()

    def reset_parameters(self) -> None:
        """Truncated normal (std 0.02) projections, zero biases and positions.

        In "zero" init mode every residual-branch output projection is zeroed as
        well, so encoder and decoder start as the identity on token values.
        """
        for module in self.modules():
            if isinstance(module, nn.Linear):
                nn.init.trunc_normal_(module.weight, std=0.02)
                nn.init.zeros_(module.bias)
        nn.init.trunc_normal_(self.encoder.patch_embed.weight, std=0.02)
        nn.init.zeros_(self.encoder.patch_embed.bias)
        nn.init.zeros_(self.encoder.positions)
        nn.init.trunc_normal_(self.encoder.mask_token, std=0.02)
        for token in self.decoder.task_tokens.values():
            nn.init.trunc_normal_(token, std=0.02)
        if self.config.init_mode == "zero":
            for layer in self.encoder.layers:
                nn.init.zeros_(layer.msa.attn.proj.weight)
                nn.init.zeros_(layer.fg_ffn.ffn.fc2.weight)
            for layer in self.decoder.layers:
                nn.init.zeros_(layer.self_attn.proj.weight)
                nn.init.zeros_(layer.cross_attn.proj.weight)
                nn.init.zeros_(layer.ffn.fc2.weight)

    @staticmethod
    def _task(task: TaskKind | str) -> TaskKind:
        return TaskKind.parse(task)

    def _check_task(self, task: TaskKind) -> None:
        if task.value not in self.heads:
            raise UnknownTaskError(f"Task '{task.value}' has no registered head.")

    def foreground_tokens(self, x: torch.Tensor) -> torch.Tensor:
        """[B, N] token mask: patches holding any pixel brighter than foreground_fraction·max."""
        intensity = x.amax(dim=1)
        peak = intensity.flatten(1).amax(dim=1).view(-1, 1, 1)
        fg = (intensity > self.config.foreground_fraction * peak) & (peak > 0)
        pooled = F.max_pool2d(fg.to(x.dtype).unsqueeze(1), self.config.patch_size)
        return pooled.flatten(1) > 0

    def head_forward(self, x: torch.Tensor, task: TaskKind | str) -> torch.Tensor:
        task = self._task(task)
        self._check_task(task)
        if x.shape[-3] != self.config.in_channels:
            raise ShapeError(f"Head expects {self.config.in_channels} channels, got {x.shape[-3]}.")
        x, squeeze = _batched(x, 4)
        f = self.heads[task.value](x)
        return f.squeeze(0) if squeeze else f

    def patch_embed(self, f: torch.Tensor) -> TokenSequence:
        f, _ = _batched(f, 4)
        return self.encoder.embed(f)

    def encoder_forward(
        self,
        z0: TokenSequence,
        token_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        return self.encoder(z0.z0, z0.grid, token_mask)

    def encode(
        self,
        x: torch.Tensor,
        task: TaskKind | str,
        masked: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, tuple[int, int]]:
        """Head, tokens, optional mask-token replacement, encoder. Returns (f_E, grid).

        `masked` is a [B, N] boolean grid of tokens to replace by the mask token.
        """
        x, _ = _batched(x, 4)
        seq = self.patch_embed(self.head_forward(x, task))
        if masked is not None:
            seq = TokenSequence(mask_rows(seq.tokens, masked, self.encoder.mask_token), seq.positions, seq.grid)
        fg = self.foreground_tokens(x)
        return self.encoder_forward(seq, fg), seq.grid

    def decoder_forward(self, f_e: torch.Tensor, grid: tuple[int, int], task: TaskKind | str) -> torch.Tensor:
        task = self._task(task)
        self._check_task(task)
        f_e, squeeze = _batched(f_e, 3)
        f_d = self.decoder(f_e, grid, task)
        return f_d.squeeze(0) if squeeze else f_d

    def tail_forward(self, f_d: torch.Tensor, task: TaskKind | str) -> torch.Tensor:
        task = self._task(task)
        self._check_task(task)
        f_d, squeeze = _batched(f_d, 4)
        out = self.tails[task.value](f_d)
        return out.squeeze(0) if squeeze else out

    def forward(
        self,
        x: torch.Tensor,
        task: TaskKind | str,
        masked: torch.Tensor | None = None,
    ) -> torch.Tensor:
        task = self._task(task)
        x, squeeze = _batched(x, 4)
        f_e, grid = self.encode(x, task, masked)
        out = self.tail_forward(self.decoder_forward(f_e, grid, task), task)
        if self.config.global_residual and task.is_restoration:
            base = x[:, : self.config.out_channels]
            if task.scale > 1:
                base = F.interpolate(base, scale_factor=task.scale, mode="nearest")
            out = out + base
        return out.squeeze(0) if squeeze else out

    def sequence_embeddings(
        self,
        x: torch.Tensor,
        channels: list[int],
        task: TaskKind | str = TaskKind.RECON,
    ) -> dict[int, torch.Tensor]:
        """Mean-pooled encoder tokens per sequence channel, each channel encoded on its own."""
        x, _ = _batched(x, 4)
        embeddings = {}
        for c in channels:
            if not 0 <= c < x.shape[1]:
                raise ShapeError(f"Sequence channel {c} out of range for {x.shape[1]} channels.")
            single = torch.zeros_like(x)
            single[:, c] = x[:, c]
            f_e, _ = self.encode(single, task)
            embeddings[c] = f_e.mean(dim=1)
        return embeddings

    def warm_start_head(self, task: TaskKind | str, source: TaskKind | str = TaskKind.RECON) -> None:
        """Copy the weights of the `source` head into the `task` head."""
        task, source = self._task(task), self._task(source)
        self.heads[task.value].load_state_dict(self.heads[source.value].state_dict())
        logger.info("Head warm start | task=%s source=%s", task.value, source.value)
