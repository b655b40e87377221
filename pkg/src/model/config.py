from dataclasses import dataclass
from enum import Enum

from src.core.errors import ConfigError, UnknownTaskError


class TaskKind(str, Enum):
    """Objectives the decoder can switch between; each owns a head, a task token and a tail."""

    RECON = "recon"
    SR2 = "sr2"
    SR3 = "sr3"
    SR4 = "sr4"
    DENOISE = "denoise"
    DEBLUR = "deblur"
    SEGMENT = "segment"

    @classmethod
    def parse(cls, name: "str | TaskKind") -> "TaskKind":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise UnknownTaskError(f"Unknown task '{name}'. Valid tasks: {valid}.") from None

    @property
    def scale(self) -> int:
        return {TaskKind.SR2: 2, TaskKind.SR3: 3, TaskKind.SR4: 4}.get(self, 1)

    @property
    def is_restoration(self) -> bool:
        return self not in (TaskKind.RECON, TaskKind.SEGMENT)


INIT_MODES = ("trunc_normal", "zero")


@dataclass(frozen=True)
class ModelConfig:
    patch_size: int = 16
    embed_dim: int = 384
    encoder_layers: int = 12
    decoder_layers: int = 4
    heads: int = 8
    head_dim: int = 48
    channels: int = 32
    conv_layers: int = 2
    in_channels: int = 6
    out_channels: int = 3
    seg_classes: int = 4
    image_size: int = 224
    mlp_ratio: int = 4
    icn_epsilon: float = 1e-5
    foreground_fraction: float = 0.05
    init_mode: str = "trunc_normal"
    global_residual: bool = True

    def __post_init__(self):
        if self.heads * self.head_dim != self.embed_dim:
            raise ConfigError(
                f"heads*head_dim must equal embed_dim, got {self.heads}*{self.head_dim} != {self.embed_dim}."
            )
        if self.image_size % self.patch_size:
            raise ConfigError(f"Patch size {self.patch_size} does not divide image size {self.image_size}.")
        if self.conv_layers < 1:
            raise ConfigError(f"conv_layers must be >= 1, got {self.conv_layers}.")
        if self.init_mode not in INIT_MODES:
            raise ConfigError(f"init_mode must be one of {INIT_MODES}, got '{self.init_mode}'.")
        if self.global_residual and self.out_channels > self.in_channels:
            raise ConfigError("global_residual needs out_channels <= in_channels.")

    @property
    def position_grid(self) -> tuple[int, int]:
        side = self.image_size // self.patch_size
        return side, side
