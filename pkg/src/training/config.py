from dataclasses import dataclass

from src.core.errors import ConfigError

RECON_NORMS = ("masked-only", "all-pixels")


@dataclass(frozen=True)
class LossConfig:
    lambda_contrastive: float = 0.1
    recon_norm: str = "masked-only"
    consistency_pairs: tuple[tuple[int, int], ...] = ((0, 1),)

    def __post_init__(self):
        if self.lambda_contrastive < 0:
            raise ConfigError(f"lambda_contrastive must be >= 0, got {self.lambda_contrastive}.")
        if self.recon_norm not in RECON_NORMS:
            raise ConfigError(f"recon_norm must be one of {RECON_NORMS}, got '{self.recon_norm}'.")
        for a, b in self.consistency_pairs:
            if a < 0 or b < 0 or a == b:
                raise ConfigError(f"Consistency pair ({a}, {b}) must name two distinct channels.")

    def check_channels(self, channels: int) -> None:
        for a, b in self.consistency_pairs:
            if a >= channels or b >= channels:
                raise ConfigError(f"Consistency pair ({a}, {b}) is out of range for {channels} channels.")

    @property
    def channels(self) -> list[int]:
        return sorted({c for pair in self.consistency_pairs for c in pair})


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 5e-5
    warmup_epochs: int = 10
    epochs: int = 40
    batch_size: int = 8
    seed: int = 0
    checkpoint_every: int = 10
    inv_freq_mask: bool = True
    fft_noise: bool = True
    freq_att: bool = True
    finetune_steps: int = 200
    finetune_lr: float = 5e-4
    finetune_warmup_steps: int = 20
    finetune_augment: bool = True
    label_fraction: float = 1.0

    def __post_init__(self):
        if self.lr0 <= 0 or self.finetune_lr <= 0:
            raise ConfigError(f"Learning rates must be > 0, got lr0={self.lr0} finetune_lr={self.finetune_lr}.")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ConfigError(f"Need 0 <= warmup_epochs < epochs, got {self.warmup_epochs} and {self.epochs}.")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}.")
        if self.checkpoint_every < 1:
            raise ConfigError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}.")
        if self.finetune_steps < 1 or not 0 <= self.finetune_warmup_steps < self.finetune_steps:
            raise ConfigError(
                f"Need finetune_steps >= 1 and 0 <= finetune_warmup_steps < finetune_steps, "
                f"got {self.finetune_steps} and {self.finetune_warmup_steps}."
            )
        if not 0 < self.label_fraction <= 1:
            raise ConfigError(f"label_fraction must be in (0, 1], got {self.label_fraction}.")
