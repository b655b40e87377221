"""
Run configuration
=================
One flat key=value file (parsed with python-dotenv) holds every default of
every module. Unknown keys are rejected; the resolved values are echoed into
each run directory so the run can be replayed from the echo alone.

  seed=0
  lambda_contrastive=0.1
  sigma_grid=0.05,0.10,0.15,0.20,0.25
  consistency_pairs=0:1
"""

import dataclasses
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from dotenv import dotenv_values

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = "SSPF_THREADS"


@dataclass(frozen=True)
class RunConfig:
    # data
    seed: int = 0
    image_size: int = 64
    num_phantoms: int = 80
    splits: tuple[float, ...] = (0.8, 0.0, 0.2)
    data_manifest: str = ""
    # spectral augmentation
    patch_size: int = 16
    p_base: float = 0.25
    tau: float = 0.5
    noise_lambda: float = 0.5
    noise_sigma: float = 0.1
    noise_weight: str = "linear"
    # model
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
    mlp_ratio: int = 4
    icn_epsilon: float = 1e-5
    foreground_fraction: float = 0.05
    init_mode: str = "trunc_normal"
    global_residual: bool = True
    # losses
    lambda_contrastive: float = 0.1
    recon_norm: str = "masked-only"
    consistency_pairs: tuple[tuple[int, int], ...] = ((0, 1),)
    # pretraining
    lr0: float = 5e-5
    warmup_epochs: int = 10
    epochs: int = 40
    batch_size: int = 8
    checkpoint_every: int = 10
    inv_freq_mask: bool = True
    fft_noise: bool = True
    freq_att: bool = True
    # fine-tuning
    finetune_steps: int = 200
    finetune_lr: float = 5e-4
    finetune_warmup_steps: int = 20
    finetune_augment: bool = True
    label_fraction: float = 1.0
    finetune_sigma: float = 0.10
    blur_sigma: float = 1.0
    # sweeps and evaluation
    sigma_grid: tuple[float, ...] = (0.05, 0.10, 0.15, 0.20, 0.25)
    lambda_grid: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.5)

    def __post_init__(self):
        if len(self.splits) != 3 or any(f < 0 for f in self.splits) or abs(math.fsum(self.splits) - 1.0) > 1e-9:
            raise ConfigError(f"splits must be three non-negative fractions summing to 1, got {self.splits}.")
        if any(s < 0 for s in self.sigma_grid) or not self.sigma_grid:
            raise ConfigError(f"sigma_grid must be a non-empty list of values >= 0, got {self.sigma_grid}.")
        if any(lam < 0 for lam in self.lambda_grid) or not self.lambda_grid:
            raise ConfigError(f"lambda_grid must be a non-empty list of values >= 0, got {self.lambda_grid}.")
        if self.num_phantoms < 1:
            raise ConfigError(f"num_phantoms must be >= 1, got {self.num_phantoms}.")
        # the derived views carry the per-module invariants
        self.model_config()
        self.train_config()
        self.loss_config()
        self.augment_config()

    def model_config(self, **overrides):
        from src.model.config import ModelConfig

        values = dict(
            patch_size=self.patch_size,
            embed_dim=self.embed_dim,
            encoder_layers=self.encoder_layers,
            decoder_layers=self.decoder_layers,
            heads=self.heads,
            head_dim=self.head_dim,
            channels=self.channels,
            conv_layers=self.conv_layers,
            in_channels=self.in_channels,
            out_channels=self.out_channels,
            seg_classes=self.seg_classes,
            image_size=self.image_size,
            mlp_ratio=self.mlp_ratio,
            icn_epsilon=self.icn_epsilon,
            foreground_fraction=self.foreground_fraction,
            init_mode=self.init_mode,
            global_residual=self.global_residual,
        )
        return ModelConfig(**{**values, **overrides})

    def train_config(self):
        from src.training.config import TrainConfig

        return TrainConfig(
            lr0=self.lr0,
            warmup_epochs=self.warmup_epochs,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
            inv_freq_mask=self.inv_freq_mask,
            fft_noise=self.fft_noise,
            freq_att=self.freq_att,
            finetune_steps=self.finetune_steps,
            finetune_lr=self.finetune_lr,
            finetune_warmup_steps=self.finetune_warmup_steps,
            finetune_augment=self.finetune_augment,
            label_fraction=self.label_fraction,
        )

    def loss_config(self):
        from src.training.config import LossConfig

        config = LossConfig(self.lambda_contrastive, self.recon_norm, self.consistency_pairs)
        config.check_channels(self.in_channels)
        return config

    def noise_spec(self):
        from src.augment.kspace import NoiseSpec, WeightKind

        try:
            kind = WeightKind(self.noise_weight)
        except ValueError:
            raise ConfigError(f"noise_weight must be 'linear' or 'quadratic', got '{self.noise_weight}'.") from None
        return NoiseSpec(lam=self.noise_lambda, sigma=self.noise_sigma, weight_kind=kind, seed=self.seed)

    def augment_config(self):
        from src.augment.pipeline import AugmentConfig

        return AugmentConfig(
            patch_size=self.patch_size,
            p_base=self.p_base,
            tau=self.tau,
            noise=self.noise_spec(),
            inv_freq_mask=self.inv_freq_mask,
            fft_noise=self.fft_noise,
        )

    def replace(self, **changes) -> "RunConfig":
        unknown = set(changes) - FIELD_NAMES
        if unknown:
            raise ConfigError(f"Unknown config key(s): {', '.join(sorted(unknown))}.")
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, str]:
        return {f.name: format_value(getattr(self, f.name)) for f in dataclasses.fields(self)}

    def echo(self, path: str | Path) -> Path:
        """Write every resolved key=value, sorted, so the file reloads to an equal config."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"{key}={value}" for key, value in sorted(self.as_dict().items())]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}
_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ",".join(f"{a}:{b}" for a, b in value)
        return ",".join(format_value(v) for v in value)
    return str(value)


def _parse_bool(key: str, raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"Config key '{key}' expects true/false, got '{raw}'.")


def _parse_pairs(key: str, raw: str) -> tuple[tuple[int, int], ...]:
    pairs = []
    for item in filter(None, (part.strip() for part in raw.split(","))):
        a, sep, b = item.partition(":")
        if not sep:
            raise ConfigError(f"Config key '{key}' expects pairs like '0:1', got '{item}'.")
        pairs.append((int(a), int(b)))
    return tuple(pairs)


def parse_value(key: str, raw: str) -> Any:
    if key not in _FIELD_TYPES:
        raise ConfigError(f"Unknown config key '{key}'.")
    kind = _FIELD_TYPES[key]
    try:
        if kind is bool:
            return _parse_bool(key, raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw.strip()
        if key == "consistency_pairs":
            return _parse_pairs(key, raw)
        return tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as e:
        raise ConfigError(f"Config key '{key}' has invalid value '{raw}': {e}") from None


def load_run_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Defaults, then the key=value file at `path`, then `overrides` (already typed)."""
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file '{path}' does not exist.")
        for key, raw in dotenv_values(path).items():
            key = key.strip().lower()
            if raw is None:
                raise ConfigError(f"Config key '{key}' in {path} has no value.")
            values[key] = parse_value(key, raw)
    for key, value in (overrides or {}).items():
        if key not in FIELD_NAMES:
            raise ConfigError(f"Unknown config key '{key}'.")
        values[key] = value
    config = RunConfig(**values)
    logger.debug("Config resolved | source=%s overrides=%s", path, sorted((overrides or {}).keys()))
    return config


def get_thread_count() -> int | None:
    """Worker cap from SSPF_THREADS, or None when unset."""
    raw = os.getenv(THREADS_ENV)
    if raw is None or not raw.strip():
        return None
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got '{raw}'.") from None
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got '{raw}'.")
    return threads
