"""
Orchestrator
============
Routes every CLI command to its pipeline. One instance serves one
invocation; everything it writes goes below `out_dir`, together with the
echo of the resolved RunConfig.
"""

import csv
import logging
from pathlib import Path
from typing import Sequence

import torch

from src.augment import (
    AugmentConfig,
    NoiseSpec,
    SpectralAugmentor,
    noise_visible_patches,
    ring_noise_power,
)
from src.core.config import RunConfig
from src.core.errors import ConfigError, ShapeError
from src.data import (
    DegradationSpec,
    Phantom,
    label_subset,
    load_manifest_dataset,
    make_pair,
    phantom_dataset,
    split_dataset,
    write_phantom_set,
)
from src.metrics import MetricReport
from src.model import ParamStore, SSPFormer, TaskKind, load_into
from src.numeric import Rng, read_fts, write_fts
from src.training import TrainResult, evaluate, finetune, pretrain

logger = logging.getLogger(__name__)

CONFIG_ECHO = "config.txt"
AUGMENT_MODES = ("mask", "noise", "both")
SWEEP_TASK = TaskKind.SR2
ABLATION_TASK = TaskKind.DENOISE

# setting → (inv_freq_mask, fft_noise, freq_att)
ABLATION_SETTINGS = {
    "baseline": (False, False, False),
    "only_fft": (False, True, False),
    "only_mask": (True, False, False),
    "full": (True, True, True),
}


class Orchestrator:
    """Routes commands to the phantom, augmentation, training and evaluation pipelines."""

    def __init__(self, config: RunConfig, out_dir: str | Path = "runs"):
        self.config = config
        self.out_dir = Path(out_dir)
        self._splits: tuple[list[Phantom], list[Phantom], list[Phantom]] | None = None

    # ------------------------------------------------------------------
    # Shared plumbing
    # ------------------------------------------------------------------

    def run_dir(self, *parts: str, config: RunConfig | None = None) -> Path:
        path = self.out_dir.joinpath(*parts)
        path.mkdir(parents=True, exist_ok=True)
        (config or self.config).echo(path / CONFIG_ECHO)
        return path

    def splits(self) -> tuple[list[Phantom], list[Phantom], list[Phantom]]:
        if self._splits is None:
            cfg = self.config
            if cfg.data_manifest:
                items = load_manifest_dataset(cfg.data_manifest)
            else:
                items = phantom_dataset(cfg.seed, cfg.num_phantoms, cfg.image_size)
            self._splits = split_dataset(items, cfg.splits, cfg.seed)
            logger.info("Dataset split | train=%d val=%d test=%d", *(len(s) for s in self._splits))
        return self._splits

    def build_model(
        self, checkpoint: str | Path | None = None, config: RunConfig | None = None
    ) -> tuple[SSPFormer, dict]:
        cfg = config or self.config
        torch.manual_seed(cfg.seed)
        model = SSPFormer(cfg.model_config())
        metadata: dict = {}
        if checkpoint is not None:
            metadata = load_into(ParamStore.from_module(model), checkpoint)
        return model, metadata

    def task_pairs(
        self, items: Sequence[Phantom], task: TaskKind, sigma: float, config: RunConfig | None = None
    ) -> tuple[torch.Tensor, torch.Tensor]:
        cfg = config or self.config
        if not items:
            raise ConfigError(f"No items available to build '{task.value}' pairs.")
        spec = DegradationSpec.for_task(task, sigma=sigma, blur_sigma=cfg.blur_sigma)
        root = Rng(cfg.seed)
        pairs = [
            make_pair(item.volume, item.tissue_labels, spec, root.derive(i + 1), cfg.out_channels)
            for i, item in enumerate(items)
        ]
        return torch.stack([p[0] for p in pairs]), torch.stack([p[1] for p in pairs])

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    def phantom(self, count: int, size: int, seed: int) -> Path:
        phantoms = phantom_dataset(seed, count, size)
        return write_phantom_set(phantoms, self.run_dir())

    def augment(
        self,
        in_path: str | Path,
        mode: str,
        p_base: float,
        lam: float,
        sigma: float,
        seed: int,
        patch_size: int | None = None,
    ) -> dict[str, float]:
        """Augment one FTS1 image; writes augmented.fts, mask_plan.csv (mask modes) and stats.txt."""
        if mode not in AUGMENT_MODES:
            raise ConfigError(f"Unknown augment mode '{mode}'. Valid modes: {', '.join(AUGMENT_MODES)}.")
        image = read_fts(in_path)
        if image.dim() == 2:
            image = image.unsqueeze(0)
        if image.dim() != 3:
            raise ShapeError(f"augment expects a [C,H,W] or [H,W] tensor, got {tuple(image.shape)}.")
        cfg = self.config
        patch = patch_size or cfg.patch_size
        noise = NoiseSpec(lam=lam, sigma=sigma, weight_kind=cfg.noise_spec().weight_kind, seed=seed)
        augmentor = SpectralAugmentor(
            AugmentConfig(patch_size=patch, p_base=p_base, tau=cfg.tau, noise=noise, fft_noise=mode != "mask")
        )
        out = self.run_dir()
        rng = Rng(seed)
        stats: dict[str, float] = {}

        if mode == "noise":
            grid = (image.shape[-2] // patch) * (image.shape[-1] // patch)
            result = noise_visible_patches(image, patch, torch.ones(grid, dtype=torch.bool), noise, rng.derive(2))
        else:
            sample = augmentor(image, rng)
            result = sample.corrupted
            sample.plan.write_csv(out / "mask_plan.csv")
            stats["patches"] = sample.plan.num_patches
            stats["masked_fraction"] = sample.plan.masked_fraction
            stats["expected_fraction"] = sample.plan.expected_fraction
            stats["plan_warnings"] = len(sample.plan.warnings)
        if mode != "mask":
            visible = result if mode == "noise" else torch.where(sample.plan.pixel_mask(), image, result)
            for ring, power in enumerate(ring_noise_power(image, visible)):
                stats[f"ring_power_{ring}"] = power

        write_fts(out / "augmented.fts", result)
        lines = [f"{key}={value!r}" for key, value in stats.items()]
        (out / "stats.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info("Augment | mode=%s shape=%s stats=%d out=%s", mode, tuple(image.shape), len(stats), out)
        return stats

    def pretrain(self, *parts: str, config: RunConfig | None = None) -> TrainResult:
        cfg = config or self.config
        run_dir = self.run_dir(*parts, config=cfg)
        train, _, _ = self.splits()
        if not train:
            raise ConfigError("The training split is empty; adjust splits or num_phantoms.")
        images = torch.stack([item.volume for item in train])
        model, _ = self.build_model(config=cfg)
        return pretrain(model, images, cfg.train_config(), cfg.loss_config(), cfg.augment_config(), run_dir)

    def finetune(
        self, task: TaskKind | str, checkpoint: str | Path, *parts: str, config: RunConfig | None = None
    ) -> TrainResult:
        cfg = config or self.config
        task = TaskKind.parse(task)
        model, metadata = self.build_model(checkpoint, cfg)
        run_dir = self.run_dir(*parts, config=cfg)
        train, _, _ = self.splits()
        items = label_subset(train, cfg.label_fraction)
        inputs, targets = self.task_pairs(items, task, cfg.finetune_sigma, cfg)
        return finetune(model, inputs, targets, task, cfg.train_config(), run_dir, metadata.get("trained_heads", []))

    def evaluate(
        self,
        task: TaskKind | str,
        checkpoint: str | Path,
        *parts: str,
        sigmas: Sequence[float] | None = None,
        config: RunConfig | None = None,
    ) -> MetricReport:
        cfg = config or self.config
        task = TaskKind.parse(task)
        model, _ = self.build_model(checkpoint, cfg)
        run_dir = self.run_dir(*parts, config=cfg)
        _, _, test = self.splits()
        if sigmas is None:
            sigmas = cfg.sigma_grid if task is TaskKind.DENOISE else (cfg.finetune_sigma,)
        report = evaluate(model, test, task, sigmas, cfg.blur_sigma, cfg.seed)
        report.write_csv(run_dir / "metrics.csv")
        return report

    def sweep(self, lambdas: Sequence[float] | None = None) -> Path:
        """pretrain → sr2 fine-tune → sr2 eval for every λ; writes sweep.csv."""
        lambdas = tuple(lambdas) if lambdas is not None else self.config.lambda_grid
        rows = []
        for lam in lambdas:
            cfg = self.config.replace(lambda_contrastive=float(lam))
            name = f"lambda_{lam:g}"
            pre = self.pretrain(name, "pretrain", config=cfg)
            ft = self.finetune(SWEEP_TASK, pre.checkpoint, name, "finetune", config=cfg)
            report = self.evaluate(SWEEP_TASK, ft.checkpoint, name, "eval", config=cfg)
            rows.append((
                repr(float(lam)),
                repr(report.mean(SWEEP_TASK.value, "psnr")),
                repr(report.mean(SWEEP_TASK.value, "ssim")),
                repr(report.mean(SWEEP_TASK.value, "psnr_input")),
            ))
            logger.info("Sweep | lambda=%s psnr=%s", lam, rows[-1][1])
        return self._write_table("sweep.csv", ("lambda", "psnr", "ssim", "psnr_input"), rows)

    def ablate(self) -> Path:
        """The four module-wise settings, each pretrained and denoise-fine-tuned; writes ablation.csv."""
        rows = []
        sigma = self.config.finetune_sigma
        for setting, (inv_freq_mask, fft_noise, freq_att) in ABLATION_SETTINGS.items():
            cfg = self.config.replace(inv_freq_mask=inv_freq_mask, fft_noise=fft_noise, freq_att=freq_att)
            pre = self.pretrain(setting, "pretrain", config=cfg)
            ft = self.finetune(ABLATION_TASK, pre.checkpoint, setting, "finetune", config=cfg)
            report = self.evaluate(ABLATION_TASK, ft.checkpoint, setting, "eval", sigmas=(sigma,), config=cfg)
            rows.append((
                setting,
                str(inv_freq_mask).lower(),
                str(fft_noise).lower(),
                str(freq_att).lower(),
                repr(report.mean(ABLATION_TASK.value, "psnr")),
                repr(report.mean(ABLATION_TASK.value, "ssim")),
                repr(report.mean(ABLATION_TASK.value, "psnr_input")),
            ))
            logger.info("Ablation | setting=%s psnr=%s", setting, rows[-1][4])
        header = ("setting", "inv_freq_mask", "fft_noise", "freq_att", "psnr", "ssim", "psnr_input")
        return self._write_table("ablation.csv", header, rows)

    def _write_table(self, name: str, header: Sequence[str], rows: list[tuple]) -> Path:
        path = self.run_dir() / name
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            writer.writerows(rows)
        logger.info("Table written | path=%s rows=%d", path, len(rows))
        return path
