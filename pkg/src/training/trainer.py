"""
Pretraining and asymmetric fine-tuning
======================================
Pretraining corrupts every image with the spectral augmentor (hierarchical
mask + k-space noise), reconstructs it through the `recon` task and adds the
cross-sequence consistency term. Fine-tuning freezes `encoder.*` and trains
the task head, decoder and task tail on degraded/clean pairs.

Every step is seeded: the batch seed fixes masking, noise and fine-tune
augmentation, so two runs from the same state are bit-identical.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import torch

from src.augment import AugmentConfig, MaskPlan, SpectralAugmentor
from src.core.errors import ContractError, NumericAbortError
from src.model import SSPFormer, TaskKind
from src.model.checkpoint import save_checkpoint
from src.model.params import ParamStore
from src.numeric import Rng, backward, write_fts

from .augment import finetune_augment
from .config import LossConfig, TrainConfig
from .losses import consistency_loss, recon_loss, task_loss, total_loss
from .optimizer import build_optimizer, optimizer_step
from .schedule import build_scheduler

logger = logging.getLogger(__name__)

RUN_CSV_HEADER = ("epoch", "step", "lr", "L_sup", "L_con", "L_total")
_SEED_MASK = (1 << 64) - 1


@dataclass
class StepResult:
    sup: float
    con: float
    total: float


@dataclass
class TrainResult:
    losses: list[StepResult] = field(default_factory=list)
    checkpoint: Path | None = None


class RunLog:
    """Append-only run.csv writer; floats are written with repr() so replays compare bit-exactly."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow(RUN_CSV_HEADER)

    def append(self, epoch: int, step: int, lr: float, result: StepResult) -> None:
        with self.path.open("a", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow((epoch, step, repr(lr), repr(result.sup), repr(result.con), repr(result.total)))


def batch_seed(seed: int, step: int) -> int:
    return (seed ^ ((step + 1) << 24)) & _SEED_MASK


def sample_rng(seed: int, index: int) -> Rng:
    return Rng(seed).derive((index + 1) << 8)


def _abort(loss: torch.Tensor, batch: torch.Tensor, seed: int, dump_dir: Path | None) -> None:
    if torch.isfinite(loss).all():
        return
    if dump_dir is not None:
        path = Path(dump_dir) / f"nan_batch_{seed}.fts"
        write_fts(path, batch.detach())
        logger.error("Non-finite loss | batch_seed=%d dump=%s", seed, path)
    raise NumericAbortError(f"Non-finite loss {loss.item()} at batch seed {seed}.", batch_seed=seed)


def corrupt_batch(
    batch: torch.Tensor, augmentor: SpectralAugmentor, seed: int
) -> tuple[torch.Tensor, list[MaskPlan]]:
    samples = [augmentor(image, sample_rng(seed, i)) for i, image in enumerate(batch)]
    return torch.stack([s.corrupted for s in samples]), [s.plan for s in samples]


def pretrain_losses(
    batch: torch.Tensor,
    model: SSPFormer,
    augmentor: SpectralAugmentor,
    loss_cfg: LossConfig,
    seed: int,
    freq_att: bool = True,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(total, supervised, consistency) on one [B,C,H,W] batch of clean images."""
    corrupted, plans = corrupt_batch(batch, augmentor, seed)
    masked = torch.stack([plan.decisions for plan in plans])
    pred = model(corrupted, TaskKind.RECON, masked=masked)
    sup = recon_loss(pred, batch, plans, loss_cfg.recon_norm)

    con = torch.zeros((), dtype=sup.dtype)
    use_consistency = freq_att and loss_cfg.lambda_contrastive > 0 and batch.shape[1] >= 2
    if use_consistency:
        loss_cfg.check_channels(batch.shape[1])
        embeddings = model.sequence_embeddings(batch, loss_cfg.channels)
        terms = [consistency_loss(embeddings[a], embeddings[b]) for a, b in loss_cfg.consistency_pairs]
        con = torch.stack(terms).mean()
    return total_loss(sup, con, loss_cfg.lambda_contrastive if use_consistency else 0.0), sup, con


def pretrain_step(
    batch: torch.Tensor,
    model: SSPFormer,
    augmentor: SpectralAugmentor,
    optimizer: torch.optim.Optimizer,
    loss_cfg: LossConfig,
    seed: int,
    freq_att: bool = True,
    dump_dir: Path | None = None,
) -> StepResult:
    optimizer.zero_grad(set_to_none=True)
    total, sup, con = pretrain_losses(batch, model, augmentor, loss_cfg, seed, freq_att)
    _abort(total, batch, seed, dump_dir)
    backward(total)
    optimizer_step(optimizer)
    return StepResult(sup.item(), con.item(), total.item())


def check_encoder_frozen(store: ParamStore) -> None:
    unfrozen = [p for p in store.match("encoder") if store.is_trainable(p)]
    if unfrozen:
        raise ContractError(f"Fine-tuning needs a frozen encoder; '{unfrozen[0]}' is trainable.")


def finetune_step(
    inputs: torch.Tensor,
    targets: torch.Tensor,
    model: SSPFormer,
    task: TaskKind | str,
    optimizer: torch.optim.Optimizer,
    store: ParamStore,
    seed: int = 0,
    dump_dir: Path | None = None,
) -> float:
    task = TaskKind.parse(task)
    check_encoder_frozen(store)
    optimizer.zero_grad(set_to_none=True)
    pred = model(inputs, task)
    loss = task_loss(pred, targets, segment=task is TaskKind.SEGMENT)
    _abort(loss, inputs, seed, dump_dir)
    backward(loss)
    optimizer_step(optimizer)
    return loss.item()


def _checkpoint(run_dir: Path, name: str, store: ParamStore, metadata: dict) -> Path:
    path = run_dir / name
    save_checkpoint(path, store, metadata)
    return path


def pretrain(
    model: SSPFormer,
    images: torch.Tensor,
    train_cfg: TrainConfig,
    loss_cfg: LossConfig,
    augment_cfg: AugmentConfig,
    run_dir: str | Path,
) -> TrainResult:
    """Epoch loop over [N,C,H,W] images; writes run.csv and SSPF1 checkpoints into `run_dir`."""
    run_dir = Path(run_dir)
    store = ParamStore.from_module(model)
    augmentor = SpectralAugmentor(augment_cfg)
    optimizer = build_optimizer(store, train_cfg.lr0)
    steps_per_epoch = math.ceil(images.shape[0] / train_cfg.batch_size)
    total_steps = train_cfg.epochs * steps_per_epoch
    scheduler = build_scheduler(optimizer, total_steps, train_cfg.warmup_epochs * steps_per_epoch)
    shuffle = Rng(train_cfg.seed)
    log = RunLog(run_dir / "run.csv")
    result = TrainResult()
    metadata = {"stage": "pretrain", "seed": train_cfg.seed, "trained_heads": [TaskKind.RECON.value]}

    logger.info(
        "Pretrain start | images=%d epochs=%d steps=%d lambda=%s toggles=mask:%s,fft:%s,att:%s",
        images.shape[0], train_cfg.epochs, total_steps, loss_cfg.lambda_contrastive,
        augment_cfg.inv_freq_mask, augment_cfg.fft_noise, train_cfg.freq_att,
    )
    step = 0
    for epoch in range(train_cfg.epochs):
        order = shuffle.permutation(images.shape[0])
        for start in range(0, images.shape[0], train_cfg.batch_size):
            batch = images[order[start : start + train_cfg.batch_size]]
            lr = optimizer.param_groups[0]["lr"]
            seed = batch_seed(train_cfg.seed, step)
            step_result = pretrain_step(
                batch, model, augmentor, optimizer, loss_cfg, seed, train_cfg.freq_att, dump_dir=run_dir
            )
            scheduler.step()
            log.append(epoch, step, lr, step_result)
            result.losses.append(step_result)
            logger.debug("Pretrain step | step=%d lr=%.3e loss=%.6f", step, lr, step_result.total)
            step += 1
        logger.info("Pretrain epoch | epoch=%d loss=%.6f", epoch, result.losses[-1].total)
        if (epoch + 1) % train_cfg.checkpoint_every == 0 and epoch + 1 < train_cfg.epochs:
            _checkpoint(run_dir, f"pretrain_epoch{epoch + 1:03d}.sspf", store, {**metadata, "epoch": epoch + 1})

    result.checkpoint = _checkpoint(run_dir, "pretrain.sspf", store, {**metadata, "epoch": train_cfg.epochs})
    return result


def finetune(
    model: SSPFormer,
    inputs: torch.Tensor,
    targets: torch.Tensor,
    task: TaskKind | str,
    train_cfg: TrainConfig,
    run_dir: str | Path,
    trained_heads: list[str] | None = None,
) -> TrainResult:
    """Asymmetric fine-tuning for `finetune_steps` steps; the encoder stays bit-identical."""
    task = TaskKind.parse(task)
    run_dir = Path(run_dir)
    trained_heads = list(trained_heads or [])
    if task.value not in trained_heads and TaskKind.RECON.value in trained_heads:
        model.warm_start_head(task, TaskKind.RECON)

    store = ParamStore.from_module(model)
    store.freeze("encoder")
    # other tasks' heads, tokens and tails receive no gradient; keep the optimizer on this task only
    for other in TaskKind:
        if other is not task:
            store.freeze(f"heads.{other.value}")
            store.freeze(f"tails.{other.value}")
            store.freeze(f"decoder.task_tokens.{other.value}")
    optimizer = build_optimizer(store, train_cfg.finetune_lr)
    scheduler = build_scheduler(optimizer, train_cfg.finetune_steps, train_cfg.finetune_warmup_steps)
    shuffle = Rng(train_cfg.seed).derive(0xF1)
    log = RunLog(run_dir / "run.csv")
    result = TrainResult()
    n = inputs.shape[0]
    steps_per_epoch = math.ceil(n / train_cfg.batch_size)
    segment = task is TaskKind.SEGMENT

    logger.info(
        "Finetune start | task=%s items=%d steps=%d trainable=%d frozen=%d",
        task.value, n, train_cfg.finetune_steps, store.count("trainable"), store.count("frozen"),
    )
    order = shuffle.permutation(n)
    for step in range(train_cfg.finetune_steps):
        epoch, offset = divmod(step, steps_per_epoch)
        if offset == 0 and step:
            order = shuffle.permutation(n)
        idx = order[offset * train_cfg.batch_size : (offset + 1) * train_cfg.batch_size]
        x, y = inputs[idx], targets[idx]
        seed = batch_seed(train_cfg.seed, step)
        if train_cfg.finetune_augment:
            x, y = finetune_augment(x, y, Rng(seed), labels=segment)
        lr = optimizer.param_groups[0]["lr"]
        loss = finetune_step(x, y, model, task, optimizer, store, seed, dump_dir=run_dir)
        scheduler.step()
        step_result = StepResult(loss, 0.0, loss)
        log.append(epoch, step, lr, step_result)
        result.losses.append(step_result)
        logger.debug("Finetune step | task=%s step=%d lr=%.3e loss=%.6f", task.value, step, lr, loss)

    metadata = {
        "stage": "finetune",
        "task": task.value,
        "seed": train_cfg.seed,
        "trained_heads": sorted({*trained_heads, task.value}),
    }
    result.checkpoint = _checkpoint(run_dir, f"finetune_{task.value}.sspf", store, metadata)
    logger.info("Finetune done | task=%s final_loss=%.6f", task.value, result.losses[-1].total)
    return result
