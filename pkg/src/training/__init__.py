from .augment import finetune_augment
from .config import LossConfig, TrainConfig
from .evaluate import evaluate
from .losses import consistency_loss, recon_loss, segmentation_loss, task_loss, total_loss
from .optimizer import build_optimizer, optimizer_step
from .schedule import build_scheduler, lr_at
from .trainer import (
    RunLog,
    StepResult,
    TrainResult,
    check_encoder_frozen,
    finetune,
    finetune_step,
    pretrain,
    pretrain_losses,
    pretrain_step,
)

__all__ = [
    "LossConfig",
    "RunLog",
    "StepResult",
    "TrainConfig",
    "TrainResult",
    "build_optimizer",
    "build_scheduler",
    "check_encoder_frozen",
    "consistency_loss",
    "evaluate",
    "finetune",
    "finetune_augment",
    "finetune_step",
    "lr_at",
    "optimizer_step",
    "pretrain",
    "pretrain_losses",
    "pretrain_step",
    "recon_loss",
    "segmentation_loss",
    "task_loss",
    "total_loss",
]
