import logging
from typing import Sequence

import torch

from src.data.degrade import DegradationSpec, make_pair, upsample_nearest
from src.data.phantom import Phantom
from src.metrics import MetricReport, dice, hd95, psnr, ssim
from src.model import SSPFormer, TaskKind
from src.numeric import Rng

logger = logging.getLogger(__name__)


def _baseline(inputs: torch.Tensor, task: TaskKind, out_channels: int) -> torch.Tensor:
    """What the degraded input alone scores against the target."""
    base = inputs[:out_channels]
    return upsample_nearest(base, task.scale) if task.scale > 1 else base


def _segment_rows(report: MetricReport, sample_id: str, logits: torch.Tensor, labels: torch.Tensor) -> None:
    pred = logits.argmax(dim=0)
    for k in range(1, logits.shape[0]):
        p, t = pred == k, labels == k
        report.add(sample_id, TaskKind.SEGMENT.value, f"dice_{k}", dice(p, t, report.warnings))
        if p.any() and t.any():
            report.add(sample_id, TaskKind.SEGMENT.value, f"hd95_{k}", hd95(p, t))
        else:
            report.warn(f"hd95 for class {k} of sample {sample_id} skipped: empty mask.")


@torch.no_grad()
def evaluate(
    model: SSPFormer,
    items: Sequence[Phantom],
    task: TaskKind | str,
    sigmas: Sequence[float] = (0.10,),
    blur_sigma: float = 1.0,
    seed: int = 0,
) -> MetricReport:
    """Per-sample metric rows for `task`; denoising runs every sigma in `sigmas`.

    Restoration rows: psnr, ssim (model output) and psnr_input, ssim_input
    (degraded input as its own estimate). Segmentation rows: per-class dice
    and hd95.
    """
    task = TaskKind.parse(task)
    model.eval()
    report = MetricReport()
    out_channels = model.config.out_channels
    grid = list(sigmas) if task is TaskKind.DENOISE else [sigmas[0] if sigmas else 0.10]
    for i, item in enumerate(items):
        for sigma in grid:
            spec = DegradationSpec.for_task(task, sigma=sigma, blur_sigma=blur_sigma)
            inputs, target = make_pair(item.volume, item.tissue_labels, spec, Rng(seed).derive(i + 1), out_channels)
            sample_id = f"{i:04d}/s{sigma:.2f}" if task is TaskKind.DENOISE else f"{i:04d}"
            output = model(inputs, task)
            if task is TaskKind.SEGMENT:
                _segment_rows(report, sample_id, output, target)
                continue
            report.add(sample_id, task.value, "psnr", psnr(output, target))
            report.add(sample_id, task.value, "ssim", ssim(output, target))
            if task is not TaskKind.RECON:
                baseline = _baseline(inputs, task, out_channels)
                report.add(sample_id, task.value, "psnr_input", psnr(baseline, target))
                report.add(sample_id, task.value, "ssim_input", ssim(baseline, target))
    logger.info("Evaluation | task=%s items=%d rows=%d warnings=%d", task.value, len(items), len(report.rows), len(report.warnings))
    return report
