"""Desk-scale learning-signal runs; deselected by default, run with `pytest -m slow`."""

import csv

import pytest

from src.core.config import load_run_config
from src.core.orchestrator import Orchestrator

pytestmark = pytest.mark.slow


@pytest.fixture
def desk_config():
    """64 training and 16 held-out 64×64 phantoms, ~300 pretraining steps at lr 5e-5."""
    return load_run_config(
        overrides=dict(
            seed=0,
            image_size=64,
            num_phantoms=80,
            splits=(0.8, 0.0, 0.2),
            patch_size=4,
            embed_dim=64,
            encoder_layers=2,
            decoder_layers=1,
            heads=4,
            head_dim=16,
            channels=16,
            lr0=5e-5,
            epochs=38,
            warmup_epochs=1,
            batch_size=8,
            checkpoint_every=38,
            finetune_steps=400,
            finetune_lr=1e-3,
            finetune_warmup_steps=20,
            finetune_sigma=0.10,
        )
    )


def _smoothed(values, start, width=10):
    window = values[start : start + width]
    return sum(window) / len(window)


def test_pretraining_and_denoise_fine_tuning(desk_config, tmp_path):
    orchestrator = Orchestrator(desk_config, tmp_path)
    train, _, test = orchestrator.splits()
    assert (len(train), len(test)) == (64, 16)

    pre = orchestrator.pretrain("pretrain")
    sup = [r.sup for r in pre.losses]
    assert len(sup) >= 300
    assert _smoothed(sup, len(sup) - 10) <= 0.5 * _smoothed(sup, 5)

    ft = orchestrator.finetune("denoise", pre.checkpoint, "finetune")
    report = orchestrator.evaluate("denoise", ft.checkpoint, "eval", sigmas=(0.10,))
    assert report.mean("denoise", "psnr") >= report.mean("denoise", "psnr_input") + 1.0


def test_full_ablation_setting_not_worse_than_baseline(desk_config, tmp_path):
    table = Orchestrator(desk_config, tmp_path).ablate()
    with open(table, newline="") as f:
        rows = {row["setting"]: float(row["psnr"]) for row in csv.DictReader(f)}
    assert set(rows) == {"baseline", "only_fft", "only_mask", "full"}
    assert rows["full"] >= rows["baseline"]
