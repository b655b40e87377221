import csv

import numpy as np
import pytest
import torch
import torch.nn.functional as F
from scipy import stats

from src.augment import AugmentConfig, SpectralAugmentor, Tier, plan_uniform
from src.core.errors import ConfigError, ContractError, NumericAbortError, ShapeError
from src.data import phantom_generate
from src.model import ParamStore, SSPFormer, TaskKind
from src.model.checkpoint import read_checkpoint
from src.numeric import Rng, read_fts
from src.training import (
    LossConfig,
    TrainConfig,
    build_optimizer,
    build_scheduler,
    check_encoder_frozen,
    consistency_loss,
    finetune,
    finetune_augment,
    finetune_step,
    lr_at,
    optimizer_step,
    pretrain,
    pretrain_losses,
    pretrain_step,
    recon_loss,
    segmentation_loss,
    total_loss,
)
from src.training.trainer import batch_seed, corrupt_batch


@pytest.fixture
def batch(image16) -> torch.Tensor:
    return torch.stack([image16, image16.flip(-1)])


@pytest.fixture
def augmentor() -> SpectralAugmentor:
    return SpectralAugmentor(AugmentConfig(patch_size=4))


def _twin_models(small_config) -> tuple[SSPFormer, SSPFormer]:
    torch.manual_seed(0)
    a = SSPFormer(small_config)
    torch.manual_seed(0)
    b = SSPFormer(small_config)
    return a, b


class TestLosses:
    def test_recon_identical_is_zero(self, image16):
        plan = plan_uniform(16, 16, 4, 0.5, Rng(0))
        assert recon_loss(image16, image16, plan).item() == 0.0

    def test_recon_single_masked_patch(self):
        plan = plan_uniform(4, 4, 2, 0.5, Rng(0))
        plan.decisions = torch.tensor([True, False, False, False])
        target = torch.zeros(1, 4, 4)
        pred = target.clone()
        pred[:, :2, :2] += 1.0
        assert recon_loss(pred, target, plan).item() == 1.0

    def test_masked_only_ignores_visible_errors(self):
        plan = plan_uniform(4, 4, 2, 0.5, Rng(0))
        plan.decisions = torch.tensor([True, False, False, False])
        target = Rng(1).normal((2, 4, 4))
        pred = target + 0.3
        perturbed = pred.clone()
        perturbed[:, 2:, 2:] += 5.0
        assert recon_loss(perturbed, target, plan).item() == recon_loss(pred, target, plan).item()

    def test_all_pixels_mode(self):
        plan = plan_uniform(4, 4, 2, 0.5, Rng(0))
        pred, target = Rng(2).normal((1, 4, 4)), Rng(3).normal((1, 4, 4))
        assert recon_loss(pred, target, plan, "all-pixels").item() == pytest.approx(((pred - target) ** 2).mean().item())

    def test_nothing_masked_gives_zero(self):
        plan = plan_uniform(4, 4, 2, 0.5, Rng(0))
        plan.decisions = torch.zeros(4, dtype=torch.bool)
        assert recon_loss(torch.ones(1, 4, 4), torch.zeros(1, 4, 4), plan).item() == 0.0

    def test_recon_shape_mismatch(self):
        with pytest.raises(ShapeError):
            recon_loss(torch.zeros(1, 4, 4), torch.zeros(2, 4, 4), None)

    @pytest.mark.parametrize(
        "a, b, expected",
        [([1.0, 2.0], [1.0, 2.0], 0.0), ([1.0, 0.0], [0.0, 3.0], 1.0), ([1.0, -2.0], [-1.0, 2.0], 2.0)],
    )
    def test_consistency(self, a, b, expected):
        assert consistency_loss(torch.tensor(a), torch.tensor(b)).item() == pytest.approx(expected, abs=1e-12)

    def test_consistency_zero_vector(self):
        assert consistency_loss(torch.zeros(3), torch.ones(3)).item() == 1.0

    def test_total_loss(self):
        sup = torch.tensor(1.0)
        assert total_loss(sup, torch.tensor(0.5), 0.0) is sup
        assert total_loss(sup, torch.tensor(0.5), 0.1).item() == pytest.approx(1.05)
        with pytest.raises(ConfigError):
            total_loss(sup, torch.tensor(0.5), -0.1)

    def test_segmentation_perfect_logits(self):
        labels = Rng(4).integers(0, 4, (8, 8))
        logits = F.one_hot(labels, 4).permute(2, 0, 1).double() * 10.0
        assert segmentation_loss(logits, labels).item() < 1e-3

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(warmup_epochs=40, epochs=40)
        with pytest.raises(ConfigError):
            LossConfig(consistency_pairs=((1, 1),))
        with pytest.raises(ConfigError):
            LossConfig(lambda_contrastive=-1.0)


class TestSchedule:
    def test_endpoints(self):
        assert lr_at(0, 400, 100, 5e-5) == 0.0
        assert lr_at(100, 400, 100, 5e-5) == 5e-5
        assert abs(lr_at(400, 400, 100, 5e-5)) <= 1e-12

    def test_warmup_is_linear(self):
        assert lr_at(25, 400, 100, 5e-5) == pytest.approx(1.25e-5)

    def test_cosine_midpoint(self):
        assert lr_at(250, 400, 100, 5e-5) == pytest.approx(2.5e-5)

    def test_rejects_bad_warmup(self):
        with pytest.raises(ConfigError):
            lr_at(0, 10, 10, 1.0)

    def test_scheduler_follows_lr_at(self):
        store = ParamStore({"w": torch.ones(1)})
        optimizer = build_optimizer(store, 5e-5)
        scheduler = build_scheduler(optimizer, 20, 5)
        for step in range(20):
            assert optimizer.param_groups[0]["lr"] == pytest.approx(lr_at(step, 20, 5, 5e-5), abs=1e-18)
            optimizer.step()
            scheduler.step()


class TestOptimizer:
    def test_first_adam_step(self):
        store = ParamStore({"w": torch.tensor([1.0])})
        optimizer = build_optimizer(store, 0.1)
        optimizer_step(optimizer, grads=[torch.tensor([1.0])])
        assert store["w"].item() == pytest.approx(0.9, abs=1e-8)

    def test_zero_gradient_leaves_params(self):
        store = ParamStore({"w": torch.tensor([1.0, -2.0])})
        optimizer = build_optimizer(store, 0.1)
        optimizer_step(optimizer, grads=[torch.zeros(2)])
        assert torch.equal(store["w"].detach(), torch.tensor([1.0, -2.0]))

    def test_entries_update_independently(self):
        store = ParamStore({"a": torch.tensor([1.0]), "b": torch.tensor([1.0])})
        optimizer = build_optimizer(store, 0.1)
        optimizer_step(optimizer, grads=[torch.tensor([1.0]), None])
        assert store["a"].item() == pytest.approx(0.9, abs=1e-8)
        assert store["b"].item() == 1.0

    def test_lr_override(self):
        store = ParamStore({"w": torch.tensor([1.0])})
        optimizer = build_optimizer(store, 0.1)
        optimizer_step(optimizer, lr=0.5, grads=[torch.tensor([1.0])])
        assert store["w"].item() == pytest.approx(0.5, abs=1e-7)

    def test_misaligned_grads(self):
        optimizer = build_optimizer(ParamStore({"w": torch.ones(2)}), 0.1)
        with pytest.raises(ContractError):
            optimizer_step(optimizer, grads=[torch.ones(2), torch.ones(2)])
        with pytest.raises(ContractError):
            optimizer_step(optimizer, grads=[torch.ones(3)])

    def test_frozen_after_build(self):
        store = ParamStore({"w": torch.ones(2)})
        optimizer = build_optimizer(store, 0.1)
        store.freeze("w")
        with pytest.raises(ContractError):
            optimizer_step(optimizer, grads=[torch.ones(2)])

    def test_nothing_trainable(self):
        store = ParamStore({"w": torch.ones(2)})
        store.freeze("w")
        with pytest.raises(ContractError):
            build_optimizer(store, 0.1)


class TestPretrainStep:
    def test_identical_seeds_identical_parameters(self, small_config, batch, augmentor):
        a, b = _twin_models(small_config)
        for model in (a, b):
            optimizer = build_optimizer(ParamStore.from_module(model), 1e-3)
            for step in range(2):
                pretrain_step(batch, model, augmentor, optimizer, LossConfig(), seed=batch_seed(7, step))
        assert ParamStore.from_module(a).digest() == ParamStore.from_module(b).digest()

    def test_lambda_zero_is_plain_masked_reconstruction(self, small_config, batch, augmentor):
        a, b = _twin_models(small_config)
        seed = batch_seed(3, 0)

        opt_a = build_optimizer(ParamStore.from_module(a), 1e-3)
        result = pretrain_step(batch, a, augmentor, opt_a, LossConfig(lambda_contrastive=0.0), seed)

        opt_b = build_optimizer(ParamStore.from_module(b), 1e-3)
        corrupted, plans = corrupt_batch(batch, augmentor, seed)
        masked = torch.stack([p.decisions for p in plans])
        loss = recon_loss(b(corrupted, TaskKind.RECON, masked=masked), batch, plans)
        loss.backward()
        optimizer_step(opt_b)

        assert result.total == result.sup == loss.item()
        assert ParamStore.from_module(a).digest() == ParamStore.from_module(b).digest()

    def test_consistency_term_enters_total(self, small_model, batch, augmentor):
        total, sup, con = pretrain_losses(batch, small_model, augmentor, LossConfig(lambda_contrastive=0.3), seed=5)
        assert con.item() > 0
        assert total.item() == pytest.approx(sup.item() + 0.3 * con.item(), rel=1e-12)

    def test_freq_att_off_drops_consistency(self, small_model, batch, augmentor):
        total, sup, con = pretrain_losses(batch, small_model, augmentor, LossConfig(), seed=5, freq_att=False)
        assert con.item() == 0.0
        assert total is sup

    def test_loss_decreases_on_fixed_batch(self, small_model, batch, augmentor):
        optimizer = build_optimizer(ParamStore.from_module(small_model), 5e-5)
        losses = [pretrain_step(batch, small_model, augmentor, optimizer, LossConfig(), seed=11).total for _ in range(50)]
        smoothed = np.convolve(losses, np.ones(5) / 5, mode="valid")
        assert np.all(np.diff(smoothed) < 0)

    def test_edge_and_uniform_plans_differ(self):
        phantom = phantom_generate(Rng(21), 64, 64)
        edge = SpectralAugmentor(AugmentConfig(patch_size=8, inv_freq_mask=True))
        uniform = SpectralAugmentor(AugmentConfig(patch_size=8, inv_freq_mask=False))
        reference = edge.plan(phantom.volume, Rng(0))
        high = torch.tensor([t is Tier.HIGH_EDGE for t in reference.tiers])

        def high_fractions(augmentor):
            return [augmentor.plan(phantom.volume, Rng(s)).decisions[high].double().mean().item() for s in range(1000)]

        result = stats.ttest_ind(high_fractions(edge), high_fractions(uniform))
        assert result.pvalue < 0.01


class TestFinetune:
    def test_encoder_hash_unchanged_over_100_steps(self, small_model, batch):
        store = ParamStore.from_module(small_model)
        store.freeze("encoder")
        trainable = {prefix: store.digest(prefix) for prefix in ("decoder", "tails.denoise", "heads.denoise")}
        digest = store.digest("encoder")
        optimizer = build_optimizer(store, 1e-3)
        targets = batch[:, :3]
        for step in range(100):
            finetune_step(batch, targets, small_model, "denoise", optimizer, store, seed=step)
        assert store.digest("encoder") == digest
        for prefix, before in trainable.items():
            assert store.digest(prefix) != before, prefix

    def test_unfrozen_encoder_rejected(self, small_model, batch):
        store = ParamStore.from_module(small_model)
        optimizer = build_optimizer(store, 1e-3)
        with pytest.raises(ContractError):
            finetune_step(batch, batch[:, :3], small_model, "denoise", optimizer, store)
        store.freeze("encoder")
        check_encoder_frozen(store)

    def test_non_finite_loss_dumps_batch(self, small_model, batch, tmp_path):
        store = ParamStore.from_module(small_model)
        store.freeze("encoder")
        optimizer = build_optimizer(store, 1e-3)
        targets = torch.full_like(batch[:, :3], float("nan"))
        with pytest.raises(NumericAbortError) as exc:
            finetune_step(batch, targets, small_model, "denoise", optimizer, store, seed=42, dump_dir=tmp_path)
        assert exc.value.batch_seed == 42
        assert torch.equal(read_fts(tmp_path / "nan_batch_42.fts"), batch)

    def test_sr2_loss_decreases(self, small_model, batch, tmp_path):
        inputs = F.avg_pool2d(batch, 2)
        targets = batch[:, :3]
        cfg = TrainConfig(finetune_steps=60, finetune_warmup_steps=5, batch_size=2, finetune_augment=False)
        encoder_digest = ParamStore.from_module(small_model).digest("encoder")
        result = finetune(small_model, inputs, targets, "sr2", cfg, tmp_path, trained_heads=["recon"])
        assert result.losses[-1].total < result.losses[0].total
        assert ParamStore.from_module(small_model).digest("encoder") == encoder_digest
        metadata, entries = read_checkpoint(result.checkpoint)
        assert metadata["trained_heads"] == ["recon", "sr2"]
        assert entries["encoder.positions"][1] is False
        assert entries["heads.sr2.body.0.weight"][1] is True
        rows = list(csv.reader((tmp_path / "run.csv").read_text().splitlines()))
        assert rows[0] == ["epoch", "step", "lr", "L_sup", "L_con", "L_total"]
        assert len(rows) == 61

    def test_warm_start_from_recon_head(self, small_model, batch, tmp_path):
        recon = small_model.heads["recon"].body[0].weight.detach().clone()
        cfg = TrainConfig(finetune_steps=2, finetune_warmup_steps=1, finetune_lr=1e-12, finetune_augment=False)
        finetune(small_model, batch, batch[:, :3], "denoise", cfg, tmp_path, trained_heads=["recon"])
        assert torch.allclose(small_model.heads["denoise"].body[0].weight, recon, atol=1e-9)
        assert torch.equal(small_model.heads["recon"].body[0].weight, recon)

    def test_segment_finetune(self, small_model, image16, tmp_path):
        labels = (image16[0] > image16[0].mean()).long().expand(2, 16, 16).clone()
        cfg = TrainConfig(finetune_steps=3, finetune_warmup_steps=1, batch_size=2)
        result = finetune(small_model, torch.stack([image16, image16]), labels, "segment", cfg, tmp_path)
        assert len(result.losses) == 3
        assert result.checkpoint.name == "finetune_segment.sspf"


class TestPretrainLoop:
    def _run(self, small_config, images, run_dir):
        torch.manual_seed(0)
        model = SSPFormer(small_config)
        train_cfg = TrainConfig(lr0=1e-3, warmup_epochs=1, epochs=3, batch_size=2, checkpoint_every=1, seed=4)
        return pretrain(model, images, train_cfg, LossConfig(), AugmentConfig(patch_size=4), run_dir)

    def test_artifacts_and_determinism(self, small_config, batch, tmp_path):
        images = torch.cat([batch, batch.flip(-2)])
        first = self._run(small_config, images, tmp_path / "a")
        second = self._run(small_config, images, tmp_path / "b")

        assert first.losses[-1].total == second.losses[-1].total
        assert (tmp_path / "a" / "run.csv").read_text() == (tmp_path / "b" / "run.csv").read_text()
        assert (tmp_path / "a" / "pretrain_epoch001.sspf").is_file()
        assert (tmp_path / "a" / "pretrain_epoch002.sspf").is_file()
        assert not (tmp_path / "a" / "pretrain_epoch003.sspf").exists()
        metadata, _ = read_checkpoint(first.checkpoint)
        assert metadata["trained_heads"] == ["recon"]
        assert metadata["epoch"] == 3

        rows = list(csv.DictReader((tmp_path / "a" / "run.csv").read_text().splitlines()))
        assert len(rows) == 6
        assert float(rows[0]["lr"]) == 0.0
        assert float(rows[2]["lr"]) == 1e-3


class TestFinetuneAugment:
    def test_shapes_and_determinism(self, batch):
        inputs, targets = F.avg_pool2d(batch, 2), batch[:, :3]
        a = finetune_augment(inputs, targets, Rng(5))
        b = finetune_augment(inputs, targets, Rng(5))
        assert a[0].shape == inputs.shape and a[1].shape == targets.shape
        assert torch.equal(a[0], b[0]) and torch.equal(a[1], b[1])

    def test_labels_stay_in_class_set(self, batch):
        labels = Rng(6).integers(0, 4, (2, 16, 16))
        _, out = finetune_augment(batch, labels, Rng(7), labels=True)
        assert out.dtype == torch.long
        assert set(out.unique().tolist()) <= {0, 1, 2, 3}
