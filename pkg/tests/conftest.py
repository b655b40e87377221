import pytest
import torch

from src.core.config import RunConfig, load_run_config
from src.model import ModelConfig, SSPFormer
from src.numeric import Rng


@pytest.fixture
def small_config() -> ModelConfig:
    """Reduced model: P=4, D=8, 2 heads, 2 encoder layers, 1 decoder layer, C=4, 16×16 input."""
    return ModelConfig(
        patch_size=4,
        embed_dim=8,
        encoder_layers=2,
        decoder_layers=1,
        heads=2,
        head_dim=4,
        channels=4,
        image_size=16,
    )


@pytest.fixture
def small_model(small_config) -> SSPFormer:
    torch.manual_seed(0)
    return SSPFormer(small_config)


@pytest.fixture
def rng() -> Rng:
    return Rng(1234)


@pytest.fixture
def image16(rng) -> torch.Tensor:
    """[6,16,16] smooth blob on a dark background."""
    y, x = torch.meshgrid(torch.linspace(-1, 1, 16), torch.linspace(-1, 1, 16), indexing="ij")
    blob = torch.exp(-(x * x + y * y) * 3.0)
    return blob.expand(6, 16, 16) * rng.uniform((6, 1, 1), 0.5, 1.0) + 0.01 * rng.normal((6, 16, 16))


@pytest.fixture
def tiny_run_config() -> RunConfig:
    """Runs the whole CLI pipeline in seconds."""
    return load_run_config(
        overrides=dict(
            seed=7,
            image_size=32,
            num_phantoms=6,
            splits=(0.5, 0.0, 0.5),
            patch_size=8,
            embed_dim=8,
            encoder_layers=1,
            decoder_layers=1,
            heads=2,
            head_dim=4,
            channels=4,
            epochs=2,
            warmup_epochs=1,
            batch_size=2,
            checkpoint_every=1,
            finetune_steps=3,
            finetune_warmup_steps=1,
        )
    )
