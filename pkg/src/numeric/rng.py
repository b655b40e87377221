import torch

from src.core.errors import ConfigError

_SEED_MASK = (1 << 64) - 1


class Rng:
    """Seeded scalar stream backed by torch's CPU mt19937 generator.

    Every stochastic operation in the package takes one of these explicitly.
    """

    def __init__(self, seed: int):
        if not 0 <= seed <= _SEED_MASK:
            raise ConfigError(f"Seed must be a 64-bit unsigned integer, got {seed}.")
        self.seed = seed
        self._gen = torch.Generator().manual_seed(seed)

    def derive(self, index: int) -> "Rng":
        """Independent stream for item `index`: seed XOR index."""
        return Rng((self.seed ^ index) & _SEED_MASK)

    def normal(self, shape, std: float = 1.0, mean: float = 0.0) -> torch.Tensor:
        return torch.randn(shape, generator=self._gen, dtype=torch.float64) * std + mean

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> torch.Tensor:
        return torch.rand(shape, generator=self._gen, dtype=torch.float64) * (high - low) + low

    def scalar(self, low: float = 0.0, high: float = 1.0) -> float:
        return float(self.uniform((1,), low, high)[0])

    def integers(self, low: int, high: int, shape=(1,)) -> torch.Tensor:
        return torch.randint(low, high, shape, generator=self._gen)

    def permutation(self, n: int) -> torch.Tensor:
        return torch.randperm(n, generator=self._gen)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"
