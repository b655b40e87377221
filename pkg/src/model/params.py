import hashlib
import logging
from collections.abc import Iterator, Mapping

import torch
import torch.nn as nn

from src.core.errors import ConfigError, ParamPathError

logger = logging.getLogger(__name__)

FILTERS = ("all", "trainable", "frozen")


class ParamStore:
    """Named, freezable collection of learnable tensors.

    Entries are the module's own nn.Parameter objects, so freezing a path here
    freezes it in the network. Freezing toggles `requires_grad` only.
    """

    def __init__(self, params: Mapping[str, torch.Tensor] | None = None):
        self._params: dict[str, nn.Parameter] = {}
        for path, tensor in (params or {}).items():
            self.add(path, tensor)

    @classmethod
    def from_module(cls, module: nn.Module) -> "ParamStore":
        return cls(dict(module.named_parameters()))

    def add(self, path: str, tensor: torch.Tensor, trainable: bool | None = None) -> None:
        if path in self._params:
            raise ParamPathError(f"Duplicate parameter path '{path}'.")
        param = tensor if isinstance(tensor, nn.Parameter) else nn.Parameter(tensor.detach().clone())
        if trainable is not None:
            param.requires_grad_(trainable)
        self._params[path] = param

    def __getitem__(self, path: str) -> nn.Parameter:
        return self._params[path]

    def __contains__(self, path: str) -> bool:
        return path in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def items(self):
        return self._params.items()

    def is_trainable(self, path: str) -> bool:
        return self._params[path].requires_grad

    def flags(self) -> dict[str, bool]:
        return {path: p.requires_grad for path, p in self._params.items()}

    def match(self, prefix: str) -> list[str]:
        """Paths equal to `prefix` or below it in the dotted hierarchy; "" matches all."""
        if not prefix:
            return list(self._params)
        return [p for p in self._params if p == prefix or p.startswith(prefix + ".")]

    def _set_trainable(self, prefix: str, trainable: bool) -> list[str]:
        paths = self.match(prefix)
        if not paths:
            raise ParamPathError(f"No parameter path matches prefix '{prefix}'.")
        for path in paths:
            param = self._params[path]
            param.requires_grad_(trainable)
            if not trainable:
                param.grad = None
        logger.info("Parameters %s | prefix=%s count=%d", "unfrozen" if trainable else "frozen", prefix, len(paths))
        return paths

    def freeze(self, prefix: str) -> list[str]:
        return self._set_trainable(prefix, False)

    def unfreeze(self, prefix: str) -> list[str]:
        return self._set_trainable(prefix, True)

    def count(self, filter: str = "all", prefix: str = "") -> int:
        if filter not in FILTERS:
            raise ConfigError(f"Parameter filter must be one of {FILTERS}, got '{filter}'.")
        total = 0
        for path in self.match(prefix):
            param = self._params[path]
            if filter == "trainable" and not param.requires_grad:
                continue
            if filter == "frozen" and param.requires_grad:
                continue
            total += param.numel()
        return total

    def trainable(self) -> list[nn.Parameter]:
        return [p for p in self._params.values() if p.requires_grad]

    def digest(self, prefix: str = "") -> str:
        """SHA-256 over path names and raw value bytes of the matching entries."""
        h = hashlib.sha256()
        for path in sorted(self.match(prefix)):
            h.update(path.encode("utf-8"))
            h.update(self._params[path].detach().cpu().contiguous().numpy().tobytes())
        return h.hexdigest()


def count_params(store: ParamStore, filter: str = "all", prefix: str = "") -> int:
    return store.count(filter, prefix)


def freeze(store: ParamStore, prefix: str) -> list[str]:
    return store.freeze(prefix)


def unfreeze(store: ParamStore, prefix: str) -> list[str]:
    return store.unfreeze(prefix)
