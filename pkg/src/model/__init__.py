from .checkpoint import load_into, read_checkpoint, save_checkpoint
from .config import ModelConfig, TaskKind
from .layers import FGFFN, Attention, MSABlock, frequency_gate, icn
from .params import ParamStore, count_params, freeze, unfreeze
from .sspformer import SSPFormer, TokenSequence

__all__ = [
    "FGFFN",
    "Attention",
    "MSABlock",
    "ModelConfig",
    "ParamStore",
    "SSPFormer",
    "TaskKind",
    "TokenSequence",
    "count_params",
    "freeze",
    "frequency_gate",
    "icn",
    "load_into",
    "read_checkpoint",
    "save_checkpoint",
    "unfreeze",
]
