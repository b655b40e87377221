import torch

# 64-bit everywhere: gradient checks and FFT round trips rely on it.
torch.set_default_dtype(torch.float64)

from .autodiff import backward, finite_diff_grad, gradient_check, relative_error  # noqa: E402
from .container import decode_fts, encode_fts, read_fts, write_fts  # noqa: E402
from .ops import conv2d, fft2, ifft2, is_power_of_two, matmul, pixel_shuffle, pixel_unshuffle, softmax  # noqa: E402
from .rng import Rng  # noqa: E402

__all__ = [
    "Rng",
    "backward",
    "conv2d",
    "decode_fts",
    "encode_fts",
    "fft2",
    "finite_diff_grad",
    "gradient_check",
    "ifft2",
    "is_power_of_two",
    "matmul",
    "pixel_shuffle",
    "pixel_unshuffle",
    "read_fts",
    "relative_error",
    "softmax",
    "write_fts",
]
