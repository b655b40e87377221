import cmath
import math

import numpy as np
import pytest
import torch

from src.core.errors import ContainerFormatError, ContractError, ShapeError, SizingError
from src.numeric import (
    Rng,
    backward,
    conv2d,
    decode_fts,
    encode_fts,
    fft2,
    finite_diff_grad,
    gradient_check,
    ifft2,
    matmul,
    pixel_shuffle,
    pixel_unshuffle,
    read_fts,
    relative_error,
    softmax,
    write_fts,
)

POW2 = [4, 8, 16, 32, 64]


def _rel(a: torch.Tensor, b: torch.Tensor) -> float:
    return ((a - b).abs().norm() / b.abs().norm()).item()


def _complex(rng: Rng, shape) -> torch.Tensor:
    return torch.complex(rng.normal(shape), rng.normal(shape))


def _direct_dft(x: np.ndarray) -> np.ndarray:
    h, w = x.shape
    out = np.zeros((h, w), dtype=np.complex128)
    for u in range(h):
        for v in range(w):
            total = 0j
            for i in range(h):
                for j in range(w):
                    total += x[i, j] * cmath.exp(-2j * math.pi * (u * i / h + v * j / w))
            out[u, v] = total
    return out


class TestFFT:
    def test_impulse_gives_all_ones(self):
        x = torch.zeros(8, 8)
        x[0, 0] = 1.0
        assert torch.allclose(fft2(x), torch.ones(8, 8, dtype=torch.complex128))

    def test_constant_concentrates_at_dc(self):
        spectrum = fft2(torch.full((8, 8), 2.5))
        expected = torch.zeros(8, 8, dtype=torch.complex128)
        expected[0, 0] = 2.5 * 64
        assert torch.allclose(spectrum, expected, atol=1e-12)

    def test_all_ones_spectrum_inverts_to_impulse(self):
        x = ifft2(torch.ones(8, 8))
        expected = torch.zeros(8, 8, dtype=torch.complex128)
        expected[0, 0] = 1.0
        assert torch.allclose(x, expected, atol=1e-15)

    def test_matches_direct_dft(self):
        x = Rng(3).normal((8, 8))
        oracle = torch.from_numpy(_direct_dft(x.numpy()))
        assert _rel(fft2(x), oracle) <= 1e-9

    @pytest.mark.parametrize("n", POW2)
    def test_round_trip(self, n):
        x = _complex(Rng(n), (n, n))
        assert _rel(ifft2(fft2(x)), x) <= 1e-10

    @pytest.mark.parametrize("n", POW2)
    def test_parseval(self, n):
        x = Rng(10 + n).normal((n, n))
        spatial = (x * x).sum().item()
        spectral = (fft2(x).abs() ** 2).sum().item() / (n * n)
        assert abs(spatial - spectral) / spatial <= 1e-9

    def test_linearity(self):
        rng = Rng(5)
        x, y = _complex(rng, (16, 16)), _complex(rng, (16, 16))
        a, b = 0.7, -1.3
        assert _rel(fft2(a * x + b * y), a * fft2(x) + b * fft2(y)) <= 1e-10

    def test_hermitian_spectrum_inverts_to_real(self):
        spectrum = fft2(Rng(6).normal((16, 16)))
        assert ifft2(spectrum).imag.abs().max().item() <= 1e-10

    def test_batch_axes_are_independent(self):
        x = Rng(8).normal((3, 8, 8))
        batched = fft2(x)
        for i in range(3):
            assert torch.allclose(batched[i], fft2(x[i]), atol=1e-12)

    def test_non_power_of_two_names_axis(self):
        with pytest.raises(SizingError) as exc:
            fft2(torch.zeros(8, 12))
        assert exc.value.axis == 1
        assert exc.value.extent == 12


class TestConvAndShuffle:
    def test_identity_kernel(self):
        x = Rng(1).normal((1, 5, 5))
        assert torch.equal(conv2d(x, torch.ones(1, 1, 1, 1)), x)

    def test_box_kernel_hand_sums(self):
        out = conv2d(torch.ones(1, 3, 3), torch.ones(1, 1, 3, 3))
        assert out[0, 1, 1] == 9.0
        assert out[0, 0, 0] == 4.0 and out[0, 2, 2] == 4.0
        assert out[0, 0, 1] == 6.0 and out[0, 1, 2] == 6.0

    def test_zero_kernel(self):
        assert torch.count_nonzero(conv2d(Rng(2).normal((2, 4, 4)), torch.zeros(3, 2, 3, 3))) == 0

    def test_valid_padding_shrinks(self):
        assert conv2d(torch.ones(1, 5, 5), torch.ones(1, 1, 3, 3), padding="valid").shape == (1, 3, 3)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d(torch.ones(2, 4, 4), torch.ones(1, 3, 3, 3))

    def test_even_kernel_rejected_for_same(self):
        with pytest.raises(ShapeError):
            conv2d(torch.ones(1, 4, 4), torch.ones(1, 1, 2, 2))

    def test_pixel_shuffle_identity(self):
        x = Rng(3).normal((4, 3, 3))
        assert torch.equal(pixel_shuffle(x, 1), x)

    def test_pixel_shuffle_index_formula(self):
        x = torch.tensor([1.0, 2.0, 3.0, 4.0]).view(4, 1, 1)
        out = pixel_shuffle(x, 2)
        assert out.shape == (1, 2, 2)
        assert out[0].tolist() == [[1.0, 2.0], [3.0, 4.0]]

    def test_pixel_shuffle_preserves_multiset(self):
        x = Rng(4).normal((8, 3, 3))
        out = pixel_shuffle(x, 2)
        assert torch.equal(out.flatten().sort().values, x.flatten().sort().values)

    def test_unshuffle_inverts_shuffle(self):
        x = Rng(5).normal((8, 3, 3))
        assert torch.equal(pixel_unshuffle(pixel_shuffle(x, 2), 2), x)

    def test_indivisible_channels(self):
        with pytest.raises(ShapeError):
            pixel_shuffle(torch.ones(3, 2, 2), 2)


class TestMatmulSoftmax:
    def test_identity(self):
        a = Rng(1).normal((3, 3))
        assert torch.equal(matmul(torch.eye(3), a), a)

    def test_hand_product(self):
        out = matmul(torch.tensor([[1.0, 2.0], [3.0, 4.0]]), torch.tensor([[5.0], [6.0]]))
        assert out.tolist() == [[17.0], [39.0]]

    def test_transpose_identity(self):
        rng = Rng(2)
        a, b = rng.normal((4, 5)), rng.normal((5, 3))
        assert torch.allclose(matmul(a, b).T, matmul(b.T, a.T), atol=1e-12)

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(torch.ones(2, 3), torch.ones(2, 3))

    def test_softmax_rows_sum_to_one(self):
        out = softmax(Rng(3).normal((5, 7)) * 10)
        assert torch.allclose(out.sum(-1), torch.ones(5), atol=1e-12)

    def test_softmax_constant_row_is_uniform(self):
        assert torch.allclose(softmax(torch.full((4,), 3.0)), torch.full((4,), 0.25))

    def test_softmax_shift_invariant(self):
        x = Rng(4).normal((6,))
        assert torch.allclose(softmax(x), softmax(x + 100.0), atol=1e-12)

    def test_softmax_closed_form(self):
        out = softmax(torch.tensor([0.0, math.log(3.0)]))
        assert out[0].item() == pytest.approx(0.25, abs=1e-12)
        assert out[1].item() == pytest.approx(0.75, abs=1e-12)

    def test_softmax_rejects_nan(self):
        with pytest.raises(ContractError):
            softmax(torch.tensor([0.0, float("nan")]))


class TestAutodiff:
    def test_sum_gradient_is_ones(self):
        x = Rng(1).normal((3, 4)).requires_grad_(True)
        backward(x.sum())
        assert torch.equal(x.grad, torch.ones(3, 4))

    def test_square_gradient(self):
        x = Rng(2).normal((5,)).requires_grad_(True)
        backward((x * x).sum())
        assert torch.allclose(x.grad, 2 * x.detach())

    def test_non_scalar_loss_rejected(self):
        x = torch.ones(3, requires_grad=True)
        with pytest.raises(ContractError):
            backward(x * 2)

    def test_finite_diff_sum(self):
        assert torch.allclose(finite_diff_grad(lambda t: t.sum(), Rng(3).normal((4,))), torch.ones(4))

    def test_finite_diff_square_at_three(self):
        g = finite_diff_grad(lambda t: (t * t).sum(), torch.tensor([3.0]), eps=1e-5)
        assert g.item() == pytest.approx(6.0, abs=1e-8)

    def test_finite_diff_needs_positive_eps(self):
        with pytest.raises(ContractError):
            finite_diff_grad(lambda t: t.sum(), torch.ones(2), eps=0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_conv2d_gradient(self, seed):
        rng = Rng(seed)
        x, k = rng.normal((2, 5, 5)), rng.normal((3, 2, 3, 3))
        assert gradient_check(lambda a, b: (conv2d(a, b) ** 2).sum(), [x, k]) <= 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_fft_magnitude_gradient(self, seed):
        x = Rng(seed).normal((8, 8))
        assert gradient_check(lambda a: ifft2(fft2(a).abs()).real.sum() + fft2(a).abs().sum(), [x]) <= 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_shuffle_softmax_matmul_gradient(self, seed):
        rng = Rng(seed)
        x, w = rng.normal((4, 3, 3)), rng.normal((6, 6))

        def f(a, b):
            s = pixel_shuffle(a, 2).reshape(6, 6)
            return (softmax(matmul(s, b)) * s).sum()

        assert gradient_check(f, [x, w]) <= 1e-4

    def test_relative_error_is_normwise(self):
        assert relative_error(torch.tensor([3.0, 4.0]), torch.tensor([3.0, 4.0])) == 0.0
        assert relative_error(torch.tensor([1.0, 0.0]), torch.tensor([0.0, 0.0])) == 1.0


class TestRngAndContainer:
    def test_same_seed_same_stream(self):
        assert torch.equal(Rng(42).normal((10,)), Rng(42).normal((10,)))

    def test_derive_is_xor(self):
        assert Rng(0b1010).derive(0b0110).seed == 0b1100

    def test_fts_round_trip_real_and_complex(self, tmp_path):
        rng = Rng(9)
        real = rng.normal((2, 3, 4))
        cplx = _complex(rng, (4, 4))
        write_fts(tmp_path / "r.fts", real)
        write_fts(tmp_path / "c.fts", cplx)
        assert torch.equal(read_fts(tmp_path / "r.fts"), real)
        assert torch.equal(read_fts(tmp_path / "c.fts"), cplx)

    def test_fts_layout(self):
        buf = encode_fts(torch.tensor([[1.0, 2.0]]))
        assert buf[:4] == b"FTS1"
        assert buf[4] == 0 and buf[5] == 2
        assert buf[6:14] == (1).to_bytes(4, "little") + (2).to_bytes(4, "little")
        assert len(buf) == 14 + 16

    def test_fts_bad_magic(self):
        with pytest.raises(ContainerFormatError):
            decode_fts(b"XXXX" + bytes(10))

    def test_fts_truncated_payload(self):
        buf = encode_fts(torch.ones(4))
        with pytest.raises(ContainerFormatError):
            decode_fts(buf[:-3])
