import csv
import math

import pytest
import torch

from src.core.errors import ConfigError, ShapeError, UndefinedMetricError
from src.data import add_gaussian_noise
from src.metrics import MetricReport, dice, hd95, per_class_dice, psnr, ssim
from src.numeric import Rng


def _random_mask(seed: int, size: int, p: float = 0.3) -> torch.Tensor:
    mask = Rng(seed).uniform((size, size)) < p
    mask[size // 2, size // 2] = True
    return mask


def _boundary_oracle(mask: torch.Tensor) -> list[tuple[int, int]]:
    h, w = mask.shape
    points = []
    for i in range(h):
        for j in range(w):
            if not mask[i, j]:
                continue
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ni, nj = i + di, j + dj
                if not (0 <= ni < h and 0 <= nj < w) or not mask[ni, nj]:
                    points.append((i, j))
                    break
    return points


def _percentile_oracle(values: list[float], q: float) -> float:
    ordered = sorted(values)
    rank = q / 100 * (len(ordered) - 1)
    lo = math.floor(rank)
    hi = min(lo + 1, len(ordered) - 1)
    return ordered[lo] + (rank - lo) * (ordered[hi] - ordered[lo])


def _hd95_oracle(a: torch.Tensor, b: torch.Tensor) -> float:
    pa, pb = _boundary_oracle(a), _boundary_oracle(b)
    forward = [min(math.hypot(i - k, j - l) for k, l in pb) for i, j in pa]
    backward = [min(math.hypot(i - k, j - l) for k, l in pa) for i, j in pb]
    return _percentile_oracle(forward + backward, 95)


class TestPSNR:
    def test_identical_is_infinite(self, image16):
        assert psnr(image16, image16) == math.inf

    def test_uniform_error(self):
        target = torch.full((8, 8), 0.4)
        assert psnr(target + 0.1, target) == pytest.approx(20.0, abs=1e-9)

    def test_joint_permutation(self, image16):
        noisy = image16 + 0.05 * Rng(1).normal(image16.shape)
        perm = torch.randperm(16, generator=torch.Generator().manual_seed(0))
        assert psnr(noisy[..., perm], image16[..., perm]) == pytest.approx(psnr(noisy, image16), abs=1e-12)

    def test_decreases_with_noise(self, image16):
        values = [psnr(add_gaussian_noise(image16, sigma, Rng(i)), image16)
                  for i, sigma in enumerate((0.05, 0.10, 0.15, 0.20, 0.25))]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_bad_inputs(self):
        with pytest.raises(ShapeError):
            psnr(torch.zeros(4, 4), torch.zeros(4, 5))
        with pytest.raises(ConfigError):
            psnr(torch.zeros(4, 4), torch.ones(4, 4), peak=0.0)


class TestSSIM:
    def test_identical_is_one(self, image16):
        assert ssim(image16, image16) == 1.0

    def test_constant_images(self):
        c1 = 0.01**2
        value = ssim(torch.ones(16, 16), torch.zeros(16, 16))
        assert value == pytest.approx(c1 / (1 + c1), rel=1e-6)

    def test_symmetry(self, image16):
        other = image16 + 0.1 * Rng(2).normal(image16.shape)
        assert abs(ssim(image16, other) - ssim(other, image16)) <= 1e-12

    def test_scale_invariance_with_peak(self, image16):
        other = image16 + 0.1 * Rng(3).normal(image16.shape)
        assert ssim(4.0 * image16, 4.0 * other, peak=4.0) == pytest.approx(ssim(image16, other), abs=1e-9)

    def test_noise_lowers_ssim(self, image16):
        assert ssim(image16 + 0.2 * Rng(4).normal(image16.shape), image16) < 1.0

    def test_image_smaller_than_window(self):
        with pytest.raises(ShapeError):
            ssim(torch.zeros(8, 8), torch.zeros(8, 8))


class TestDice:
    def test_identical(self):
        mask = _random_mask(1, 8)
        assert dice(mask, mask) == 1.0

    def test_disjoint(self):
        a = torch.zeros(4, 4, dtype=torch.bool)
        b = torch.zeros(4, 4, dtype=torch.bool)
        a[0, 0] = b[3, 3] = True
        assert dice(a, b) == 0.0

    def test_half_overlap(self):
        a = torch.zeros(4, 4, dtype=torch.bool)
        b = torch.zeros(4, 4, dtype=torch.bool)
        a[0, :4] = True
        b[0, 2:] = True
        b[1, :2] = True
        assert dice(a, b) == 0.5

    def test_both_empty_recorded(self):
        warnings: list[str] = []
        empty = torch.zeros(4, 4, dtype=torch.bool)
        assert dice(empty, empty, warnings) == 1.0
        assert len(warnings) == 1

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dice(torch.zeros(4, 4), torch.zeros(4, 3))

    def test_per_class(self):
        target = torch.tensor([[0, 1], [2, 3]])
        pred = torch.tensor([[0, 1], [2, 2]])
        assert per_class_dice(pred, target, 4) == {1: 1.0, 2: pytest.approx(2 / 3), 3: 0.0}

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_count_oracle(self, seed):
        size = 8 + seed % 25
        a, b = _random_mask(seed, size), _random_mask(seed + 1000, size)
        inter = sum(bool(a[i, j] and b[i, j]) for i in range(size) for j in range(size))
        assert dice(a, b) == 2 * inter / (int(a.sum()) + int(b.sum()))


class TestHD95:
    def test_identical(self):
        mask = _random_mask(2, 12)
        assert hd95(mask, mask) == 0.0

    def test_single_pixels(self):
        a = torch.zeros(8, 8, dtype=torch.bool)
        b = torch.zeros(8, 8, dtype=torch.bool)
        a[2, 1] = True
        b[2, 4] = True
        assert hd95(a, b) == 3.0

    def test_symmetric(self):
        a, b = _random_mask(3, 16), _random_mask(4, 16)
        assert hd95(a, b) == hd95(b, a)

    def test_empty_mask(self):
        with pytest.raises(UndefinedMetricError):
            hd95(torch.zeros(4, 4, dtype=torch.bool), _random_mask(5, 4))

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_brute_force_oracle(self, seed):
        size = 6 + seed % 19
        a, b = _random_mask(seed, size), _random_mask(seed + 500, size)
        assert hd95(a, b) == pytest.approx(_hd95_oracle(a, b), abs=1e-12)


class TestMetricReport:
    def test_summary_and_mean(self):
        report = MetricReport()
        report.add("0000", "denoise", "psnr", 30.0)
        report.add("0001", "denoise", "psnr", 32.0)
        report.add("0000", "denoise", "ssim", 0.9)
        assert report.summary() == {("denoise", "psnr"): 31.0, ("denoise", "ssim"): 0.9}
        assert report.mean("denoise", "psnr") == 31.0
        with pytest.raises(KeyError):
            report.mean("segment", "dice_1")

    def test_infinite_rows(self):
        report = MetricReport()
        report.add("0000", "denoise", "psnr_input", math.inf)
        report.add("0001", "denoise", "psnr_input", 20.0)
        assert report.mean("denoise", "psnr_input") == math.inf

    def test_units(self):
        report = MetricReport()
        for metric in ("psnr", "psnr_input", "hd95_2", "dice_1"):
            report.add("0000", "segment", metric, 1.0)
        assert [row.units for row in report.rows] == ["dB", "dB", "px", ""]

    def test_csv(self, tmp_path):
        report = MetricReport()
        report.add("0000/s0.10", "denoise", "psnr", 0.1 + 0.2)
        report.add("0001/s0.10", "denoise", "psnr", math.inf)
        path = tmp_path / "metrics.csv"
        report.write_csv(path)
        rows = list(csv.reader(path.read_text().splitlines()))
        assert rows[0] == ["sample_id", "task", "metric", "value"]
        assert float(rows[1][3]) == 0.1 + 0.2
        assert float(rows[2][3]) == math.inf
