from .quality import gaussian_window, psnr, ssim
from .report import CSV_HEADER, MetricReport, MetricRow
from .segmentation import boundary, dice, hd95, per_class_dice

__all__ = [
    "CSV_HEADER",
    "MetricReport",
    "MetricRow",
    "boundary",
    "dice",
    "gaussian_window",
    "hd95",
    "per_class_dice",
    "psnr",
    "ssim",
]
