"""Image quality measures: relative error, PSNR, mean SSIM and noise level."""

from dataclasses import dataclass, asdict
import math

import numpy as np
from scipy import ndimage

__all__ = ["UndefinedMetricError", "QualityReport", "relative_error", "psnr", "mssim",
           "noise_level", "quality_report"]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


class UndefinedMetricError(ValueError):
    pass


def _pair(x, truth):
    x = np.asarray(x, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if x.shape != truth.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {truth.shape}")
    return x, truth


def relative_error(x, truth):
    """``||x - truth||_2 / ||truth||_2``."""
    x, truth = _pair(x, truth)
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise UndefinedMetricError("relative error undefined for a zero reference image")
    return float(np.linalg.norm(x - truth) / denom)


def psnr(x, truth, data_range=None):
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    x, truth = _pair(x, truth)
    if data_range is None:
        data_range = _default_range(truth)
    if not data_range > 0:
        raise ValueError("data_range must be positive")
    mse = float(np.mean((x - truth) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def _default_range(truth):
    r = float(truth.max() - truth.min())
    return r if r > 0 else 1.0


def _gaussian_window():
    t = np.arange(SSIM_WINDOW) - (SSIM_WINDOW - 1) / 2
    w = np.exp(-(t**2) / (2 * SSIM_SIGMA**2))
    return w / w.sum()


def _valid_filter(img, w):
    out = ndimage.correlate1d(img, w, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, w, axis=1, mode="nearest")
    h = (w.size - 1) // 2
    return out[h:-h, h:-h]


def mssim(x, truth, data_range=None):
    """Mean structural similarity over all fully contained 11x11 windows.

    Gaussian window with standard deviation 1.5 and stability constants
    ``(0.01 R)^2`` and ``(0.03 R)^2``, where ``R`` defaults to the dynamic
    range of ``truth`` (1 when it is constant).
    """
    x, truth = _pair(x, truth)
    if x.ndim != 2 or min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    if data_range is None:
        data_range = _default_range(truth)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    w = _gaussian_window()
    mu_x = _valid_filter(x, w)
    mu_y = _valid_filter(truth, w)
    sxx = _valid_filter(x * x, w) - mu_x**2
    syy = _valid_filter(truth * truth, w) - mu_y**2
    sxy = _valid_filter(x * truth, w) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def noise_level(noise, b):
    """``||eta||_2 / ||b||_2``."""
    return float(np.linalg.norm(noise) / np.linalg.norm(b))


@dataclass(frozen=True)
class QualityReport:
    relative_error: float
    psnr_db: float
    mssim: float
    noise_level: float = None

    def as_dict(self):
        d = asdict(self)
        d["schema"] = 1
        return d


def quality_report(x, truth, data_range=None, noise=None):
    if data_range is None:
        data_range = _default_range(np.asarray(truth, dtype=np.float64))
    return QualityReport(
        relative_error=relative_error(x, truth),
        psnr_db=psnr(x, truth, data_range),
        mssim=mssim(x, truth, data_range),
        noise_level=noise,
    )
