"""PSNR and multi-scale SSIM for frames in [0, 1]."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from ._validation import check_image, check_video
from .exceptions import ParamError

# Wang, Simoncelli & Bovik reference constants
MSSSIM_WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])
WINDOW_SIZE = 11
WINDOW_SIGMA = 1.5
K1, K2 = 0.01, 0.03
MIN_SCALE_SIZE = 16


def psnr(a, b) -> float:
    """PSNR in dB with peak 1.0; ``math.inf`` for identical inputs."""
    a = check_image(a, "a")
    b = check_image(b, "b")
    if a.shape != b.shape:
        raise ParamError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window():
    x = np.arange(WINDOW_SIZE) - (WINDOW_SIZE - 1) / 2.0
    g = np.exp(-(x**2) / (2 * WINDOW_SIGMA**2))
    return g / g.sum()


def _filter_valid(img, g):
    # separable Gaussian, keeping only fully supported outputs
    out = correlate1d(correlate1d(img, g, axis=0, mode="constant"), g, axis=1, mode="constant")
    r = len(g) // 2
    return out[r : img.shape[0] - r, r : img.shape[1] - r]


def ssim_components(a, b, data_range=1.0):
    """Mean SSIM index and mean contrast-structure term at one scale."""
    g = _gaussian_window()
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    saa = _filter_valid(a * a, g) - mu_a**2
    sbb = _filter_valid(b * b, g) - mu_b**2
    sab = _filter_valid(a * b, g) - mu_a * mu_b
    cs_map = (2 * sab + c2) / (saa + sbb + c2)
    lum_map = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    return float(np.mean(lum_map * cs_map)), float(np.mean(cs_map))


def n_scales(shape) -> int:
    m = min(shape)
    n = 1
    while n < 5 and m / 2 ** n >= MIN_SCALE_SIZE:
        n += 1
    return n


def _downsample(img):
    # 2x2 average then decimate; odd trailing rows/columns are dropped
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    x = img[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(a, b, data_range: float = 1.0) -> float:
    """Multi-scale SSIM.

    Uses as many dyadic scales (up to five) as keep the coarsest image at
    least 16 pixels across; the standard exponents of the scales used are
    rescaled to keep their original total. Negative contrast-structure
    values are clipped at zero before exponentiation.
    """
    a = check_image(a, "a")
    b = check_image(b, "b")
    if a.shape != b.shape:
        raise ParamError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < 2 * MIN_SCALE_SIZE:
        raise ParamError(f"ms_ssim needs images at least 32 px on each side, got {a.shape}")
    n = n_scales(a.shape)
    weights = MSSSIM_WEIGHTS[:n] * (MSSSIM_WEIGHTS.sum() / MSSSIM_WEIGHTS[:n].sum())
    score = 1.0
    for i in range(n):
        ssim_val, cs = ssim_components(a, b, data_range)
        if i == n - 1:
            score *= max(ssim_val, 0.0) ** weights[i]
        else:
            score *= max(cs, 0.0) ** weights[i]
            a, b = _downsample(a), _downsample(b)
    return float(score)


@dataclass
class QualityReport:
    psnr: list = field(default_factory=list)
    ms_ssim: list = field(default_factory=list)
    scales: int = 0

    @property
    def mean_psnr(self) -> float:
        vals = np.asarray(self.psnr, dtype=np.float64)
        return float(np.mean(vals)) if len(vals) else math.nan

    @property
    def mean_ms_ssim(self) -> float:
        return float(np.mean(self.ms_ssim)) if self.ms_ssim else math.nan

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame_index", "psnr_db", "ms_ssim"])
            for i, (p, m) in enumerate(zip(self.psnr, self.ms_ssim)):
                w.writerow([i, "inf" if math.isinf(p) else f"{p:.6f}", f"{m:.6f}"])


def report(seq_a, seq_b) -> QualityReport:
    """Per-frame PSNR and MS-SSIM between two (H, W, T) sequences."""
    a = check_video(seq_a, "reference")
    b = check_video(seq_b, "estimate")
    if a.shape != b.shape:
        raise ParamError(f"sequence shapes differ: {a.shape} vs {b.shape}")
    rep = QualityReport(scales=n_scales(a.shape[:2]))
    for t in range(a.shape[2]):
        rep.psnr.append(psnr(a[:, :, t], b[:, :, t]))
        rep.ms_ssim.append(ms_ssim(a[:, :, t], b[:, :, t]))
    return rep


def mean_ms_ssim(seq_a, seq_b) -> float:
    return report(seq_a, seq_b).mean_ms_ssim
