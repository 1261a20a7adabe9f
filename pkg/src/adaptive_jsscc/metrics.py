"""PSNR and SSIM for images in [0, 1]."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from .errors import GeometryError

PSNR_CAP_DB = 99.0


def _as_array(x) -> np.ndarray:
    if hasattr(x, "detach"):
        x = x.detach().cpu().numpy()
    return np.asarray(x, dtype=np.float64)


def mse(s, s_hat) -> float:
    a, b = _as_array(s), _as_array(s_hat)
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(s, s_hat) -> float:
    """``10 log10(1 / MSE)`` with unit peak; an exact match is capped at 99 dB."""
    err = mse(s, s_hat)
    if err == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / err))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    r = len(win) // 2
    out = correlate1d(img, win, axis=-2, mode="constant")
    out = correlate1d(out, win, axis=-1, mode="constant")
    return out[..., r:-r, r:-r]


def ssim_map(a: np.ndarray, b: np.ndarray, win_size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """SSIM over every fully-contained Gaussian window of a 2-D plane (or stack)."""
    if a.shape[-1] < win_size or a.shape[-2] < win_size:
        raise GeometryError(f"image {a.shape[-2:]} smaller than the {win_size}x{win_size} SSIM window")
    c1, c2 = 0.01**2, 0.03**2
    w = gaussian_window(win_size, sigma)
    mu_a, mu_b = _filter_valid(a, w), _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a**2
    var_b = _filter_valid(b * b, w) - mu_b**2
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(s, s_hat) -> float:
    """Mean SSIM (11x11 Gaussian window, sigma 1.5, K1=0.01, K2=0.03, peak 1).

    Accepts ``(H, W)``, ``(C, H, W)`` or ``(b, C, H, W)``; the score is averaged
    over windows, channels and images.
    """
    a, b = _as_array(s), _as_array(s_hat)
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(ssim_map(a, b).mean())


def batch_psnr(s, s_hat) -> np.ndarray:
    """One PSNR per image of a ``(b, C, H, W)`` batch."""
    a, b = _as_array(s), _as_array(s_hat)
    return np.array([psnr(x, y) for x, y in zip(a, b)])


def batch_ssim(s, s_hat) -> np.ndarray:
    a, b = _as_array(s), _as_array(s_hat)
    return np.array([ssim(x, y) for x, y in zip(a, b)])
