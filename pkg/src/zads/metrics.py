"""Magnitude-image quality metrics for reconstruction reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError

__all__ = ["MetricPair", "psnr", "ssim", "evaluate_images"]

_WINDOW = 11
_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03


@dataclass(frozen=True)
class MetricPair:
    psnr: float
    ssim: float


def _as_magnitude(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if np.iscomplexobj(img):
        img = np.abs(img)
    return img.astype(np.float64)


def psnr(ref: np.ndarray, test: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB, peak taken from the reference.

    Note the asymmetry: only the reference defines the peak, so
    psnr(a, b) != psnr(b, a) in general. Identical inputs give +inf.
    """
    ref = _as_magnitude(ref)
    test = _as_magnitude(test)
    if ref.shape != test.shape:
        raise ConfigError(f"shape mismatch: {ref.shape} vs {test.shape}")
    peak = float(ref.max())
    if peak == 0.0:
        raise ConfigError("reference image is identically zero")
    mse = float(np.mean((ref - test) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / mse))


def _gaussian_window() -> np.ndarray:
    ax = np.arange(_WINDOW) - _WINDOW // 2
    g = np.exp(-(ax**2) / (2.0 * _SIGMA**2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(ref: np.ndarray, test: np.ndarray) -> float:
    """Mean local structural similarity.

    Gaussian-weighted 11x11 windows (sigma 1.5), stability constants
    K1=0.01 / K2=0.03, dynamic range taken from the reference; the local
    map is averaged over the fully valid interior (no boundary padding).
    """
    ref = _as_magnitude(ref)
    test = _as_magnitude(test)
    if ref.shape != test.shape:
        raise ConfigError(f"shape mismatch: {ref.shape} vs {test.shape}")
    if min(ref.shape) < _WINDOW:
        raise ConfigError(f"images must be at least {_WINDOW} pixels per side")
    drange = float(ref.max() - ref.min())
    if drange == 0.0:
        raise ConfigError("reference image has zero dynamic range")
    c1 = (_K1 * drange) ** 2
    c2 = (_K2 * drange) ** 2
    w = _gaussian_window()

    def smooth(img):
        return fftconvolve(img, w, mode="valid")

    mu1 = smooth(ref)
    mu2 = smooth(test)
    var1 = smooth(ref * ref) - mu1**2
    var2 = smooth(test * test) - mu2**2
    cov = smooth(ref * test) - mu1 * mu2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)
    den = (mu1**2 + mu2**2 + c1) * (var1 + var2 + c2)
    return float(np.mean(num / den))


def evaluate_images(ref: np.ndarray, test: np.ndarray) -> MetricPair:
    """PSNR/SSIM of magnitude images, both scaled by the reference's peak."""
    ref = _as_magnitude(ref)
    test = _as_magnitude(test)
    peak = float(ref.max())
    if peak == 0.0:
        raise ConfigError("reference image is identically zero")
    ref = ref / peak
    test = test / peak
    return MetricPair(psnr=psnr(ref, test), ssim=ssim(ref, test))
