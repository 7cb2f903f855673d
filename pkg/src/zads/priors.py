"""Denoising priors: the epsilon-prediction interface and analytic models.

A prior predicts the noise component of a noisy image ``x_t`` at timestep
``t`` given the cumulative signal fraction ``alpha_bar``. The stationary
Gaussian model here is diagonal in the centered unitary Fourier basis, so
its posterior statistics have closed forms — which makes every downstream
sampler and tuner decision checkable against exact numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ConfigError
from .mri import fft2c, ifft2c
from .rng import complex_normal

__all__ = [
    "Prior",
    "GaussianPrior",
    "ZeroPrior",
    "CountingPrior",
    "tweedie",
    "power_law_spectrum",
    "single_coil_mmse",
]


@runtime_checkable
class Prior(Protocol):
    def eps(self, x_t: np.ndarray, t: int, alpha_bar: float) -> np.ndarray:
        """Predicted noise for a noisy image at timestep t."""
        ...


def tweedie(x_t: np.ndarray, eps_hat: np.ndarray, alpha_bar: float) -> np.ndarray:
    """Posterior-mean estimate of the clean image from a noise prediction."""
    if not 0.0 < alpha_bar <= 1.0:
        raise ConfigError(f"alpha_bar must lie in (0, 1], got {alpha_bar}")
    return (x_t - np.sqrt(1.0 - alpha_bar) * eps_hat) / np.sqrt(alpha_bar)


def noise_from_estimate(x_t: np.ndarray, x0_hat: np.ndarray, alpha_bar: float) -> np.ndarray:
    """Inverse of :func:`tweedie`: the noise implied by a clean estimate."""
    if alpha_bar >= 1.0:
        raise ConfigError("no noise component at alpha_bar = 1")
    return (x_t - np.sqrt(alpha_bar) * x0_hat) / np.sqrt(1.0 - alpha_bar)


class GaussianPrior:
    """Stationary complex Gaussian image model, diagonal in Fourier space.

    The covariance is ``F^H diag(spectrum) F`` with F the centered unitary
    2-D DFT, so conditioning on a noisy observation reduces to a scalar
    Wiener filter per Fourier mode. The noise prediction is

        eps(x_t) = sqrt(1 - abar) * (abar * Sigma + (1 - abar) I)^{-1} (x_t - sqrt(abar) mu)

    evaluated mode-wise. ``spectrum`` entries may be zero (deterministic
    modes); the filter stays finite for abar < 1.
    """

    def __init__(self, mean: np.ndarray, spectrum: np.ndarray):
        mean = np.asarray(mean, dtype=np.complex128)
        spectrum = np.asarray(spectrum, dtype=np.float64)
        if mean.ndim != 2 or spectrum.shape != mean.shape:
            raise ConfigError("mean and spectrum must be 2-D arrays of one shape")
        if (spectrum < 0).any():
            raise ConfigError("spectrum must be elementwise >= 0")
        self.mean = mean
        self.spectrum = spectrum
        self._mean_f = fft2c(mean)

    @property
    def shape(self):
        return self.mean.shape

    def eps(self, x_t: np.ndarray, t: int, alpha_bar: float) -> np.ndarray:
        if not 0.0 < alpha_bar < 1.0:
            raise ConfigError(f"alpha_bar must lie in (0, 1), got {alpha_bar}")
        gain = 1.0 / (alpha_bar * self.spectrum + (1.0 - alpha_bar))
        centered = fft2c(x_t) - np.sqrt(alpha_bar) * self._mean_f
        return np.sqrt(1.0 - alpha_bar) * ifft2c(gain * centered)

    def x0_jacobian_apply(self, v: np.ndarray, alpha_bar: float) -> np.ndarray:
        """Apply d(x0_hat)/d(x_t) to a tangent image.

        The posterior mean is affine in x_t, so the Jacobian is exact: a
        real diagonal gain in Fourier space, hence Hermitian — the same
        routine serves for the adjoint.
        """
        gain = np.sqrt(alpha_bar) * self.spectrum / (
            alpha_bar * self.spectrum + (1.0 - alpha_bar))
        return ifft2c(gain * fft2c(v))

    def posterior_mode_variance(self, alpha_bar: float) -> np.ndarray:
        """Per-mode variance of x0 given x_t."""
        return self.spectrum * (1.0 - alpha_bar) / (
            alpha_bar * self.spectrum + (1.0 - alpha_bar))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Draw an image from the model."""
        noise_f = complex_normal(rng, self.shape)
        return self.mean + ifft2c(np.sqrt(self.spectrum) * noise_f)


class ZeroPrior:
    """Predicts no noise anywhere; the clean estimate is x_t / sqrt(abar).

    Mainly a reference point for conformance tests of external priors.
    """

    def eps(self, x_t: np.ndarray, t: int, alpha_bar: float) -> np.ndarray:
        return np.zeros_like(x_t)


class CountingPrior:
    """Delegating wrapper that counts noise-prediction calls."""

    def __init__(self, inner: Prior):
        self.inner = inner
        self.calls = 0

    def eps(self, x_t: np.ndarray, t: int, alpha_bar: float) -> np.ndarray:
        self.calls += 1
        return self.inner.eps(x_t, t, alpha_bar)


def power_law_spectrum(height: int, width: int, corner: float = 0.05,
                       power: float = 2.0, total: float | None = None) -> np.ndarray:
    """Isotropic low-pass power spectrum over the centered frequency grid.

    ``corner`` is the half-power radius in cycles/pixel; ``total``
    optionally rescales so the spectrum sums to a given total variance.
    """
    if corner <= 0 or power <= 0:
        raise ConfigError("corner and power must be positive")
    fy = (np.arange(height) - height // 2) / height
    fx = (np.arange(width) - width // 2) / width
    rho = np.hypot(fy[:, None], fx[None, :])
    s = 1.0 / (1.0 + (rho / corner) ** 2) ** power
    if total is not None:
        s *= total / s.sum()
    return s


def single_coil_mmse(prior: GaussianPrior, mask_bool: np.ndarray,
                     noise_std: float) -> float:
    """Exact Bayes risk for single-coil masked Fourier measurements.

    With unit sensitivity the measurement of each Fourier mode is either
    absent or the mode itself plus complex noise of variance
    ``noise_std**2``, independent across modes, so posterior precisions
    add: 1/s from the model and m/noise_std**2 from the data. Returns the
    total expected squared error summed over all pixels.
    """
    if noise_std <= 0:
        raise ConfigError("noise_std must be positive for a finite data term")
    m = np.broadcast_to(np.asarray(mask_bool, dtype=float), prior.spectrum.shape)
    s = prior.spectrum
    with np.errstate(divide="ignore"):
        precision = m / noise_std**2 + np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), np.inf)
    return float(np.where(s > 0, 1.0 / precision, 0.0).sum())
