"""Multi-coil Fourier encoding, undersampling masks, and a synthetic scanner.

The encoding operator is the composition ``mask * FFT2 * coil-weighting``
acting on a complex H x W image. The FFT is the unitary, centered 2-D
transform so that the operator norm is at most one whenever the coil maps
are pixelwise normalized; this keeps conjugate-gradient conditioning
independent of the sampling pattern.

Undersampling is 1-D along phase-encode columns: a mask is the set of
sampled column indices, built from an equispaced stride plus a fully
sampled central auto-calibration (ACS) block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .rng import TAG_COILS, TAG_PHANTOM, TAG_SIM_NOISE, complex_normal, rng_for


def fft2c(x: np.ndarray) -> np.ndarray:
    """Unitary 2-D FFT with centered (fftshift) spectrum, last two axes."""
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(x, axes=axes), axes=axes, norm="ortho"), axes=axes
    )


def ifft2c(y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c`."""
    axes = (-2, -1)
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(y, axes=axes), axes=axes, norm="ortho"), axes=axes
    )


@dataclass(eq=False)
class SamplingMask:
    """Set of sampled phase-encode columns of a width-W k-space.

    ``acs_lines`` marks the subset belonging to the fully sampled central
    calibration block; derived masks (e.g. SSDU subsets) carry it along so
    downstream code can keep calibration data in the consistency set.
    """

    width: int
    lines: np.ndarray
    acs_lines: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        self.lines = np.unique(np.asarray(self.lines, dtype=np.int64))
        self.acs_lines = np.unique(np.asarray(self.acs_lines, dtype=np.int64))
        if self.lines.size == 0:
            raise ConfigError("sampling mask must contain at least one line")
        if self.lines[0] < 0 or self.lines[-1] >= self.width:
            raise ConfigError(
                f"mask lines must lie in [0, {self.width}), got "
                f"[{self.lines[0]}, {self.lines[-1]}]"
            )
        if not np.isin(self.acs_lines, self.lines).all():
            raise ConfigError("ACS lines must be a subset of the sampled lines")

    @property
    def n_lines(self) -> int:
        return int(self.lines.size)

    def as_bool(self) -> np.ndarray:
        """Boolean column selector of shape (width,)."""
        m = np.zeros(self.width, dtype=bool)
        m[self.lines] = True
        return m

    def subset(self, lines: np.ndarray) -> "SamplingMask":
        """Mask over the same width restricted to the given lines."""
        lines = np.asarray(lines, dtype=np.int64)
        if not np.isin(lines, self.lines).all():
            raise ConfigError("subset lines must all be sampled in the parent mask")
        keep_acs = self.acs_lines[np.isin(self.acs_lines, lines)]
        return SamplingMask(self.width, lines, keep_acs)


def make_equispaced_mask(width: int, r: int, acs: int) -> SamplingMask:
    """Equispaced columns with stride ``r`` plus ``acs`` central lines.

    The ACS block occupies columns ``width//2 - acs//2`` through
    ``width//2 - acs//2 + acs - 1``.
    """
    if r < 1 or r > width:
        raise ConfigError(f"acceleration factor must satisfy 1 <= R <= width, got R={r}")
    if acs < 0 or acs > width:
        raise ConfigError(f"ACS line count must lie in [0, width], got {acs}")
    equispaced = np.arange(0, width, r, dtype=np.int64)
    start = width // 2 - acs // 2
    acs_lines = np.arange(start, start + acs, dtype=np.int64)
    lines = np.union1d(equispaced, acs_lines)
    return SamplingMask(width=width, lines=lines, acs_lines=acs_lines)


@dataclass(eq=False)
class MultiCoilKSpace:
    """C x H x W complex measurements paired with their sampling mask.

    Entries on unsampled columns are exactly zero by construction.
    """

    data: np.ndarray
    mask: SamplingMask

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise ConfigError(f"k-space data must be 3-D (coils, H, W), got {self.data.shape}")
        if self.data.shape[-1] != self.mask.width:
            raise ConfigError(
                f"k-space width {self.data.shape[-1]} does not match mask width {self.mask.width}"
            )
        unsampled = ~self.mask.as_bool()
        if self.data[..., unsampled].any():
            raise ConfigError("k-space carries nonzero data on unsampled columns")

    @property
    def coils(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def restrict_kspace(y: MultiCoilKSpace, mask: SamplingMask) -> MultiCoilKSpace:
    """Keep only the columns of ``mask``, zeroing the rest.

    Restricting to two disjoint masks splits the data exactly: the pieces
    sum back to the original and their energies add.
    """
    if not np.isin(mask.lines, y.mask.lines).all():
        raise ConfigError("restriction mask samples lines that were never acquired")
    return MultiCoilKSpace(y.data * mask.as_bool(), mask)


class EncodingOperator:
    """Forward/adjoint multi-coil encoding ``E = mask * FFT2 * coils``.

    Args:
        sens: coil sensitivities, complex array of shape (C, H, W),
            pixelwise normalized so the sum of squared magnitudes is 1.
        mask: sampling mask over the W columns.
    """

    def __init__(self, sens: np.ndarray, mask: SamplingMask):
        sens = np.asarray(sens, dtype=np.complex128)
        if sens.ndim != 3:
            raise ConfigError(f"coil maps must be 3-D (coils, H, W), got {sens.shape}")
        if sens.shape[-1] != mask.width:
            raise ConfigError(
                f"coil map width {sens.shape[-1]} does not match mask width {mask.width}"
            )
        self.sens = sens
        self.mask = mask
        self._col = mask.as_bool()

    @property
    def coils(self) -> int:
        return self.sens.shape[0]

    @property
    def height(self) -> int:
        return self.sens.shape[1]

    @property
    def width(self) -> int:
        return self.sens.shape[2]

    def with_mask(self, mask: SamplingMask) -> "EncodingOperator":
        """Same coil maps, different sampling pattern."""
        return EncodingOperator(self.sens, mask)

    def _check_image(self, x: np.ndarray):
        if x.shape != (self.height, self.width):
            raise ConfigError(f"image shape {x.shape} does not match {(self.height, self.width)}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Apply E: image (H, W) -> k-space (C, H, W), zero off-mask."""
        self._check_image(x)
        return fft2c(self.sens * x[None]) * self._col

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Apply E^H: k-space (C, H, W) -> image (H, W)."""
        if y.shape != self.sens.shape:
            raise ConfigError(f"k-space shape {y.shape} does not match {self.sens.shape}")
        return np.sum(np.conj(self.sens) * ifft2c(y * self._col), axis=0)

    def normal(self, x: np.ndarray) -> np.ndarray:
        """Apply E^H E in one pass (mask applied once; it is idempotent)."""
        self._check_image(x)
        k = fft2c(self.sens * x[None])
        k *= self._col
        return np.sum(np.conj(self.sens) * ifft2c(k), axis=0)


def apply_forward(op: EncodingOperator, x: np.ndarray) -> MultiCoilKSpace:
    """Encode an image into masked multi-coil k-space."""
    return MultiCoilKSpace(op.forward(np.asarray(x, dtype=np.complex128)), op.mask)


def apply_adjoint(op: EncodingOperator, y: MultiCoilKSpace) -> np.ndarray:
    """Adjoint-encode k-space back to a coil-combined image."""
    return op.adjoint(np.asarray(y.data, dtype=np.complex128))


# Ellipses as (value, semi-axis a, semi-axis b, x0, y0, angle in degrees) on
# the [-1, 1]^2 square; the additive values keep the sum in [0, 1].
_ELLIPSES = (
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)


def make_phantom(height: int, width: int, seed: int = 0) -> np.ndarray:
    """Piecewise-smooth ellipse phantom with low-order polynomial phase.

    Ellipse geometry is jittered per seed so different seeds give distinct
    but structurally similar objects. The magnitude is normalized to peak
    exactly 1; the background (including all four corners) is exactly 0.
    """
    if height < 16 or width < 16:
        raise ConfigError("phantom requires height and width of at least 16")
    rng = rng_for(seed, TAG_PHANTOM)
    ys = (np.arange(height) - height / 2.0) / (height / 2.0)
    xs = (np.arange(width) - width / 2.0) / (width / 2.0)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")

    mag = np.zeros((height, width))
    for value, a, b, x0, y0, ang in _ELLIPSES:
        a = a * (1.0 + 0.02 * rng.uniform(-1, 1))
        b = b * (1.0 + 0.02 * rng.uniform(-1, 1))
        x0 = x0 + 0.01 * rng.uniform(-1, 1)
        y0 = y0 + 0.01 * rng.uniform(-1, 1)
        value = value * (1.0 + 0.05 * rng.uniform(-1, 1)) if abs(value) < 1 else value
        phi = np.deg2rad(ang + 2.0 * rng.uniform(-1, 1))
        c, s = np.cos(phi), np.sin(phi)
        xr = c * (xx - x0) + s * (yy - y0)
        yr = -s * (xx - x0) + c * (yy - y0)
        mag += value * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    mag = np.clip(mag, 0.0, None)
    mag /= mag.max()

    coeffs = rng.uniform(-1, 1, size=6)
    phase = (
        0.5 * coeffs[0] * xx
        + 0.5 * coeffs[1] * yy
        + 0.3 * coeffs[2] * xx * yy
        + 0.3 * coeffs[3] * xx**2
        + 0.3 * coeffs[4] * yy**2
        + 0.2 * coeffs[5]
    )
    return mag * np.exp(1j * phase)


def make_coil_maps(height: int, width: int, coils: int, seed: int = 0) -> np.ndarray:
    """Complex Gaussian-bump coil profiles, pixelwise normalized.

    Bump centers sit at equiangular positions on the image border; each
    coil carries a smooth linear phase ramp. After normalization the sum
    of squared magnitudes is exactly 1 at every pixel.
    """
    if coils < 1:
        raise ConfigError(f"coil count must be >= 1, got {coils}")
    rng = rng_for(seed, TAG_COILS)
    ys = np.arange(height)[:, None]
    xs = np.arange(width)[None, :]
    radius = 0.55 * np.hypot(height, width) / 2.0
    sigma = 0.6 * min(height, width)
    angle0 = rng.uniform(0, 2 * np.pi)

    maps = np.empty((coils, height, width), dtype=np.complex128)
    for c in range(coils):
        theta = angle0 + 2 * np.pi * c / coils
        cy = height / 2.0 + radius * np.sin(theta)
        cx = width / 2.0 + radius * np.cos(theta)
        bump = np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * sigma**2))
        ramp = rng.uniform(-1.5, 1.5, size=2)
        phase = ramp[0] * (xs / width) + ramp[1] * (ys / height) + rng.uniform(0, 2 * np.pi)
        maps[c] = bump * np.exp(1j * phase)

    norm = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    maps /= norm[None]
    return maps


def simulate_kspace(
    op: EncodingOperator, x: np.ndarray, noise_std: float, seed: int = 0
) -> MultiCoilKSpace:
    """Acquire ``E x`` plus masked complex Gaussian noise.

    Noise entries are CN(0, noise_std**2) per sampled k-space sample;
    unsampled columns stay exactly zero. ``noise_std=0`` reproduces
    :func:`apply_forward` bit for bit.
    """
    if noise_std < 0:
        raise ConfigError(f"noise_std must be nonnegative, got {noise_std}")
    clean = op.forward(np.asarray(x, dtype=np.complex128))
    if noise_std == 0:
        return MultiCoilKSpace(clean, op.mask)
    noise = complex_normal(rng_for(seed, TAG_SIM_NOISE), clean.shape, std=noise_std)
    return MultiCoilKSpace(clean + noise * op.mask.as_bool(), op.mask)
