"""Noise schedules and reverse-time step subsequences.

A schedule holds the per-timestep variance increments ``beta`` and the
cumulative signal fractions ``alpha_bar`` for timesteps 1..T (stored
0-indexed, so ``alpha_bar[0]`` belongs to t=1). Samplers walk a strictly
increasing subsequence ``tau`` of 1..T from its last entry down to its
first; the virtual timestep 0 denotes clean data, with ``alpha_bar`` = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(eq=False)
class NoiseSchedule:
    """DDPM-style variance schedule of length T."""

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def t_total(self) -> int:
        return int(self.beta.size)

    def abar(self, t: int) -> float:
        """Cumulative signal fraction at timestep t, with abar(0) = 1."""
        if t == 0:
            return 1.0
        if not 1 <= t <= self.t_total:
            raise ConfigError(f"timestep {t} outside [0, {self.t_total}]")
        return float(self.alpha_bar[t - 1])


def make_linear_schedule(t_total: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linearly spaced beta between the given endpoints."""
    if t_total < 1:
        raise ConfigError(f"schedule length must be >= 1, got {t_total}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    beta = np.linspace(beta_start, beta_end, t_total)
    alpha = 1.0 - beta
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=np.cumprod(alpha))


def make_uniform_sequence(t_total: int, steps: int) -> np.ndarray:
    """``steps`` indices evenly spaced over [1, T], endpoints included.

    Spacing of at least one index guarantees the rounded sequence is
    strictly increasing. A single step collapses to {T}.
    """
    if not 1 <= steps <= t_total:
        raise ConfigError(f"step count must lie in [1, {t_total}], got {steps}")
    if steps == 1:
        return np.array([t_total], dtype=np.int64)
    return np.rint(np.linspace(1, t_total, steps)).astype(np.int64)


def make_banded_sequence(t_total: int, bands) -> np.ndarray:
    """Steps placed uniformly inside fraction bands of [1, T].

    ``bands`` is a sequence of ``(hi_fraction, count)`` pairs; each band
    covers timesteps from the previous band's end (exclusive) to
    ``hi_fraction * T`` (inclusive), and the last band must end at 1.0.
    Putting the largest count in the lowest band concentrates computation
    where high-frequency detail is recovered, e.g. a 25-step sequence
    with counts (17, 5, 3) over fractions (0.1, 0.5, 1.0).
    """
    bands = list(bands)
    if not bands:
        raise ConfigError("at least one band is required")
    if abs(bands[-1][0] - 1.0) > 1e-12:
        raise ConfigError(f"bands must end at fraction 1.0, got {bands[-1][0]}")
    pieces = []
    lo_idx = 1
    prev_hi = 0.0
    for hi, count in bands:
        if not prev_hi < hi <= 1.0:
            raise ConfigError(f"band fractions must increase within (0, 1], got {hi}")
        if count < 1:
            raise ConfigError("every band needs at least one step")
        hi_idx = int(np.floor(hi * t_total))
        if hi_idx < lo_idx:
            raise ConfigError(f"band ending at {hi} contains no timesteps")
        width = hi_idx - lo_idx + 1
        if count > width:
            raise ConfigError(f"band ending at {hi} has {width} timesteps for {count} steps")
        if count == 1:
            pieces.append(np.array([hi_idx], dtype=np.int64))
        else:
            pieces.append(np.rint(np.linspace(lo_idx, hi_idx, count)).astype(np.int64))
        lo_idx = hi_idx + 1
        prev_hi = hi
    return np.concatenate(pieces)


def scale_band_counts(counts, steps: int) -> list[int]:
    """Rescale band counts to a new total, largest-remainder rounding."""
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0 or steps < counts.size:
        raise ConfigError("need at least one step per band")
    exact = counts / counts.sum() * steps
    floor = np.maximum(np.floor(exact).astype(int), 1)
    while floor.sum() > steps:
        over = floor - exact
        over[floor <= 1] = -np.inf  # every band keeps at least one step
        floor[np.argmax(over)] -= 1
    remainder = exact - floor
    for _ in range(steps - floor.sum()):
        k = int(np.argmax(remainder))
        floor[k] += 1
        remainder[k] = -np.inf
    return [int(v) for v in floor]


def validate_sequence(tau: np.ndarray, t_total: int):
    """Reject sequences that are not strictly increasing within [1, T]."""
    tau = np.asarray(tau)
    if tau.size == 0:
        raise ConfigError("step sequence is empty")
    if tau[0] < 1 or tau[-1] > t_total:
        raise ConfigError(f"sequence indices must lie in [1, {t_total}]")
    if not (np.diff(tau) > 0).all():
        raise ConfigError("sequence indices must be strictly increasing")


def sigma(sched: NoiseSchedule, tau_i: int, tau_prev: int, eta: float) -> float:
    """Stochasticity coefficient of the reverse step from tau_i to tau_prev.

    Zero when ``eta`` is zero and at the final step (tau_prev = 0, where
    the clean-data convention ``abar(0) = 1`` collapses the noise).
    """
    if tau_prev >= tau_i:
        raise ConfigError(f"need tau_prev < tau_i, got {tau_prev} >= {tau_i}")
    if not 0.0 <= eta <= 1.0:
        raise ConfigError(f"eta must lie in [0, 1], got {eta}")
    abar_i = sched.abar(tau_i)
    abar_p = sched.abar(tau_prev)
    return eta * np.sqrt((1.0 - abar_p) / (1.0 - abar_i) * (1.0 - abar_i / abar_p))
