"""Reverse-diffusion solvers for masked multi-coil Fourier measurements.

All solvers walk a strictly increasing timestep subsequence backwards. Each
step predicts noise, forms the clean-image estimate, enforces data
consistency in one of two ways — a gradient nudge (posterior sampling) or
a conjugate-gradient proximal solve — and renoises to the previous
timestep. The proximal family accepts one coupling weight per step, which
is what the self-supervised tuner adjusts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .linalg import CgConfig, data_consistency_step
from .mri import EncodingOperator, MultiCoilKSpace, restrict_kspace
from .priors import Prior, tweedie
from .rng import TAG_XT, complex_normal, rng_for
from .schedules import NoiseSchedule, sigma as sigma_coeff, validate_sequence
from .ssdu import MaskSplit

__all__ = [
    "SamplerConfig",
    "ddim_step",
    "ddim_sample",
    "zero_filled",
    "dps_reconstruct",
    "dds_reconstruct",
    "FrozenNoise",
    "StepRecord",
    "PassResult",
    "draw_frozen_noise",
    "weighted_reverse_pass",
    "zads_forward",
]


@dataclass(frozen=True)
class SamplerConfig:
    """Shared knobs of every reverse pass: schedule, steps, stochasticity."""

    sched: NoiseSchedule
    sequence: np.ndarray
    eta: float = 0.85
    cg: CgConfig = field(default_factory=CgConfig)

    def __post_init__(self):
        validate_sequence(self.sequence, self.sched.t_total)
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")

    @property
    def steps(self) -> int:
        return len(self.sequence)


def ddim_step(x0_hat: np.ndarray, eps_hat: np.ndarray, abar_prev: float,
              sigma_val: float, z: np.ndarray | None = None) -> np.ndarray:
    """Renoise a clean estimate down to the previous timestep.

    The terminal step (abar_prev = 1, sigma = 0) returns ``x0_hat``
    itself — no arithmetic, so the collapse is exact.
    """
    if sigma_val < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma_val}")
    if abar_prev >= 1.0:
        if sigma_val != 0.0:
            raise ConfigError("terminal step must be deterministic")
        return x0_hat.copy()
    gap = 1.0 - abar_prev - sigma_val**2
    if gap < -1e-12:
        raise ConfigError(f"sigma={sigma_val} exceeds the noise budget at abar_prev={abar_prev}")
    out = np.sqrt(abar_prev) * x0_hat + np.sqrt(max(gap, 0.0)) * eps_hat
    if sigma_val > 0.0:
        if z is None:
            raise ConfigError("stochastic step needs a noise draw")
        out = out + sigma_val * z
    return out


def zero_filled(op: EncodingOperator, y: MultiCoilKSpace) -> np.ndarray:
    """Adjoint reconstruction; the standard no-prior baseline."""
    return op.adjoint(np.asarray(y.data, dtype=np.complex128))


def ddim_sample(prior: Prior, shape, sched: NoiseSchedule, sequence: np.ndarray,
                *, eta: float = 0.85, seed: int = 0,
                frozen: "FrozenNoise | None" = None) -> np.ndarray:
    """Unconditional reverse pass: no measurements, prior only.

    Draw order matches the measurement-conditioned samplers (initial
    iterate first, then one renoising draw per stochastic step), so a
    conditioned run whose data term is switched off reproduces this
    trajectory under the same seed.
    """
    validate_sequence(sequence, sched.t_total)
    rng = rng_for(seed, TAG_XT)
    if frozen is None:
        x = complex_normal(rng, shape)
    else:
        x = frozen.x_init.copy()
    for k, tau, tau_prev, abar, abar_prev in _walk(sequence, sched):
        eps_hat = prior.eps(x, tau, abar)
        x0_hat = tweedie(x, eps_hat, abar)
        sig = sigma_coeff(sched, tau, tau_prev, eta)
        z = None
        if sig > 0:
            z = frozen.z[k] if frozen is not None else complex_normal(rng, shape)
        x = ddim_step(x0_hat, eps_hat, abar_prev, sig, z)
    return x


def _walk(sequence: np.ndarray, sched: NoiseSchedule):
    """Yield (k, tau, tau_prev, abar, abar_prev) in processing order."""
    taus = np.asarray(sequence)[::-1]
    for k, tau in enumerate(taus):
        tau_prev = int(taus[k + 1]) if k + 1 < taus.size else 0
        yield k, int(tau), tau_prev, sched.abar(int(tau)), sched.abar(tau_prev)


def dps_reconstruct(op: EncodingOperator, y: MultiCoilKSpace, prior: Prior,
                    sched: NoiseSchedule, sequence: np.ndarray, *,
                    eta: float = 0.85, zeta: float = 1.0, seed: int = 0,
                    jacobian: str = "surrogate") -> np.ndarray:
    """Posterior sampling: DDIM plus a measurement-gradient nudge per step.

    The nudge is the Wirtinger gradient of ``|y - E x0_hat|_2^2`` with
    respect to the noisy iterate. ``jacobian="exact"`` uses the prior's own
    clean-estimate Jacobian (available for the analytic Gaussian model);
    ``"surrogate"`` approximates it by 1/sqrt(abar) times the identity,
    the usual choice when differentiating through the denoiser is off the
    table.
    """
    validate_sequence(sequence, sched.t_total)
    if jacobian not in ("exact", "surrogate"):
        raise ConfigError(f"unknown jacobian mode {jacobian!r}")
    if jacobian == "exact" and not hasattr(prior, "x0_jacobian_apply"):
        raise ConfigError("this prior does not expose an exact clean-estimate Jacobian")
    rng = rng_for(seed, TAG_XT)
    shape = (op.height, op.width)
    x = complex_normal(rng, shape)
    for _, tau, tau_prev, abar, abar_prev in _walk(sequence, sched):
        eps_hat = prior.eps(x, tau, abar)
        x0_hat = tweedie(x, eps_hat, abar)
        residual = y.data - op.forward(x0_hat)
        back = op.adjoint(residual)
        if jacobian == "exact":
            back = prior.x0_jacobian_apply(back, abar)
        else:
            back = back / np.sqrt(abar)
        grad = -2.0 * back
        sig = sigma_coeff(sched, tau, tau_prev, eta)
        z = complex_normal(rng, shape) if sig > 0 else None
        x = ddim_step(x0_hat, eps_hat, abar_prev, sig, z) - zeta * grad
    return x


@dataclass
class FrozenNoise:
    """Every stochastic input of one reverse pass, in processing order.

    Replaying a pass with the same frozen inputs but different coupling
    weights makes the map weights -> holdout loss deterministic, which is
    what lets finite differences and the unrolled analytic gradient agree.
    """

    x_init: np.ndarray
    eps: list = field(default_factory=list)
    z: list = field(default_factory=list)

    def step_count(self) -> int:
        return len(self.eps)


@dataclass
class StepRecord:
    """Intermediate arrays of one reverse step at the weights used."""

    tau: int
    tau_prev: int
    abar: float
    abar_prev: float
    sigma: float
    zeta: float
    x_in: np.ndarray
    eps: np.ndarray
    x0_hat: np.ndarray
    x0_refined: np.ndarray


@dataclass
class PassResult:
    x0: np.ndarray
    steps: list
    noise: FrozenNoise
    nfe: int


def draw_frozen_noise(shape, sched: NoiseSchedule, sequence: np.ndarray,
                      eta: float, rng: np.random.Generator) -> FrozenNoise:
    """Pre-draw the initial iterate and per-step renoising draws.

    Noise-prediction slots are left empty (None): a live pass fills them,
    a replay requires them.
    """
    frozen = FrozenNoise(x_init=complex_normal(rng, shape))
    for _, tau, tau_prev, _, _ in _walk(sequence, sched):
        sig = sigma_coeff(sched, tau, tau_prev, eta)
        frozen.eps.append(None)
        frozen.z.append(complex_normal(rng, shape) if sig > 0 else None)
    return frozen


def weighted_reverse_pass(op_dc: EncodingOperator, y_dc: MultiCoilKSpace,
                          sched: NoiseSchedule, sequence: np.ndarray,
                          weights: np.ndarray, *, eta: float = 0.85,
                          cg: CgConfig = CgConfig(),
                          prior: Prior | None = None,
                          frozen: FrozenNoise | None = None,
                          keep_steps: bool = False) -> PassResult:
    """Proximal reverse pass with one data-coupling weight per step.

    Each step refines the clean estimate by solving
    ``(E^H E + zeta_k I) x = E^H y + zeta_k x0_hat`` with CG warm-started
    at the estimate, then renoises with the *original* noise prediction.
    ``weights[k]`` applies to the k-th step in processing order (largest
    timestep first).

    A given ``prior`` drives the pass live (noise predictions recorded
    into the returned bank); without one, ``frozen`` must carry recorded
    noise predictions and the pass replays them. Frozen renoising draws
    always take precedence over fresh ones, enabling common-random-number
    comparisons across weight settings.
    """
    validate_sequence(sequence, sched.t_total)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(sequence),):
        raise ConfigError(f"need one weight per step, got shape {weights.shape}")
    if (weights <= 0).any():
        raise ConfigError("coupling weights must be positive")
    replay = prior is None
    if replay and (frozen is None or not frozen.eps or frozen.eps[0] is None):
        raise ConfigError("need a prior or a frozen pass with noise predictions")

    shape = (op_dc.height, op_dc.width)
    if frozen is None:
        frozen = FrozenNoise(x_init=complex_normal(rng_for(0, TAG_XT), shape))
        frozen.eps = [None] * len(sequence)
        frozen.z = [None] * len(sequence)
    if frozen.step_count() != len(sequence):
        raise ConfigError("frozen pass length does not match the step sequence")

    out_noise = FrozenNoise(x_init=frozen.x_init, eps=list(frozen.eps),
                            z=list(frozen.z))
    x = frozen.x_init.copy()
    steps: list[StepRecord] = []
    nfe = 0
    for k, tau, tau_prev, abar, abar_prev in _walk(sequence, sched):
        if replay:
            eps_hat = frozen.eps[k]
        else:
            eps_hat = prior.eps(x, tau, abar)
            nfe += 1
            out_noise.eps[k] = eps_hat
        x0_hat = tweedie(x, eps_hat, abar)
        refined = data_consistency_step(op_dc, y_dc.data, x0_hat,
                                        float(weights[k]), cg).x
        sig = sigma_coeff(sched, tau, tau_prev, eta)
        z = None
        if sig > 0:
            z = out_noise.z[k]
            if z is None:
                raise ConfigError(f"step {k} needs a renoising draw (sigma > 0)")
        if keep_steps:
            steps.append(StepRecord(tau=tau, tau_prev=tau_prev, abar=abar,
                                    abar_prev=abar_prev, sigma=sig,
                                    zeta=float(weights[k]), x_in=x,
                                    eps=eps_hat, x0_hat=x0_hat,
                                    x0_refined=refined))
        x = ddim_step(refined, eps_hat, abar_prev, sig, z)
    return PassResult(x0=x, steps=steps, noise=out_noise, nfe=nfe)


def dds_reconstruct(op: EncodingOperator, y: MultiCoilKSpace, prior: Prior,
                    sched: NoiseSchedule, sequence: np.ndarray, *,
                    eta: float = 0.85, zeta: float = 1.0,
                    cg: CgConfig = CgConfig(), seed: int = 0) -> np.ndarray:
    """Decomposed sampling: proximal data consistency with one fixed weight."""
    validate_sequence(sequence, sched.t_total)
    rng = rng_for(seed, TAG_XT)
    frozen = draw_frozen_noise((op.height, op.width), sched, sequence, eta, rng)
    weights = np.full(len(sequence), float(zeta))
    return weighted_reverse_pass(op, y, sched, sequence, weights, eta=eta,
                                 cg=cg, prior=prior, frozen=frozen).x0


def zads_forward(op: EncodingOperator, y: MultiCoilKSpace, split: MaskSplit,
                 weights: np.ndarray, cfg: SamplerConfig, *,
                 prior: Prior | None = None,
                 frozen: FrozenNoise | None = None,
                 keep_steps: bool = False) -> PassResult:
    """Weighted reverse pass with data consistency restricted to the
    training half of a held-out split.

    The held-out columns are never touched: the pass sees only the
    restricted operator and the restricted measurements, so its output is
    invariant to arbitrary data on held-out-only columns.
    """
    op_dc = op.with_mask(split.dc_mask)
    y_dc = restrict_kspace(y, split.dc_mask)
    return weighted_reverse_pass(op_dc, y_dc, cfg.sched, cfg.sequence,
                                 weights, eta=cfg.eta, cg=cfg.cg, prior=prior,
                                 frozen=frozen, keep_steps=keep_steps)
