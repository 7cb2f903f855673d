"""Test-time tuning of per-step data-coupling weights.

The weights of the proximal sampler are optimized in log space against a
held-out consistency loss: a fraction of the acquired k-space columns is
withheld from data consistency and the reconstruction is scored on how
well it predicts them. Gradients come either from finite differences under
common random numbers, or from unrolling the sampler analytically with the
per-step noise predictions frozen — the stop-gradient convention for a
denoiser one cannot differentiate through.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, UndefinedLossError
from .linalg import CgConfig, cg_solve, make_normal_operator
from .mri import EncodingOperator, MultiCoilKSpace, restrict_kspace
from .priors import Prior
from .rng import TAG_BANK, TAG_XT, complex_normal, rng_for
from .samplers import (FrozenNoise, PassResult, SamplerConfig, StepRecord,
                       zads_forward)
from .ssdu import MaskSplit, split_mask

__all__ = [
    "TunerConfig",
    "TuneProblem",
    "TuneReport",
    "holdout_loss",
    "holdout_loss_grad",
    "fd_gradient",
    "replay_analytic_gradient",
    "make_epoch_bank",
    "tune",
]

GRAD_MODES = ("replay-analytic", "finite-difference")
OPTIMIZERS = ("gradient-descent", "adam-like")


@dataclass(frozen=True)
class TunerConfig:
    """Epoch loop and optimizer settings.

    ``learning_rate = 0`` is allowed as a degenerate setting (weights
    stay fixed); useful for isolating the stochastic part of the loop.
    """

    epochs: int = 10
    learning_rate: float = 0.1
    grad_mode: str = "replay-analytic"
    fd_step: float = 1e-3
    optimizer: str = "gradient-descent"
    init_zeta: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    resplit_per_epoch: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.fd_step <= 0:
            raise ConfigError(f"fd_step must be > 0, got {self.fd_step}")
        if self.init_zeta <= 0:
            raise ConfigError(f"init_zeta must be > 0, got {self.init_zeta}")
        if self.grad_mode not in GRAD_MODES:
            raise ConfigError(f"grad_mode must be one of {GRAD_MODES}, got {self.grad_mode!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")


@dataclass
class TuneProblem:
    """One reconstruction task: measurements, operator, split, prior."""

    op: EncodingOperator
    y: MultiCoilKSpace
    split: MaskSplit
    prior: Prior


@dataclass
class TuneReport:
    """Per-epoch history plus the final weights and reconstruction.

    ``zetas[e]`` are the weights the e-th epoch ran with (so they pair
    with ``losses[e]``); ``final_weights`` include the last update. The
    final reconstruction replays the last epoch's recorded pass at the
    final weights, which costs no further noise-prediction calls.
    """

    losses: np.ndarray
    zetas: np.ndarray
    grad_norms: np.ndarray
    final_weights: np.ndarray
    final_x0: np.ndarray
    final_loss: float
    nfe: int


def holdout_loss(op_loss: EncodingOperator, y_loss: MultiCoilKSpace,
                 x0: np.ndarray) -> float:
    """Normalized l1 + l2 misfit on the held-out columns.

    The l1 norm of complex data is the sum of moduli. Both terms are
    scaled by the corresponding norm of the held-out data, so a zero
    reconstruction scores exactly 2.
    """
    ref_l1 = float(np.abs(y_loss.data).sum())
    ref_l2 = float(np.linalg.norm(y_loss.data))
    if ref_l1 == 0.0 or ref_l2 == 0.0:
        raise UndefinedLossError("held-out measurements are identically zero")
    r = y_loss.data - op_loss.forward(x0)
    return float(np.abs(r).sum()) / ref_l1 + float(np.linalg.norm(r)) / ref_l2


def holdout_loss_grad(op_loss: EncodingOperator, y_loss: MultiCoilKSpace,
                      x0: np.ndarray):
    """Loss value and its Wirtinger gradient with respect to ``x0``.

    The gradient g satisfies dL = Re<g, dx0>. The modulus is not
    differentiable at exact zeros of the residual; those entries get
    subgradient 0.
    """
    ref_l1 = float(np.abs(y_loss.data).sum())
    ref_l2 = float(np.linalg.norm(y_loss.data))
    if ref_l1 == 0.0 or ref_l2 == 0.0:
        raise UndefinedLossError("held-out measurements are identically zero")
    r = y_loss.data - op_loss.forward(x0)
    mod = np.abs(r)
    res_l1 = float(mod.sum())
    res_l2 = float(np.linalg.norm(r))
    loss = res_l1 / ref_l1 + res_l2 / ref_l2
    phase = np.zeros_like(r)
    nz = mod > 0
    phase[nz] = r[nz] / mod[nz]
    back = phase / ref_l1
    if res_l2 > 0:
        back = back + r / (res_l2 * ref_l2)
    return loss, -op_loss.adjoint(back)


def make_epoch_bank(shape, cfg: SamplerConfig, seed: int, epoch: int,
                    x_init: np.ndarray) -> FrozenNoise:
    """Renoising draws for one epoch, addressable by (seed, epoch, step).

    The initial iterate is shared across epochs; only the per-step draws
    change, and each is generated from its own tagged stream so probes at
    different weights see identical noise.
    """
    from .schedules import sigma as sigma_coeff

    taus = np.asarray(cfg.sequence)[::-1]
    bank = FrozenNoise(x_init=x_init)
    for k, tau in enumerate(taus):
        tau_prev = int(taus[k + 1]) if k + 1 < taus.size else 0
        sig = sigma_coeff(cfg.sched, int(tau), tau_prev, cfg.eta)
        bank.eps.append(None)
        z = None
        if sig > 0:
            z = complex_normal(rng_for(seed, TAG_BANK, epoch, k), shape)
        bank.z.append(z)
    return bank


def _loss_parts(problem: TuneProblem):
    op_loss = problem.op.with_mask(problem.split.loss_mask)
    y_loss = restrict_kspace(problem.y, problem.split.loss_mask)
    return op_loss, y_loss


def fd_gradient(problem: TuneProblem, weights: np.ndarray, cfg: SamplerConfig,
                frozen: FrozenNoise, *, fd_step: float = 1e-3,
                live_prior: bool = False) -> np.ndarray:
    """Central-difference gradient of the held-out loss in log-weight space.

    Every probe replays the same frozen draws, so the loss is a
    deterministic function of the weights and the differences measure
    only the weight effect. With ``live_prior`` the probes re-query the
    prior at the perturbed iterates (the gradient of the true sampler);
    otherwise the frozen noise predictions are reused (the gradient of
    the replayed sampler, comparable to the analytic unrolling).
    """
    weights = np.asarray(weights, dtype=np.float64)
    op_loss, y_loss = _loss_parts(problem)
    prior = problem.prior if live_prior else None
    if not live_prior and (not frozen.eps or frozen.eps[0] is None):
        raise ConfigError("replay gradient needs recorded noise predictions")
    log_w = np.log(weights)
    grad = np.empty_like(weights)
    for j in range(weights.size):
        probes = []
        for sign in (+1.0, -1.0):
            shifted = log_w.copy()
            shifted[j] += sign * fd_step
            out = zads_forward(problem.op, problem.y, problem.split,
                               np.exp(shifted), cfg, prior=prior, frozen=frozen)
            value = holdout_loss(op_loss, y_loss, out.x0)
            if not np.isfinite(value):
                raise NumericalError(
                    f"non-finite held-out loss at probe (step {j}, sign {sign:+.0f})")
            probes.append(value)
        grad[j] = (probes[0] - probes[1]) / (2.0 * fd_step)
    return grad


def replay_analytic_gradient(result: PassResult, problem: TuneProblem,
                             cg: CgConfig):
    """Gradient of the replayed pass by forward-mode tangent propagation.

    With the noise predictions frozen, every step is an affine map of the
    incoming iterate, so tangents obey: divide by sqrt(abar) (clean-image
    estimate), solve the regularized normal equations against the tangent
    scaled by the step's weight (refinement), multiply by sqrt(abar_prev)
    (renoising). The log-weight of step j seeds a tangent through that
    step's own refinement and rides the recursion to the end, where the
    held-out loss closes the chain. Costs S(S+1)/2 inner solves for S
    steps.

    Returns (loss, gradient). Accurate to the extent the recorded solves
    and the tangent solves are converged.
    """
    steps: list[StepRecord] = result.steps
    if not steps:
        raise ConfigError("pass was recorded without step records")
    op_dc = problem.op.with_mask(problem.split.dc_mask)
    tangents: list[np.ndarray] = []
    zero = np.zeros_like(result.x0)
    for rec in steps:
        apply_a = make_normal_operator(op_dc, rec.zeta)
        scale = np.sqrt(rec.abar_prev) * rec.zeta
        for i, u in enumerate(tangents):
            tangents[i] = scale * cg_solve(apply_a, u / np.sqrt(rec.abar),
                                           zero, cg).x
        seed_rhs = rec.x0_hat - rec.x0_refined
        tangents.append(scale * cg_solve(apply_a, seed_rhs, zero, cg).x)

    op_loss, y_loss = _loss_parts(problem)
    loss, g = holdout_loss_grad(op_loss, y_loss, result.x0)
    grad = np.array([float(np.real(np.vdot(g, u))) for u in tangents])
    return loss, grad


def tune(problem: TuneProblem, tcfg: TunerConfig, scfg: SamplerConfig,
         seed: int = 0) -> TuneReport:
    """Epoch loop: forward pass, held-out loss, gradient, weight update.

    The initial iterate is drawn once and shared by all epochs; each
    epoch redraws only the per-step renoising noise. The reported final
    reconstruction replays the last epoch's noise predictions under the
    weights after the last update, so the prior is queried exactly
    ``epochs * steps`` times.
    """
    n_steps = scfg.steps
    shape = (problem.op.height, problem.op.width)
    log_w = np.full(n_steps, np.log(tcfg.init_zeta))
    x_init = complex_normal(rng_for(seed, TAG_XT), shape)

    losses = np.empty(tcfg.epochs)
    zetas = np.empty((tcfg.epochs, n_steps))
    grad_norms = np.empty(tcfg.epochs)
    nfe = 0
    m = np.zeros(n_steps)
    v = np.zeros(n_steps)

    split = problem.split
    op_loss, y_loss = _loss_parts(problem)
    last_result = None
    for epoch in range(tcfg.epochs):
        if tcfg.resplit_per_epoch and epoch > 0:
            if split.rho is None or split.seed is None:
                raise ConfigError("per-epoch resplitting needs a drawn split")
            split = split_mask(problem.op.mask, split.rho, split.seed, epoch)
            problem = TuneProblem(problem.op, problem.y, split, problem.prior)
            op_loss, y_loss = _loss_parts(problem)
        bank = make_epoch_bank(shape, scfg, seed, epoch, x_init)
        weights = np.exp(log_w)
        result = zads_forward(problem.op, problem.y, split, weights, scfg,
                              prior=problem.prior, frozen=bank,
                              keep_steps=True)
        nfe += result.nfe
        last_result = result

        if tcfg.grad_mode == "replay-analytic":
            loss, grad = replay_analytic_gradient(result, problem, scfg.cg)
        else:
            loss = holdout_loss(op_loss, y_loss, result.x0)
            grad = fd_gradient(problem, weights, scfg, result.noise,
                               fd_step=tcfg.fd_step, live_prior=True)
            nfe += 2 * n_steps * n_steps

        losses[epoch] = loss
        zetas[epoch] = weights
        grad_norms[epoch] = float(np.linalg.norm(grad))

        if tcfg.optimizer == "adam-like":
            m = tcfg.beta1 * m + (1.0 - tcfg.beta1) * grad
            v = tcfg.beta2 * v + (1.0 - tcfg.beta2) * grad**2
            m_hat = m / (1.0 - tcfg.beta1 ** (epoch + 1))
            v_hat = v / (1.0 - tcfg.beta2 ** (epoch + 1))
            update = m_hat / (np.sqrt(v_hat) + tcfg.adam_eps)
        else:
            update = grad
        log_w = log_w - tcfg.learning_rate * update
        if not np.isfinite(log_w).all():
            raise NumericalError(f"weight update diverged at epoch {epoch}")

    final_weights = np.exp(log_w)
    final = zads_forward(problem.op, problem.y, split, final_weights, scfg,
                         frozen=last_result.noise)
    final_loss = holdout_loss(op_loss, y_loss, final.x0)
    return TuneReport(losses=losses, zetas=zetas, grad_norms=grad_norms,
                      final_weights=final_weights, final_x0=final.x0,
                      final_loss=final_loss, nfe=nfe)
