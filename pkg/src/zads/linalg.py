"""Conjugate gradients on the regularized normal equations.

The data-consistency step solves ``(E^H E + zeta I) x = E^H y + zeta x0``
for a complex image x. The system operator is Hermitian positive definite
on the complex Hilbert space with inner product Re<a, b> = Re(sum conj(a) b),
so textbook CG applies once the scalar ratios are taken through Re().
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CgBreakdownError, ConfigError
from .mri import EncodingOperator

__all__ = [
    "CgConfig",
    "CgResult",
    "cg_solve",
    "data_consistency_step",
    "cg_solution_derivative",
    "materialize_normal_matrix",
    "dense_normal_solve",
]

DENSE_PIXEL_LIMIT = 4096


def _inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(a, b)))


@dataclass(frozen=True)
class CgConfig:
    """Iteration budget and relative-residual stopping rule.

    ``tol=0`` disables early stopping, so the solver always spends the
    full budget; this keeps iterate sequences reproducible across runs
    and platforms.
    """

    max_iter: int = 15
    tol: float = 0.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0:
            raise ConfigError(f"tol must be >= 0, got {self.tol}")


@dataclass
class CgResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    residual_history: list = field(default_factory=list)


def cg_solve(apply_a, b: np.ndarray, x0: np.ndarray, config: CgConfig,
             callback=None) -> CgResult:
    """Minimize the quadratic form of a Hermitian PD operator.

    ``apply_a`` maps an array to A @ x with the same shape. Starting from
    ``x0``, each iteration can only decrease the A-norm error, so any
    quadratic objective whose minimizer is the solution is non-increasing
    along the iterates. ``callback(x)`` runs on the start point and after
    every update.
    """
    x = x0.copy()
    r = b - apply_a(x)
    p = r.copy()
    rr = _inner(r, r)
    norm_b = float(np.linalg.norm(b))
    history = [float(np.sqrt(rr))]
    if callback is not None:
        callback(x)

    iterations = 0
    for k in range(config.max_iter):
        if np.sqrt(rr) <= config.tol * norm_b or rr == 0.0:
            break
        ap = apply_a(p)
        pap = _inner(p, ap)
        if not np.isfinite(pap) or pap <= 0.0:
            raise CgBreakdownError(
                f"curvature {pap!r} is not positive; the operator is not "
                "positive definite or has overflowed", iteration=k)
        step = rr / pap
        x += step * p
        r -= step * ap
        rr_next = _inner(r, r)
        p = r + (rr_next / rr) * p
        rr = rr_next
        iterations = k + 1
        history.append(float(np.sqrt(rr)))
        if callback is not None:
            callback(x)
        if not np.isfinite(rr):
            raise CgBreakdownError("residual overflowed", iteration=k)

    return CgResult(x=x, iterations=iterations,
                    residual_norm=float(np.sqrt(rr)),
                    residual_history=history)


def make_normal_operator(op: EncodingOperator, zeta: float):
    """Callable for ``(E^H E + zeta I) x``."""
    if zeta < 0:
        raise ConfigError(f"zeta must be >= 0, got {zeta}")

    def apply_a(x):
        return op.normal(x) + zeta * x

    return apply_a


def data_consistency_step(op: EncodingOperator, y: np.ndarray, x0_hat: np.ndarray,
                          zeta: float, config: CgConfig, callback=None) -> CgResult:
    """Pull a prior estimate toward the measurements.

    Warm-starts at ``x0_hat`` itself, so with a zero iteration budget the
    output is the input and the measured residual can only shrink from
    there.
    """
    b = op.adjoint(y) + zeta * x0_hat
    return cg_solve(make_normal_operator(op, zeta), b, x0_hat, config,
                    callback=callback)


def cg_solution_derivative(apply_a, x_solution: np.ndarray, x0_hat: np.ndarray,
                           config: CgConfig) -> np.ndarray:
    """Sensitivity of the exact solution to the coupling weight.

    Differentiating ``(E^H E + zeta I) x = E^H y + zeta x0`` in zeta gives
    ``dx/dzeta = (E^H E + zeta I)^{-1} (x0 - x)``, evaluated here with a
    fresh CG solve against the same operator. Meaningful when the solve
    that produced ``x_solution`` was run to convergence.
    """
    rhs = x0_hat - x_solution
    return cg_solve(apply_a, rhs, np.zeros_like(rhs), config).x


def materialize_normal_matrix(op: EncodingOperator, zeta: float) -> np.ndarray:
    """Dense ``E^H E + zeta I`` over flattened pixels; small grids only."""
    _, height, width = op.sens.shape
    n = height * width
    if n > DENSE_PIXEL_LIMIT:
        raise ConfigError(f"refusing to materialize a {n}x{n} matrix")
    mat = np.empty((n, n), dtype=np.complex128)
    basis = np.zeros((height, width), dtype=np.complex128)
    for j in range(n):
        basis.flat[j] = 1.0
        mat[:, j] = (op.normal(basis) + zeta * basis).ravel()
        basis.flat[j] = 0.0
    return mat


def dense_normal_solve(op: EncodingOperator, y: np.ndarray, x0_hat: np.ndarray,
                       zeta: float) -> np.ndarray:
    """Direct reference solution of the data-consistency system."""
    _, height, width = op.sens.shape
    mat = materialize_normal_matrix(op, zeta)
    b = (op.adjoint(y) + zeta * x0_hat).ravel()
    return np.linalg.solve(mat, b).reshape(height, width)
