import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import random_image
from zads.errors import CgBreakdownError, ConfigError
from zads.linalg import (CgConfig, cg_solution_derivative, cg_solve,
                         data_consistency_step, dense_normal_solve,
                         make_normal_operator, materialize_normal_matrix)
from zads.mri import (EncodingOperator, make_coil_maps, make_equispaced_mask,
                      simulate_kspace)


def _fixture8(zeta_noise=0.05, seed=9):
    coils = make_coil_maps(8, 8, 1, seed=3)
    mask = make_equispaced_mask(8, 2, 2)
    op = EncodingOperator(coils, mask)
    truth = random_image((8, 8), seed=0)
    y = simulate_kspace(op, truth, zeta_noise, seed=seed).data
    x0_hat = random_image((8, 8), seed=1)
    return op, y, x0_hat


def test_cg_config_validation():
    with pytest.raises(ConfigError):
        CgConfig(max_iter=0)
    with pytest.raises(ConfigError):
        CgConfig(max_iter=5, tol=-1e-3)
    assert CgConfig().max_iter == 15
    assert CgConfig().tol == 0.0


def test_cg_identity_converges_in_one_iteration():
    b = random_image((8, 8), seed=2)
    res = cg_solve(lambda x: x, b, np.zeros_like(b), CgConfig(max_iter=10, tol=1e-15))
    assert res.iterations == 1
    assert_allclose(res.x, b, atol=1e-14)


def test_cg_matches_dense_across_zetas():
    op, y, x0_hat = _fixture8()
    for zeta in [0.03, 0.3, 3.0, 30.0]:
        dense = dense_normal_solve(op, y, x0_hat, zeta)
        res = data_consistency_step(op, y, x0_hat, zeta,
                                    CgConfig(max_iter=128, tol=0.0))
        rel = np.linalg.norm(res.x - dense) / np.linalg.norm(dense)
        assert rel <= 1e-8


def test_cg_objective_non_increasing():
    op, y, x0_hat = _fixture8()
    zeta = 0.5
    apply_a = make_normal_operator(op, zeta)
    b = op.adjoint(y) + zeta * x0_hat
    objs = []
    data_consistency_step(
        op, y, x0_hat, zeta, CgConfig(max_iter=60, tol=0.0),
        callback=lambda x: objs.append(
            0.5 * np.real(np.vdot(x, apply_a(x))) - np.real(np.vdot(b, x))))
    assert len(objs) >= 2
    diffs = np.diff(objs)
    assert np.all(diffs <= 1e-12 * np.maximum(1.0, np.abs(objs[:-1])))


def test_cg_warm_start_is_input():
    op, y, x0_hat = _fixture8()
    seen = []
    data_consistency_step(op, y, x0_hat, 1.0, CgConfig(max_iter=1),
                          callback=lambda x: seen.append(x.copy()))
    assert_allclose(seen[0], x0_hat, atol=0)


def test_cg_huge_zeta_returns_x0hat():
    op, y, x0_hat = _fixture8()
    res = data_consistency_step(op, y, x0_hat, 1e8, CgConfig(max_iter=64, tol=0.0))
    assert np.linalg.norm(res.x - x0_hat) / np.linalg.norm(x0_hat) <= 1e-6


def test_cg_breakdown_on_indefinite_operator():
    b = random_image((4, 4), seed=3)
    with pytest.raises(CgBreakdownError) as err:
        cg_solve(lambda x: -x, b, np.zeros_like(b), CgConfig(max_iter=5))
    assert err.value.iteration == 0


def test_cg_residual_history_tracks_norm():
    op, y, x0_hat = _fixture8()
    res = data_consistency_step(op, y, x0_hat, 0.5, CgConfig(max_iter=30, tol=0.0))
    assert len(res.residual_history) == res.iterations + 1
    assert res.residual_history[-1] == pytest.approx(res.residual_norm)


# --- dense reference solver -------------------------------------------------


def test_materialize_is_hermitian():
    op, _, _ = _fixture8()
    mat = materialize_normal_matrix(op, 0.7)
    assert_allclose(mat, mat.conj().T, atol=1e-13)
    eigs = np.linalg.eigvalsh(mat)
    assert eigs.min() >= 0.7 - 1e-10


def test_materialize_refuses_large_grids():
    coils = make_coil_maps(128, 128, 1, seed=0)
    op = EncodingOperator(coils, make_equispaced_mask(128, 2, 8))
    with pytest.raises(ConfigError):
        materialize_normal_matrix(op, 1.0)


def test_dense_full_mask_unit_coil_pixel_formula():
    coils = np.ones((1, 8, 8), np.complex128)
    op = EncodingOperator(coils, make_equispaced_mask(8, 1, 0))
    truth = random_image((8, 8), seed=4)
    y = simulate_kspace(op, truth, 0.0, seed=0).data
    x0_hat = random_image((8, 8), seed=5)
    zeta = 0.8
    want = (op.adjoint(y) + zeta * x0_hat) / (1 + zeta)
    assert_allclose(dense_normal_solve(op, y, x0_hat, zeta), want, atol=1e-12)


def test_dense_huge_zeta_limit():
    op, y, x0_hat = _fixture8()
    out = dense_normal_solve(op, y, x0_hat, 1e10)
    assert np.linalg.norm(out - x0_hat) / np.linalg.norm(x0_hat) <= 1e-8


# --- solution sensitivity ---------------------------------------------------


def test_derivative_zero_when_already_consistent():
    op, y, _ = _fixture8()
    zeta = 0.5
    apply_a = make_normal_operator(op, zeta)
    x = dense_normal_solve(op, y, random_image((8, 8), seed=6), zeta)
    d = cg_solution_derivative(apply_a, x, x, CgConfig(max_iter=32))
    assert np.abs(d).max() <= 1e-12


def test_derivative_matches_dense_fd():
    op, y, x0_hat = _fixture8()
    zeta = 0.7
    apply_a = make_normal_operator(op, zeta)
    tight = CgConfig(max_iter=200, tol=1e-14)
    x = data_consistency_step(op, y, x0_hat, zeta, tight).x
    d = cg_solution_derivative(apply_a, x, x0_hat, tight)
    h = 1e-4
    fd = (dense_normal_solve(op, y, x0_hat, zeta + h)
          - dense_normal_solve(op, y, x0_hat, zeta - h)) / (2 * h)
    assert np.linalg.norm(d - fd) / np.linalg.norm(fd) <= 1e-5


def test_derivative_diagonal_formula():
    # unit coil: E^H E is diagonal in k-space with the mask (0/1) on the
    # diagonal, so dx/dzeta = (x0 - x) / (m + zeta) mode by mode
    coils = np.ones((1, 8, 8), np.complex128)
    mask = make_equispaced_mask(8, 2, 2)
    op = EncodingOperator(coils, mask)
    truth = random_image((8, 8), seed=7)
    y = simulate_kspace(op, truth, 0.1, seed=2).data
    x0_hat = random_image((8, 8), seed=8)
    zeta = 1.3
    tight = CgConfig(max_iter=200, tol=1e-14)
    x = data_consistency_step(op, y, x0_hat, zeta, tight).x
    d = cg_solution_derivative(make_normal_operator(op, zeta), x, x0_hat, tight)

    from zads.mri import fft2c, ifft2c
    m = mask.as_bool()[None, :].repeat(8, axis=0)
    want = ifft2c(fft2c(x0_hat - x) / (m + zeta))
    assert_allclose(d, want, atol=1e-9)
