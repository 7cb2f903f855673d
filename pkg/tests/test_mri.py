import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from conftest import random_image
from zads.errors import ConfigError
from zads.mri import (EncodingOperator, MultiCoilKSpace, SamplingMask, fft2c,
                      ifft2c, make_coil_maps, make_equispaced_mask,
                      make_phantom, restrict_kspace, simulate_kspace)


def test_fft2c_unitary():
    for shape in [(8, 8), (16, 12), (7, 9)]:
        x = random_image(shape, seed=shape[0])
        assert_allclose(ifft2c(fft2c(x)), x, atol=1e-13)
        # Parseval
        assert np.linalg.norm(fft2c(x)) == pytest.approx(np.linalg.norm(x))


def test_fft2c_centering():
    # a unit impulse at the array centre transforms to a flat spectrum
    x = np.zeros((8, 8), dtype=np.complex128)
    x[4, 4] = 1.0
    k = fft2c(x)
    assert_allclose(np.abs(k), 1.0 / 8.0, atol=1e-14)
    assert_allclose(k.imag, 0.0, atol=1e-14)


# --- sampling masks ---------------------------------------------------------


def test_equispaced_mask_320_r4_acs24():
    mask = make_equispaced_mask(320, 4, 24)
    assert mask.n_lines == 98
    assert mask.acs_lines.min() == 148
    assert mask.acs_lines.max() == 171
    assert len(mask.acs_lines) == 24


def test_equispaced_mask_fully_sampled():
    mask = make_equispaced_mask(8, 1, 0)
    assert_array_equal(mask.lines, np.arange(8))
    assert mask.acs_lines.size == 0


def test_mask_as_bool_and_subset():
    mask = make_equispaced_mask(16, 4, 4)
    b = mask.as_bool()
    assert b.shape == (16,)
    assert b.sum() == mask.n_lines
    assert_array_equal(np.flatnonzero(b), mask.lines)


def test_mask_validation():
    with pytest.raises(ConfigError):
        SamplingMask(8, np.array([0, 9]))       # out of range
    with pytest.raises(ConfigError):
        SamplingMask(8, np.array([], dtype=int))  # empty
    # duplicate indices collapse: lines are a set
    assert SamplingMask(8, np.array([3, 3])).n_lines == 1
    with pytest.raises(ConfigError):
        make_equispaced_mask(16, 0, 4)


def test_restrict_kspace_partition():
    op, y, _, _ = _problem16()
    mask = op.mask
    half = SamplingMask(mask.width, mask.lines[::2])
    rest = SamplingMask(mask.width, mask.lines[1::2])
    ya = restrict_kspace(y, half)
    yb = restrict_kspace(y, rest)
    assert_array_equal(ya.data + yb.data, y.data)
    # orthogonal supports split the energy exactly
    total = np.linalg.norm(y.data) ** 2
    parts = np.linalg.norm(ya.data) ** 2 + np.linalg.norm(yb.data) ** 2
    assert total == pytest.approx(parts, rel=1e-12)
    # restricting to the full mask is the identity
    assert_array_equal(restrict_kspace(y, mask).data, y.data)


def test_restrict_kspace_rejects_non_subset():
    op, y, _, _ = _problem16()
    other = SamplingMask(op.mask.width, np.array([1]))
    if 1 in op.mask.lines:
        other = SamplingMask(op.mask.width, np.array([2]))
    with pytest.raises(ConfigError):
        restrict_kspace(y, other)


# --- coil maps and phantom --------------------------------------------------


def test_coil_maps_normalized():
    for c in [1, 4, 8]:
        sens = make_coil_maps(16, 16, c, seed=0)
        ssq = np.sum(np.abs(sens) ** 2, axis=0)
        assert_allclose(ssq, 1.0, atol=1e-9)
    solo = make_coil_maps(12, 12, 1, seed=5)
    assert_allclose(np.abs(solo[0]), 1.0, atol=1e-9)


def test_coil_maps_deterministic():
    a = make_coil_maps(16, 16, 8, seed=7)
    b = make_coil_maps(16, 16, 8, seed=7)
    assert_array_equal(a, b)
    c = make_coil_maps(16, 16, 8, seed=8)
    assert np.abs(a - c).max() > 1e-3


def test_phantom_basic():
    ph = make_phantom(64, 64, seed=0)
    assert ph.shape == (64, 64)
    assert np.abs(ph).max() == pytest.approx(1.0, abs=1e-12)
    assert_array_equal(ph, make_phantom(64, 64, seed=0))
    # corners outside every ellipse stay empty
    assert np.abs(ph[0, 0]) == 0
    assert np.abs(ph[0, -1]) == 0
    assert np.abs(ph[-1, 0]) == 0


# --- encoding operator ------------------------------------------------------


def _problem16():
    from conftest import matched_problem

    return matched_problem()


def test_forward_zero():
    op, _, _, _ = _problem16()
    z = np.zeros((op.height, op.width), np.complex128)
    assert_array_equal(op.forward(z), np.zeros_like(op.forward(z)))


def test_forward_impulse_flat_spectrum():
    coils = make_coil_maps(8, 8, 1, seed=0)
    coils = np.ones_like(coils)  # drop the phase so the spectrum is real
    mask = make_equispaced_mask(8, 1, 0)
    op = EncodingOperator(coils, mask)
    x = np.zeros((8, 8), np.complex128)
    x[4, 4] = 1.0
    y = op.forward(x)
    assert_allclose(np.abs(y[0]), 1.0 / 8.0, atol=1e-13)


def test_adjointness_hundred_probes():
    op, _, _, _ = _problem16()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        x = (rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16)))
        y = (rng.standard_normal(op.sens.shape)
             + 1j * rng.standard_normal(op.sens.shape)) * op.mask.as_bool()
        lhs = np.vdot(y, op.forward(x))
        rhs = np.vdot(op.adjoint(y), x)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-30))
    assert worst <= 1e-12


def test_unit_coil_full_mask_normal_is_identity():
    coils = np.ones((1, 8, 8), np.complex128)
    op = EncodingOperator(coils, make_equispaced_mask(8, 1, 0))
    x = random_image((8, 8), seed=2)
    assert_allclose(op.normal(x), x, atol=1e-12)


def test_dense_matrix_equivalence_4x4():
    coils = make_coil_maps(4, 4, 2, seed=9)
    mask = make_equispaced_mask(4, 2, 1)
    op = EncodingOperator(coils, mask)
    # materialize E column by column: C*H*W rows, H*W columns
    n = 16
    e = np.zeros((2 * n, n), np.complex128)
    basis = np.zeros((4, 4), np.complex128)
    for j in range(n):
        basis.flat[j] = 1.0
        e[:, j] = op.forward(basis).ravel()
        basis.flat[j] = 0.0
    x = random_image((4, 4), seed=4)
    assert_allclose(op.forward(x).ravel(), e @ x.ravel(), atol=1e-12)
    y = random_image((2, 4, 4), seed=5) * mask.as_bool()
    assert_allclose(op.adjoint(y).ravel(), e.conj().T @ y.ravel(), atol=1e-12)


def test_normal_equals_adjoint_forward():
    op, _, _, _ = _problem16()
    x = random_image((16, 16), seed=6)
    assert_allclose(op.normal(x), op.adjoint(op.forward(x)), atol=1e-13)


def test_with_mask_swaps_sampling():
    op, _, _, _ = _problem16()
    sub = SamplingMask(op.mask.width, op.mask.lines[:3])
    op2 = op.with_mask(sub)
    x = random_image((16, 16), seed=8)
    y = op2.forward(x)
    off = np.ones(op.mask.width, dtype=bool)
    off[sub.lines] = False
    assert np.abs(y[:, :, off]).max() == 0


# --- simulation -------------------------------------------------------------


def test_simulate_noiseless_exact():
    op, _, _, truth = _problem16()
    clean = simulate_kspace(op, truth, 0.0, seed=1)
    assert_array_equal(clean.data, op.forward(truth))


def test_simulate_unsampled_stays_zero():
    op, y, _, _ = _problem16()
    off = ~op.mask.as_bool()
    assert np.abs(y.data[:, :, off]).max() == 0


def test_simulate_noise_power():
    # Monte Carlo estimate of the per-sample complex noise power
    coils = make_coil_maps(128, 128, 4, seed=0)
    op = EncodingOperator(coils, make_equispaced_mask(128, 1, 0))
    truth = random_image((128, 128), seed=1)
    clean = op.forward(truth)
    std = 0.05
    sq = 0.0
    n = 0
    for seed in range(16):
        y = simulate_kspace(op, truth, std, seed=seed)
        noise = y.data - clean
        sq += float(np.sum(np.abs(noise) ** 2))
        n += noise.size
    assert n > 1_000_000
    assert sq / n == pytest.approx(std ** 2, rel=0.01)


def test_simulate_deterministic_per_seed():
    op, _, _, truth = _problem16()
    a = simulate_kspace(op, truth, 0.05, seed=3)
    b = simulate_kspace(op, truth, 0.05, seed=3)
    assert_array_equal(a.data, b.data)


def test_kspace_container_rejects_leakage():
    op, y, _, _ = _problem16()
    bad = y.data.copy()
    off = np.flatnonzero(~op.mask.as_bool())
    bad[0, 0, off[0]] = 1.0
    with pytest.raises(ConfigError):
        MultiCoilKSpace(bad, op.mask)
