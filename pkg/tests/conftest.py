import json

import numpy as np
import pytest

from zads.mri import (EncodingOperator, make_coil_maps, make_equispaced_mask,
                      simulate_kspace)
from zads.priors import GaussianPrior, power_law_spectrum
from zads.rng import rng_for, TAG_PRIOR_SAMPLE
from zads.schedules import make_linear_schedule


def random_image(shape, seed=0):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture(scope="session")
def sched():
    return make_linear_schedule(1000, 1e-4, 0.02)


@pytest.fixture
def small_op():
    """8x8 single-coil R=2 operator with a bit of ACS."""
    coils = make_coil_maps(8, 8, 1, seed=3)
    mask = make_equispaced_mask(8, 2, 2)
    return EncodingOperator(coils, mask)


@pytest.fixture
def multicoil_op():
    coils = make_coil_maps(16, 16, 3, seed=1)
    mask = make_equispaced_mask(16, 2, 4)
    return EncodingOperator(coils, mask)


def matched_problem(height=16, width=16, coils=3, r=2, acs=4, corner=0.1,
                    power=2.5, noise_std=0.01, seed=3):
    """A fully wired (op, y, prior, truth) tuple drawn from the prior."""
    sens = make_coil_maps(height, width, coils, seed=seed)
    mask = make_equispaced_mask(width, r, acs)
    op = EncodingOperator(sens, mask)
    spectrum = power_law_spectrum(height, width, corner=corner, power=power,
                                  total=float(height * width))
    prior = GaussianPrior(np.zeros((height, width), np.complex128), spectrum)
    truth = prior.sample(rng_for(seed, TAG_PRIOR_SAMPLE))
    y = simulate_kspace(op, truth, noise_std, seed=seed)
    return op, y, prior, truth


@pytest.fixture(scope="session")
def dds_mmse_ratios():
    """Per-seed DDS squared error over the exact Bayes risk, single coil.

    Shared between the sampler tests and the acceptance gate so the
    twenty reconstructions only run once per session.
    """
    from zads.linalg import CgConfig
    from zads.priors import single_coil_mmse
    from zads.samplers import dds_reconstruct
    from zads.schedules import make_uniform_sequence

    height = width = 64
    mask = make_equispaced_mask(width, 4, 8)
    op = EncodingOperator(np.ones((1, height, width), np.complex128), mask)
    spectrum = power_law_spectrum(height, width, corner=0.05, power=3.0,
                                  total=float(height * width))
    prior = GaussianPrior(np.zeros((height, width), np.complex128), spectrum)
    lin = make_linear_schedule(1000, 1e-4, 0.02)
    seq = make_uniform_sequence(1000, 25)
    risk = single_coil_mmse(prior, mask.as_bool(), 0.05)
    ratios = []
    for seed in range(20):
        truth = prior.sample(rng_for(seed, TAG_PRIOR_SAMPLE))
        y = simulate_kspace(op, truth, 0.05, seed=seed)
        x = dds_reconstruct(op, y, prior, lin, seq, eta=0.85, zeta=0.1,
                            seed=seed, cg=CgConfig(max_iter=15, tol=0.0))
        ratios.append(float(np.sum(np.abs(x - truth) ** 2) / risk))
    return np.array(ratios)


def run_cli(argv, cwd):
    """Invoke the command line entry point in-process from a directory."""
    import os

    from zads.cli import main

    old = os.getcwd()
    os.chdir(cwd)
    try:
        return main([str(a) for a in argv])
    finally:
        os.chdir(old)


def write_config(path, **overrides):
    path.write_text(json.dumps(overrides))
    return path
