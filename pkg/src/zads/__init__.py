"""Self-tuned diffusion sampling for undersampled multi-coil Fourier data.

The package provides the encoding operators and simulator (:mod:`zads.mri`),
noise schedules (:mod:`zads.schedules`), analytic priors (:mod:`zads.priors`),
conjugate-gradient data consistency (:mod:`zads.linalg`), held-out mask
splitting (:mod:`zads.ssdu`), the reverse-diffusion solvers
(:mod:`zads.samplers`), the test-time weight tuner (:mod:`zads.tuner`),
image metrics (:mod:`zads.metrics`), and a command-line driver
(:mod:`zads.cli`). External denoisers plug in over a framed stdio protocol
(:mod:`zads.plugin`).
"""

__version__ = "0.1.0"

from .mri import (EncodingOperator, MultiCoilKSpace, SamplingMask, fft2c,
                  ifft2c, make_coil_maps, make_equispaced_mask, make_phantom,
                  restrict_kspace, simulate_kspace)
from .linalg import CgConfig, cg_solve, data_consistency_step
from .priors import GaussianPrior, ZeroPrior, tweedie
from .samplers import (SamplerConfig, dds_reconstruct, ddim_step,
                       dps_reconstruct, weighted_reverse_pass, zads_forward,
                       zero_filled)
from .schedules import (NoiseSchedule, make_banded_sequence,
                        make_linear_schedule, make_uniform_sequence, sigma)
from .ssdu import MaskSplit, split_mask
from .tuner import (TuneProblem, TunerConfig, TuneReport, holdout_loss, tune)

__all__ = [
    "__version__",
    "EncodingOperator", "MultiCoilKSpace", "SamplingMask", "fft2c", "ifft2c",
    "make_coil_maps", "make_equispaced_mask", "make_phantom",
    "restrict_kspace", "simulate_kspace",
    "CgConfig", "cg_solve", "data_consistency_step",
    "GaussianPrior", "ZeroPrior", "tweedie",
    "SamplerConfig", "dds_reconstruct", "ddim_step", "dps_reconstruct",
    "weighted_reverse_pass", "zads_forward", "zero_filled",
    "NoiseSchedule", "make_banded_sequence", "make_linear_schedule",
    "make_uniform_sequence", "sigma",
    "MaskSplit", "split_mask",
    "TuneProblem", "TunerConfig", "TuneReport", "holdout_loss", "tune",
]
