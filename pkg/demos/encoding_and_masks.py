"""
Walk through the measurement model: coils, masks, and the forward operator
===========================================================================

Builds the multi-coil Fourier encoding for a small phantom, checks the
adjoint pairing numerically, and compares a plain zero-filled recon with
a single regularized data-consistency solve.

Run from the repository root:

    python3 demos/encoding_and_masks.py
"""

import pathlib

import numpy as np

from zads.fileio import write_pgm
from zads.linalg import CgConfig, data_consistency_step
from zads.mri import (EncodingOperator, apply_adjoint, make_coil_maps,
                      make_equispaced_mask, make_phantom, simulate_kspace)

out = pathlib.Path("demo_out")
out.mkdir(exist_ok=True)

# ---------------------------------------------------------------------
# an acquisition: 96x96 phantom, 4 coils, every 4th line plus a center band
# ---------------------------------------------------------------------

x = make_phantom(96, 96, seed=0)
coils = make_coil_maps(96, 96, 4, seed=0)
mask = make_equispaced_mask(96, 4, 12)
op = EncodingOperator(coils, mask)

kept = mask.n_lines
print(f"mask keeps {kept}/96 lines ({96 / kept:.2f}x acceleration), "
      f"{mask.acs_lines.size} of them in the fully sampled center")

# the coil maps are normalized so the stack loses no energy
sos = np.sum(np.abs(coils) ** 2, axis=0)
print(f"sum-of-squares coil normalization: max deviation from 1 is "
      f"{np.abs(sos - 1).max():.2e}")

# ---------------------------------------------------------------------
# the operator really is linear with the adjoint it claims to have:
# <y, E x> must equal <E^H y, x> for random probes
# ---------------------------------------------------------------------

rng = np.random.default_rng(7)
worst = 0.0
for _ in range(25):
    u = rng.standard_normal((96, 96)) + 1j * rng.standard_normal((96, 96))
    v = rng.standard_normal((4, 96, 96)) + 1j * rng.standard_normal((4, 96, 96))
    lhs = np.vdot(v, op.forward(u))
    rhs = np.vdot(op.adjoint(v), u)
    worst = max(worst, abs(lhs - rhs) / abs(lhs))
print(f"adjointness over 25 probes: worst relative error {worst:.2e}")

# ---------------------------------------------------------------------
# reconstruct: adjoint alone vs one data-consistency solve around it
# ---------------------------------------------------------------------

y = simulate_kspace(op, x, noise_std=0.01, seed=1)
zf = apply_adjoint(op, y)

# pull the zero-filled image toward the measurements with a quadratic tie
dc = data_consistency_step(op, y.data, zf, zeta=0.05,
                           config=CgConfig(max_iter=30, tol=0.0))

err_zf = np.linalg.norm(zf - x) / np.linalg.norm(x)
err_dc = np.linalg.norm(dc.x - x) / np.linalg.norm(x)
print(f"relative error: zero-filled {err_zf:.3f}, "
      f"after {dc.iterations} CG iterations {err_dc:.3f}")

write_pgm(out / "phantom.pgm", x)
write_pgm(out / "zero_filled.pgm", zf)
write_pgm(out / "data_consistent.pgm", dc.x)
print(f"wrote phantom/zero_filled/data_consistent PGMs to {out}/")
