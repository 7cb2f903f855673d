"""
Talking to an out-of-process denoiser over the wire protocol
============================================================

The sampler can outsource its noise predictions to any child process
that speaks the framed binary protocol. This spawns the echo-mode stub
worker from the companion package and exchanges a few frames with it by
hand, then shows the same worker driving a sampler through PluginPrior.

Requires the worker package (pip install -e plugin/ from the repo root):

    python3 demos/external_worker.py
"""

import shutil
import sys

import numpy as np

from zads.plugin import PluginClient, PluginPrior
from zads.samplers import ddim_sample
from zads.schedules import make_linear_schedule, make_uniform_sequence

if shutil.which("zads-plugin") is None:
    sys.exit("zads-plugin is not installed; run: pip install -e plugin/")

H = W = 16

# ---------------------------------------------------------------------
# one manual round trip: echo mode must return the payload untouched
# ---------------------------------------------------------------------

client = PluginClient("zads-plugin serve --mode echo", H, W)
rng = np.random.default_rng(0)
x_t = (rng.standard_normal((H, W)) + 1j * rng.standard_normal((H, W)))
back = client.predict_noise(x_t, t=500, alpha_bar=0.5)

drift = np.abs(back - x_t.astype(np.complex64)).max()
print(f"echo round trip: max drift vs complex64 quantization {drift:.1e}")

# ---------------------------------------------------------------------
# the same process as a prior for a full unconditional sampling pass
# ---------------------------------------------------------------------

zero = PluginClient("zads-plugin serve --mode zero", H, W)
sched = make_linear_schedule(1000, 1e-4, 0.02)
seq = make_uniform_sequence(1000, 8)
x = ddim_sample(PluginPrior(zero), (H, W), sched, seq, eta=0.0, seed=3)
print(f"8-step pass with the zero-score worker: output norm {np.linalg.norm(x):.1f}")
print("(a zero noise prediction turns every update into a pure rescaling, "
      "so the pass returns the initial draw amplified by 1/sqrt(alpha_bar) "
      "— a determinism probe, not an image)")
