"""Self-supervised splitting of a sampling mask into training/held-out sets.

The acquired phase-encode lines Omega are partitioned into a
data-consistency set Theta and a held-out set Lambda used only for loss
evaluation. Calibration lines always stay on the data-consistency side:
losing them destroys the low-frequency anchor that every reconstruction
relies on, while the loss only needs a representative sample of lines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleSplitError
from .mri import SamplingMask
from .rng import TAG_SPLIT, rng_for

__all__ = ["MaskSplit", "split_mask"]


@dataclass(eq=False)
class MaskSplit:
    """Disjoint line sets covering an acquisition mask.

    ``rho`` and ``seed`` record how the split was drawn (when it was);
    they let a tuning run redraw comparable splits per epoch.
    """

    dc_mask: SamplingMask
    loss_mask: SamplingMask
    rho: float | None = None
    seed: int | None = None

    def __post_init__(self):
        dc = self.dc_mask.lines
        loss = self.loss_mask.lines
        if np.intersect1d(dc, loss).size:
            raise ConfigError("data-consistency and loss lines overlap")

    @property
    def n_loss_lines(self) -> int:
        return self.loss_mask.n_lines


def split_mask(mask: SamplingMask, rho: float, seed: int, epoch: int = 0) -> MaskSplit:
    """Hold out a fraction ``rho`` of the non-calibration lines' pool.

    The held-out count is ``round(rho * |Omega|)`` — a fraction of all
    acquired lines — drawn uniformly without replacement from the lines
    outside the calibration block. Each (seed, epoch) pair gives an
    independent reproducible draw.
    """
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"rho must lie in (0, 1), got {rho}")
    candidates = np.setdiff1d(mask.lines, mask.acs_lines)
    n_loss = int(round(rho * mask.n_lines))
    if n_loss < 1:
        raise InfeasibleSplitError(
            f"rho={rho} holds out zero of {mask.n_lines} lines")
    if n_loss > candidates.size:
        raise InfeasibleSplitError(
            f"cannot hold out {n_loss} of {candidates.size} non-calibration lines")
    rng = rng_for(seed, TAG_SPLIT, epoch)
    picked = rng.choice(candidates, size=n_loss, replace=False)
    loss_lines = np.sort(picked)
    dc_lines = np.setdiff1d(mask.lines, loss_lines)
    dc = SamplingMask(width=mask.width, lines=dc_lines, acs_lines=mask.acs_lines)
    loss = SamplingMask(width=mask.width, lines=loss_lines,
                        acs_lines=np.array([], dtype=np.int64))
    return MaskSplit(dc_mask=dc, loss_mask=loss, rho=rho, seed=seed)
