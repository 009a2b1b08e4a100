"""Per-bin correlation matrices from the STFT grid and an activity mask.

Batch estimation over the whole file: speech-plus-noise frames feed
R_yy, inactive frames feed R_nn, each averaged by its own frame count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spp import SppMask
from .stft import StftGrid

DEFAULT_LOADING = 1e-6


@dataclass(frozen=True)
class BinStatistics:
    """Hermitian (r_yy, r_nn) pair for one frequency bin.

    l_on/l_off count the speech-active and inactive frames that entered
    each average; a zero count leaves the corresponding matrix zero and
    is resolved by the filter stage's per-bin fallbacks.
    """

    r_yy: np.ndarray
    r_nn: np.ndarray
    l_on: int
    l_off: int
    bin_index: int


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -2, -1)))


def estimate_correlations(
    grid: StftGrid, mask: SppMask, channels: Sequence[int]
) -> list[BinStatistics]:
    """Accumulate masked outer products per bin.

    r_yy(k) averages y y^H over frames with beta(k, l) = 1, r_nn(k) over
    the complement; y is restricted to `channels` in the given order.
    """
    channels = list(channels)
    if not channels:
        raise ValueError("channel list must be nonempty")
    if len(set(channels)) != len(channels):
        raise ValueError(f"channel list has duplicates: {channels}")
    if any(not 0 <= c < grid.n_channels for c in channels):
        raise ValueError(f"channel list {channels} out of range for {grid.n_channels} channels")
    if mask.beta.shape != grid.data.shape[:2]:
        raise ValueError(
            f"mask shape {mask.beta.shape} does not match grid {grid.data.shape[:2]}"
        )
    y = grid.data[:, :, channels]  # (bins, frames, M)
    beta = mask.beta.astype(np.float64)
    l_on = beta.sum(axis=1)
    l_off = beta.shape[1] - l_on

    def masked_average(w: np.ndarray, count: np.ndarray) -> np.ndarray:
        acc = np.swapaxes(y * w[:, :, None], 1, 2) @ np.conj(y)
        return _hermitize(acc / np.maximum(count, 1.0)[:, None, None])

    r_yy = masked_average(beta, l_on)
    r_nn = masked_average(1.0 - beta, l_off)
    return [
        BinStatistics(
            r_yy=r_yy[k],
            r_nn=r_nn[k],
            l_on=int(l_on[k]),
            l_off=int(l_off[k]),
            bin_index=k,
        )
        for k in range(grid.n_bins)
    ]


def regularize(stats: BinStatistics, delta: float = DEFAULT_LOADING) -> BinStatistics:
    """Diagonal loading of r_nn by delta times its mean eigenvalue.

    When r_nn is all-zero (no inactive frames) the loading level falls
    back to the trace of r_yy so the noise matrix is still invertible.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if delta == 0:
        return stats
    m = stats.r_nn.shape[0]
    level = np.trace(stats.r_nn).real / m
    if level == 0:
        level = np.trace(stats.r_yy).real / m
    loaded = stats.r_nn + (delta * level) * np.eye(m)
    return BinStatistics(
        r_yy=stats.r_yy,
        r_nn=loaded,
        l_on=stats.l_on,
        l_off=stats.l_off,
        bin_index=stats.bin_index,
    )
