"""Speech presence probability on a single channel, thresholded to the
binary activity indicator used by the covariance estimator.

Fixed-prior MMSE-style estimator: a-posteriori SNR against a recursively
tracked noise PSD, with the PSD update guarded against lock-up by
capping the probability it sees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stft import StftGrid


class SppError(Exception):
    pass


@dataclass(frozen=True)
class SppParams:
    xi_h1: float = 10.0 ** (15.0 / 10.0)  # a-priori SNR under speech, linear
    alpha_psd: float = 0.8
    spp_cap: float = 0.99
    init_frames: int = 5
    threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha_psd < 1.0:
            raise SppError(f"alpha_psd must be in (0,1), got {self.alpha_psd}")
        if not 0.0 < self.spp_cap < 1.0:
            raise SppError(f"spp_cap must be in (0,1), got {self.spp_cap}")
        if not 0.0 < self.threshold < 1.0:
            raise SppError(f"threshold must be in (0,1), got {self.threshold}")
        if self.xi_h1 <= 0:
            raise SppError(f"xi_h1 must be positive, got {self.xi_h1}")
        if self.init_frames < 1:
            raise SppError(f"init_frames must be >= 1, got {self.init_frames}")


@dataclass(frozen=True)
class SppMask:
    """Per-(bin, frame) probability and binary indicator.

    source_channel records where the driving spectrogram came from:
    ("internal", idx), ("external", idx) or ("oracle", -1).
    """

    spp: np.ndarray
    beta: np.ndarray
    source_channel: tuple[str, int]

    @property
    def n_bins(self) -> int:
        return self.beta.shape[0]

    @property
    def n_frames(self) -> int:
        return self.beta.shape[1]

    def activity_fraction(self) -> float:
        return float(np.mean(self.beta))


def estimate_spp(
    spectrogram: np.ndarray,
    params: SppParams | None = None,
    source_channel: tuple[str, int] = ("internal", 0),
) -> SppMask:
    """SPP and activity indicator for one channel's (bins, frames) STFT.

    The noise PSD starts as the mean periodogram of the first
    `init_frames` frames (assumed noise-only) and then follows
    sigma2 <- a*sigma2 + (1-a)*[p*sigma2 + (1-p)*|y|^2] with p the
    cap-limited SPP of the current frame.
    """
    params = params or SppParams()
    spec = np.asarray(spectrogram)
    if spec.ndim != 2:
        raise SppError(f"expected (bins, frames) spectrogram, got shape {spec.shape}")
    n_bins, n_frames = spec.shape
    if n_frames < params.init_frames:
        raise SppError(
            f"need at least init_frames={params.init_frames} frames, got {n_frames}"
        )
    power = np.abs(spec) ** 2
    sigma2 = np.mean(power[:, : params.init_frames], axis=1)
    sigma2 = np.maximum(sigma2, np.finfo(np.float64).eps)

    xi = params.xi_h1
    glr_gain = xi / (1.0 + xi)
    spp = np.empty((n_bins, n_frames))
    for l in range(n_frames):
        gamma = power[:, l] / sigma2
        p = 1.0 / (1.0 + (1.0 + xi) * np.exp(-gamma * glr_gain))
        spp[:, l] = p
        p_capped = np.minimum(p, params.spp_cap)
        periodogram = p_capped * sigma2 + (1.0 - p_capped) * power[:, l]
        sigma2 = params.alpha_psd * sigma2 + (1.0 - params.alpha_psd) * periodogram
        sigma2 = np.maximum(sigma2, np.finfo(np.float64).eps)
    beta = (spp >= params.threshold).astype(np.uint8)
    return SppMask(spp=spp, beta=beta, source_channel=source_channel)


def select_spp_channel(grid: StftGrid, mode: str, index: int) -> np.ndarray:
    """Single-channel spectrogram feeding estimate_spp.

    mode "internal" picks an embedded-array channel, "external" the
    reference microphone recorded as an extra channel; either way the
    result is just the grid slice at `index`.
    """
    if mode not in ("internal", "external"):
        raise SppError(f"unknown SPP mode {mode!r}")
    if not 0 <= index < grid.n_channels:
        raise SppError(f"SPP channel {index} out of range (grid has {grid.n_channels})")
    return grid.channel_slice(index)
