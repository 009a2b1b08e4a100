"""STFT analysis/synthesis with a square-root periodic Hann window.

The 512-point window at 50% overlap satisfies exact COLA, so a matched
analysis/synthesis pair reconstructs the interior of the signal to
machine precision. One-sided spectra only; all downstream per-bin math
runs on bins 0..fft_size/2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioClip


class StftError(Exception):
    pass


def sqrt_hann_periodic(n: int) -> np.ndarray:
    """Square root of the DFT-even (periodic) Hann window of length n."""
    t = np.arange(n)
    return np.sqrt(0.5 - 0.5 * np.cos(2.0 * np.pi * t / n))


@dataclass(frozen=True)
class StftParams:
    fft_size: int = 512
    hop: int = 256
    window: str = "sqrt-hann-periodic"
    sample_rate_hz: int = 16000

    def __post_init__(self):
        if self.fft_size < 8 or self.fft_size % 2 != 0:
            raise StftError(f"fft_size must be even and >= 8, got {self.fft_size}")
        if self.hop <= 0 or self.hop > self.fft_size:
            raise StftError(f"hop must be in 1..fft_size, got {self.hop}")
        if self.window not in ("sqrt-hann-periodic", "rect"):
            raise StftError(f"unknown window {self.window!r}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def window_values(self) -> np.ndarray:
        if self.window == "rect":
            return np.ones(self.fft_size)
        return sqrt_hann_periodic(self.fft_size)


@dataclass(frozen=True)
class StftGrid:
    """Complex STFT tensor of shape (bins, frames, channels)."""

    data: np.ndarray
    params: StftParams
    n_samples: int | None = field(default=None)

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 3:
            raise StftError(f"grid data must be 3-D (bins, frames, channels), got {d.shape}")
        if d.shape[0] != self.params.n_bins:
            raise StftError(
                f"bin count {d.shape[0]} inconsistent with fft_size {self.params.fft_size}"
            )
        object.__setattr__(self, "data", d.astype(np.complex128, copy=False))

    @property
    def n_bins(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    @property
    def n_channels(self) -> int:
        return self.data.shape[2]

    def channel_slice(self, index: int) -> np.ndarray:
        """Single-channel spectrogram (bins, frames)."""
        if not 0 <= index < self.n_channels:
            raise StftError(f"channel {index} out of range (have {self.n_channels})")
        return self.data[:, :, index]

    def select_channels(self, channels: list[int]) -> "StftGrid":
        """Sub-grid restricted to the listed channels, in the given order."""
        for c in channels:
            if not 0 <= c < self.n_channels:
                raise StftError(f"channel {c} out of range (have {self.n_channels})")
        return StftGrid(self.data[:, :, list(channels)], self.params, self.n_samples)


def analyze(clip: AudioClip, params: StftParams | None = None) -> StftGrid:
    """Windowed one-sided STFT of every channel.

    Frame f covers samples [f*hop, f*hop + fft_size); the final partial
    frame is zero-padded. Frames exist for every start offset below the
    signal length, i.e. n_frames = ceil(n / hop).
    """
    params = params or StftParams()
    if clip.sample_rate_hz != params.sample_rate_hz:
        raise StftError(
            f"clip rate {clip.sample_rate_hz} != params rate {params.sample_rate_hz}"
        )
    n = clip.n_frames
    nfft, hop = params.fft_size, params.hop
    if n < nfft:
        raise StftError(f"clip of {n} samples shorter than one frame ({nfft})")
    n_frames = -(-n // hop)
    padded = np.zeros((clip.n_channels, (n_frames - 1) * hop + nfft))
    padded[:, :n] = clip.samples
    idx = np.arange(n_frames)[:, None] * hop + np.arange(nfft)[None, :]
    frames = padded[:, idx] * params.window_values()  # (ch, frames, fft)
    spec = np.fft.rfft(frames, axis=2)  # (ch, frames, bins)
    return StftGrid(spec.transpose(2, 1, 0), params, n_samples=n)


def synthesize(grid: StftGrid) -> AudioClip:
    """Overlap-add inverse with the matched synthesis window.

    Output is trimmed to the analyzed length when the grid records it.
    Perfect reconstruction holds on the COLA-valid interior; the first
    and last (fft_size - hop) samples carry partial window overlap.
    """
    params = grid.params
    nfft, hop = params.fft_size, params.hop
    w = params.window_values()
    frames_t = np.fft.irfft(grid.data.transpose(2, 1, 0), n=nfft, axis=2) * w
    n_frames = grid.n_frames
    total = (n_frames - 1) * hop + nfft
    out = np.zeros((grid.n_channels, total))
    for f in range(n_frames):
        out[:, f * hop : f * hop + nfft] += frames_t[:, f, :]
    if grid.n_samples is not None:
        out = out[:, : grid.n_samples]
    return AudioClip(out, params.sample_rate_hz)
