"""Synthetic UAV acoustic scenes with ground-truth components.

Free-field propagation over a desk-scale replica of the measurement
geometry: a speech source 2 m out near the floor, a 16-element array
(12 main + 4 propeller microphones) on a frame 1.15 m up, rotor noise
sources just above the propeller mics, and an optional external
microphone 0.2 m above the source. Every scene carries exact per-channel
speech/noise components and an oracle activity mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import AudioClip, read_wav, resample, write_wav
from .filters import METHODS, ChannelPartition
from .spp import SppMask
from .stft import StftParams, analyze

SPEED_OF_SOUND = 343.0
N_ARRAY_MICS = 12
N_ROTORS = 4
DELAY_FILTER_TAPS = 32

SPP_MODES = ("internal", "external", "oracle")


class SceneError(Exception):
    pass


@dataclass(frozen=True)
class SceneGeometry:
    """Positions in meters; arrays are (n, 3)."""

    source: np.ndarray
    array_mics: np.ndarray
    propeller_mics: np.ndarray
    rotors: np.ndarray
    external_mic: np.ndarray | None

    def __post_init__(self):
        object.__setattr__(self, "source", np.asarray(self.source, dtype=float))
        object.__setattr__(self, "array_mics", np.asarray(self.array_mics, dtype=float))
        object.__setattr__(self, "propeller_mics", np.asarray(self.propeller_mics, dtype=float))
        object.__setattr__(self, "rotors", np.asarray(self.rotors, dtype=float))
        if self.external_mic is not None:
            object.__setattr__(self, "external_mic", np.asarray(self.external_mic, dtype=float))
        if self.propeller_mics.shape[0] != N_ROTORS or self.rotors.shape[0] != N_ROTORS:
            raise SceneError("expected exactly 4 rotors and 4 propeller mics")

    @property
    def n_embedded(self) -> int:
        return self.array_mics.shape[0] + self.propeller_mics.shape[0]

    def embedded_positions(self) -> np.ndarray:
        return np.vstack([self.array_mics, self.propeller_mics])


def default_geometry(include_external: bool = True) -> SceneGeometry:
    """Frame-mounted circular array at 1.15 m, rotors on four arms."""
    angles = np.deg2rad(np.arange(N_ARRAY_MICS) * 30.0)
    array_mics = np.stack(
        [0.25 * np.cos(angles), 0.25 * np.sin(angles), np.full(N_ARRAY_MICS, 1.15)], axis=1
    )
    rotor_angles = np.deg2rad([45.0, 135.0, 225.0, 315.0])
    rotors = np.stack(
        [0.35 * np.cos(rotor_angles), 0.35 * np.sin(rotor_angles), np.full(4, 1.22)], axis=1
    )
    prop_mics = rotors.copy()
    prop_mics[:, 2] = 1.12
    return SceneGeometry(
        source=np.array([2.0, 0.0, 0.1]),
        array_mics=array_mics,
        propeller_mics=prop_mics,
        rotors=rotors,
        external_mic=np.array([2.0, 0.0, 0.3]) if include_external else None,
    )


@dataclass(frozen=True)
class SceneConfig:
    speech_path: str
    target_snr_db: float = -10.0
    seed: int = 0
    rotor_speeds_rpm: tuple[float, float, float, float] = (4080.0, 3920.0, 4040.0, 3960.0)
    geometry: SceneGeometry = field(default_factory=default_geometry)
    coupling_own_db: float = 0.0
    coupling_cross_db: float = -12.0
    coupling_array_db: float = -6.0
    # mechanical shielding of the close-talking propeller capsules; keeps
    # the speech component negligible there, which the blocking stage assumes
    propeller_speech_rejection_db: float = -25.0
    # per-channel incoherent part (local blade-wake turbulence plus
    # self-noise) relative to that channel's coherent ego noise; bounds
    # how far any spatial filter can cancel, as on real hardware, where
    # close-to-rotor microphones are dominated by local turbulence
    sensor_noise_db: float = -3.0
    external_snr_offset_db: float = 15.0
    duration_s: float | None = None
    sample_rate_hz: int = 16000

    def __post_init__(self):
        if len(self.rotor_speeds_rpm) != N_ROTORS:
            raise SceneError(f"need {N_ROTORS} rotor speeds, got {len(self.rotor_speeds_rpm)}")
        if any(r <= 0 for r in self.rotor_speeds_rpm):
            raise SceneError("rotor speeds must be positive")
        if not math.isfinite(self.target_snr_db):
            raise SceneError("target SNR must be finite")


@dataclass(frozen=True)
class SceneOutput:
    mixture: AudioClip
    speech_image: AudioClip
    noise_image: AudioClip
    oracle_mask: SppMask
    manifest: dict


def steering_delay_gain(
    src: np.ndarray, mic: np.ndarray, rate_hz: int, ref_distance: float = 1.0
) -> tuple[float, float]:
    """Free-field propagation delay (fractional samples) and 1/r gain.

    The gain is normalized so a microphone at ref_distance gets 1.
    """
    src = np.asarray(src, dtype=float)
    mic = np.asarray(mic, dtype=float)
    dist = float(np.linalg.norm(src - mic))
    if dist <= 0:
        raise SceneError("source and microphone positions coincide")
    delay = dist / SPEED_OF_SOUND * rate_hz
    return delay, ref_distance / dist


def fractional_delay(x: np.ndarray, delay: float, taps: int = DELAY_FILTER_TAPS) -> np.ndarray:
    """Delay a signal by a non-integer number of samples.

    Windowed-sinc interpolation; output has the input's length, with the
    head zero-filled for delays beyond the filter's lookahead.
    """
    if delay < 0:
        raise SceneError(f"negative delay {delay} not supported")
    x = np.asarray(x, dtype=float)
    n0 = int(np.floor(delay))
    mu = delay - n0
    half = taps // 2
    t = np.arange(taps) - half - mu
    window = 0.5 * (1.0 + np.cos(np.pi * t / (half + 1)))
    kernel = np.sinc(t) * window
    kernel /= kernel.sum()
    full = np.convolve(x, kernel)
    out = np.zeros_like(x)
    start = half - n0
    if start >= 0:
        seg = full[start : start + x.size]
        out[: seg.size] = seg
    else:
        out[-start :] = full[: x.size + start]
    return out


def synth_ego_noise(rpm: float, duration_s: float, rate_hz: int, seed) -> AudioClip:
    """One rotor's noise: blade-pass harmonics plus a shaped broadband bed.

    Twenty 1/k-weighted partials at multiples of the blade-pass frequency
    (two blades), each with slow +-5% frequency jitter, plus Gaussian
    noise rolled off at -6 dB/octave above 1 kHz, 10 dB below the
    harmonic power. Output is normalized to unit mean-square power.
    """
    if rpm <= 0:
        raise SceneError(f"rpm must be positive, got {rpm}")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * rate_hz))
    f0 = 2.0 * rpm / 60.0
    # fixed-throttle rotors drift slowly: one jitter control point every 4 s
    n_ctrl = max(int(np.ceil(duration_s / 4.0)) + 2, 2)
    ctrl_pos = np.linspace(0.0, n, n_ctrl)
    sample_pos = np.arange(n)
    harm = np.zeros(n)
    for k in range(1, 21):
        if k * f0 * 1.05 >= 0.95 * rate_hz / 2:
            break
        jitter = np.interp(sample_pos, ctrl_pos, rng.uniform(-1.0, 1.0, n_ctrl))
        inst_freq = k * f0 * (1.0 + 0.05 * jitter)
        phase = rng.uniform(0.0, 2.0 * np.pi) + 2.0 * np.pi * np.cumsum(inst_freq) / rate_hz
        harm += np.sin(phase) / k
    harm_power = np.mean(harm**2)

    broad = rng.standard_normal(n)
    spec = np.fft.rfft(broad)
    freqs = np.fft.rfftfreq(n, 1.0 / rate_hz)
    spec *= 1.0 / np.sqrt(1.0 + (freqs / 1000.0) ** 2)
    broad = np.fft.irfft(spec, n)
    broad *= np.sqrt(0.1 * harm_power / np.mean(broad**2))

    x = harm + broad
    x /= np.sqrt(np.mean(x**2))
    return AudioClip(x[np.newaxis, :], rate_hz)


def make_oracle_mask(
    speech_ref: AudioClip, noise_ref: AudioClip, params: StftParams | None = None
) -> SppMask:
    """Activity indicator from ground-truth components at one channel.

    beta = 1 where the per-bin speech/noise power ratio is at least 0 dB
    and the speech carries any energy at all.
    """
    params = params or StftParams()
    s_pow = np.abs(analyze(speech_ref, params).data[:, :, 0]) ** 2
    n_pow = np.abs(analyze(noise_ref, params).data[:, :, 0]) ** 2
    beta = ((s_pow >= n_pow) & (s_pow > 0)).astype(np.uint8)
    spp = beta.astype(np.float64)
    return SppMask(spp=spp, beta=beta, source_channel=("oracle", -1))


def _load_speech(cfg: SceneConfig) -> np.ndarray:
    clip = read_wav(cfg.speech_path)
    if clip.n_channels > 1:
        clip = clip.channel(0)
    if clip.sample_rate_hz != cfg.sample_rate_hz:
        clip = resample(clip, cfg.sample_rate_hz)
    x = clip.samples[0]
    if cfg.duration_s is not None:
        n = int(round(cfg.duration_s * cfg.sample_rate_hz))
        if x.size >= n:
            x = x[:n]
        else:
            x = np.pad(x, (0, n - x.size))
    return x


def render_scene(cfg: SceneConfig) -> SceneOutput:
    """Render mixture/speech/noise images, oracle mask, and manifest.

    Channel layout: 12 main-array channels, then 4 propeller channels,
    then the external microphone when the geometry includes one. The
    noise image is scaled so the reference channel (0) meets the target
    SNR exactly; the external channel sits 15 dB above that.
    """
    geo = cfg.geometry
    fs = cfg.sample_rate_hz
    speech = _load_speech(cfg)
    n = speech.size
    if n < fs:
        raise SceneError("speech material shorter than one second")
    speech_power = np.mean(speech**2)
    if speech_power <= 0:
        raise SceneError("speech material has zero energy; SNR target unreachable")

    positions = geo.embedded_positions()
    has_external = geo.external_mic is not None
    if has_external:
        positions = np.vstack([positions, geo.external_mic])
    n_mics = positions.shape[0]
    n_embedded = geo.n_embedded
    ref_distance = float(np.linalg.norm(geo.source - geo.array_mics[0]))

    # speech images: relative delays, 1/r gains, propeller capsules shielded
    delays = np.empty(n_mics)
    gains = np.empty(n_mics)
    for i in range(n_mics):
        delays[i], gains[i] = steering_delay_gain(geo.source, positions[i], fs, ref_distance)
    rejection = 10.0 ** (cfg.propeller_speech_rejection_db / 20.0)
    gains[N_ARRAY_MICS:n_embedded] *= rejection
    delays -= delays.min()
    speech_image = np.stack(
        [gains[i] * fractional_delay(speech, delays[i]) for i in range(n_mics)]
    )

    # rotor signals and coupled noise images with per-path delays
    duration = n / fs
    rotor_signals = [
        synth_ego_noise(cfg.rotor_speeds_rpm[r], duration, fs, (cfg.seed, r)).samples[0][:n]
        for r in range(N_ROTORS)
    ]
    own = 10.0 ** (cfg.coupling_own_db / 20.0)
    cross = 10.0 ** (cfg.coupling_cross_db / 20.0)
    to_array = 10.0 ** (cfg.coupling_array_db / 20.0)
    noise_image = np.zeros((n_mics, n))
    for r in range(N_ROTORS):
        for i in range(n_mics):
            if N_ARRAY_MICS <= i < n_embedded:
                gain = own if (i - N_ARRAY_MICS) == r else cross
            else:
                gain = to_array
            path_delay, _ = steering_delay_gain(geo.rotors[r], positions[i], fs)
            noise_image[i] += gain * fractional_delay(rotor_signals[r], path_delay)
    # incoherent per-channel part: a random-phase surrogate of the
    # channel's own coherent noise (local turbulence / structure-borne
    # vibration). Same power spectrum, no cross-channel coherence, so no
    # spatial filter can cancel below sensor_noise_db at any frequency.
    floor_gain = 10.0 ** (cfg.sensor_noise_db / 20.0)
    floor_rng = np.random.default_rng((cfg.seed, N_ROTORS))
    for i in range(n_mics):
        spec_i = np.fft.rfft(noise_image[i])
        phases = np.exp(2j * np.pi * floor_rng.uniform(size=spec_i.size))
        surrogate = np.fft.irfft(np.abs(spec_i) * phases, n)
        noise_image[i] = noise_image[i] + floor_gain * surrogate

    # calibrate the embedded noise to the target SNR at the reference channel
    ref_speech_power = np.mean(speech_image[0] ** 2)
    ref_noise_power = np.mean(noise_image[0] ** 2)
    if ref_noise_power <= 0:
        raise SceneError("reference-channel noise image is silent")
    alpha = np.sqrt(ref_speech_power / ref_noise_power / 10.0 ** (cfg.target_snr_db / 10.0))
    noise_image[:n_embedded] *= alpha
    ext = n_embedded if has_external else None
    if has_external:
        ext_speech_power = np.mean(speech_image[ext] ** 2)
        ext_noise_power = np.mean(noise_image[ext] ** 2)
        target_ext = cfg.target_snr_db + cfg.external_snr_offset_db
        alpha_ext = np.sqrt(ext_speech_power / ext_noise_power / 10.0 ** (target_ext / 10.0))
        noise_image[ext] *= alpha_ext

    mixture = speech_image + noise_image
    speech_clip = AudioClip(speech_image, fs)
    noise_clip = AudioClip(noise_image, fs)
    mixture_clip = AudioClip(mixture, fs)
    mask = make_oracle_mask(speech_clip.channel(0), noise_clip.channel(0))

    achieved = 10.0 * np.log10(np.mean(speech_image[0] ** 2) / np.mean(noise_image[0] ** 2))
    manifest = {
        "seed": cfg.seed,
        "sample_rate_hz": fs,
        "duration_s": duration,
        "target_snr_db": cfg.target_snr_db,
        "achieved_snr_db": float(achieved),
        "rotor_speeds_rpm": list(cfg.rotor_speeds_rpm),
        "channels": {
            "array": list(range(N_ARRAY_MICS)),
            "propeller": list(range(N_ARRAY_MICS, n_embedded)),
            "external": ext,
        },
        "reference_channel": 0,
        "coupling_db": {
            "own": cfg.coupling_own_db,
            "cross": cfg.coupling_cross_db,
            "array": cfg.coupling_array_db,
        },
        "propeller_speech_rejection_db": cfg.propeller_speech_rejection_db,
        "sensor_noise_db": cfg.sensor_noise_db,
        "external_snr_offset_db": cfg.external_snr_offset_db if has_external else None,
        "speech_path": str(cfg.speech_path),
    }
    return SceneOutput(
        mixture=mixture_clip,
        speech_image=speech_clip,
        noise_image=noise_clip,
        oracle_mask=mask,
        manifest=manifest,
    )


def write_scene(scene: SceneOutput, out_dir: str | Path) -> dict:
    """Write mixture/speech/noise (embedded channels), optional external
    channel, and the manifest to a scene directory; returns the manifest."""
    import json

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_embedded = len(scene.manifest["channels"]["array"]) + len(
        scene.manifest["channels"]["propeller"]
    )
    fs = scene.mixture.sample_rate_hz
    write_wav(AudioClip(scene.mixture.samples[:n_embedded], fs), out_dir / "mixture.wav", "32f")
    write_wav(AudioClip(scene.speech_image.samples[:n_embedded], fs), out_dir / "speech.wav", "32f")
    write_wav(AudioClip(scene.noise_image.samples[:n_embedded], fs), out_dir / "noise.wav", "32f")
    ext = scene.manifest["channels"]["external"]
    if ext is not None:
        write_wav(AudioClip(scene.mixture.samples[ext : ext + 1], fs), out_dir / "external.wav", "32f")
    manifest = dict(scene.manifest)
    manifest["files"] = {
        "mixture": "mixture.wav",
        "speech": "speech.wav",
        "noise": "noise.wav",
        "external": "external.wav" if ext is not None else None,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


DEFAULT_SNRS_DB = (-20.0, -10.0, 0.0)
DEFAULT_ARRAY_SIZES = (4, 8, 12)


def suite_partition(m_speech_noise: int) -> ChannelPartition:
    """Fig.-3-style partition: first m main-array channels plus the four
    propeller channels as noise references."""
    if m_speech_noise > N_ARRAY_MICS:
        raise SceneError(f"at most {N_ARRAY_MICS} main-array channels available")
    return ChannelPartition(
        speech_noise_channels=tuple(range(m_speech_noise)),
        noise_only_channels=tuple(range(N_ARRAY_MICS, N_ARRAY_MICS + N_ROTORS)),
        ref_channel=0,
    )


@dataclass(frozen=True)
class SweepCell:
    """One grid point of the evaluation sweep."""

    scene: SceneConfig
    partition: ChannelPartition
    spp_mode: str
    method: str

    def key(self) -> dict:
        return {
            "snr_db": self.scene.target_snr_db,
            "m_speech_noise": self.partition.n_speech_noise,
            "m_noise_only": self.partition.n_noise_only,
            "spp_mode": self.spp_mode,
            "method": self.method,
            "seed": self.scene.seed,
        }


def default_suite(speech_path: str = "speech.wav", seed: int = 0) -> list[SweepCell]:
    """The 3x3x3x3 evaluation grid: SNR x array size x SPP mode x method."""
    cells = []
    for snr in DEFAULT_SNRS_DB:
        scene = SceneConfig(speech_path=speech_path, target_snr_db=snr, seed=seed)
        for m_sn in DEFAULT_ARRAY_SIZES:
            part = suite_partition(m_sn)
            for mode in SPP_MODES:
                for method in METHODS:
                    cells.append(SweepCell(scene=scene, partition=part, spp_mode=mode, method=method))
    return cells
