"""Enhancement configuration: typed container plus JSON schema parsing.

Parsing collects every violation before failing so a bad config file is
reported in one pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .filters import METHODS, ChannelPartition, FilterError
from .spp import SppError, SppParams
from .stft import StftError, StftParams

SPP_MODES = ("internal", "external", "oracle")


class ConfigError(Exception):
    """Carries the full list of violations found in a config."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {v}" for v in violations))


@dataclass(frozen=True)
class EnhanceConfig:
    partition: ChannelPartition
    stft: StftParams = field(default_factory=StftParams)
    spp: SppParams = field(default_factory=SppParams)
    spp_mode: str = "internal"
    spp_channel: int | None = None
    method: str = "pk-mwf"
    delta: float = 1e-6
    input_path: str | None = None
    output_path: str | None = None
    report_path: str | None = None
    external_path: str | None = None
    speech_ref_path: str | None = None
    noise_ref_path: str | None = None

    def __post_init__(self):
        violations = validate_semantics(self)
        if violations:
            raise ConfigError(violations)

    def describe(self) -> dict:
        return {
            "method": self.method,
            "spp_mode": self.spp_mode,
            "spp_channel": self.spp_channel,
            "partition": self.partition.describe(),
            "delta": self.delta,
            "stft": {
                "fft_size": self.stft.fft_size,
                "hop": self.stft.hop,
                "window": self.stft.window,
                "sample_rate_hz": self.stft.sample_rate_hz,
            },
        }


def validate_semantics(cfg: EnhanceConfig) -> list[str]:
    violations = []
    if cfg.method not in METHODS:
        violations.append(f"method must be one of {METHODS}, got {cfg.method!r}")
    if cfg.spp_mode not in SPP_MODES:
        violations.append(f"spp_mode must be one of {SPP_MODES}, got {cfg.spp_mode!r}")
    if cfg.delta < 0:
        violations.append(f"delta must be >= 0, got {cfg.delta}")
    if cfg.spp_channel is not None and cfg.spp_channel < 0:
        violations.append(f"spp_channel must be >= 0, got {cfg.spp_channel}")
    if cfg.spp_mode == "oracle" and (cfg.speech_ref_path is None or cfg.noise_ref_path is None) and cfg.input_path is not None:
        violations.append("oracle SPP mode needs ground-truth speech/noise component paths")
    return violations


def _parse_section(raw: dict, key: str, builder, errors: list[str], default):
    section = raw.get(key)
    if section is None:
        return default() if callable(default) else default
    if not isinstance(section, dict):
        errors.append(f"{key}: expected an object, got {type(section).__name__}")
        return default() if callable(default) else default
    try:
        return builder(section)
    except (TypeError, StftError, SppError, FilterError) as exc:
        errors.append(f"{key}: {exc}")
        return default() if callable(default) else default


def _build_stft(section: dict) -> StftParams:
    allowed = {"fft_size", "hop", "window", "sample_rate_hz"}
    unknown = set(section) - allowed
    if unknown:
        raise TypeError(f"unknown keys {sorted(unknown)}")
    return StftParams(**section)


def _build_spp(section: dict) -> SppParams:
    section = dict(section)
    if "xi_h1_db" in section:
        section["xi_h1"] = 10.0 ** (float(section.pop("xi_h1_db")) / 10.0)
    allowed = {"xi_h1", "alpha_psd", "spp_cap", "init_frames", "threshold"}
    unknown = set(section) - allowed
    if unknown:
        raise TypeError(f"unknown keys {sorted(unknown)}")
    return SppParams(**section)


def _build_partition(section: dict) -> ChannelPartition:
    allowed = {"speech_noise_channels", "noise_only_channels", "ref_channel"}
    unknown = set(section) - allowed
    if unknown:
        raise TypeError(f"unknown keys {sorted(unknown)}")
    return ChannelPartition(
        speech_noise_channels=tuple(section.get("speech_noise_channels", ())),
        noise_only_channels=tuple(section.get("noise_only_channels", ())),
        ref_channel=int(section.get("ref_channel", 0)),
    )


def parse_config(raw: dict, overrides: dict | None = None) -> EnhanceConfig:
    """Build an EnhanceConfig from a JSON-shaped dict, collecting all errors."""
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError([f"top level must be an object, got {type(raw).__name__}"])
    raw = dict(raw)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})

    stft = _parse_section(raw, "stft", _build_stft, errors, StftParams)
    spp = _parse_section(raw, "spp", _build_spp, errors, SppParams)
    partition = None
    if "partition" not in raw:
        errors.append("partition: required section is missing")
    else:
        partition = _parse_section(raw, "partition", _build_partition, errors, lambda: None)

    known = {
        "stft", "spp", "partition", "spp_mode", "spp_channel", "method", "delta",
        "input_path", "output_path", "report_path", "external_path",
        "speech_ref_path", "noise_ref_path",
    }
    unknown = set(raw) - known
    if unknown:
        errors.append(f"unknown top-level keys: {sorted(unknown)}")

    if errors or partition is None:
        raise ConfigError(errors or ["partition: could not be parsed"])
    try:
        return EnhanceConfig(
            partition=partition,
            stft=stft,
            spp=spp,
            spp_mode=raw.get("spp_mode", "internal"),
            spp_channel=raw.get("spp_channel"),
            method=raw.get("method", "pk-mwf"),
            delta=float(raw.get("delta", 1e-6)),
            input_path=raw.get("input_path"),
            output_path=raw.get("output_path"),
            report_path=raw.get("report_path"),
            external_path=raw.get("external_path"),
            speech_ref_path=raw.get("speech_ref_path"),
            noise_ref_path=raw.get("noise_ref_path"),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError([str(exc)]) from exc


def load_config(path: str | Path, overrides: dict | None = None) -> EnhanceConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    return parse_config(raw, overrides)
