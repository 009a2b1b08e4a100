"""Command-line surface: enhance, simulate, evaluate, sweep.

Exit codes: 0 success, 2 configuration/usage error, 3 processing error.
JSON for configs and reports, CSV for the sweep table. EGOMWF_THREADS
caps the worker count of the sweep driver.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import scenegen
from .audio_io import AudioClip, AudioError, read_wav, write_wav
from .config import ConfigError, EnhanceConfig, load_config
from .filters import METHODS
from .metrics import MetricsError, evaluate, snr_db, stoi
from .pipeline import EnhanceResult, PipelineError, enhance
from .scenegen import (
    DEFAULT_ARRAY_SIZES,
    DEFAULT_SNRS_DB,
    SPP_MODES,
    SceneConfig,
    SceneError,
    SweepCell,
    default_suite,
    render_scene,
    suite_partition,
    write_scene,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROCESSING = 3

PROCESSING_ERRORS = (AudioError, PipelineError, MetricsError, SceneError, OSError, ValueError)


def _fail_config(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def _load_multichannel(path: str, external: str | None) -> AudioClip:
    clip = read_wav(path)
    if external is None:
        return clip
    ext = read_wav(external)
    if ext.sample_rate_hz != clip.sample_rate_hz:
        raise AudioError("external microphone rate differs from the input")
    n = min(clip.n_frames, ext.n_frames)
    merged = np.vstack([clip.samples[:, :n], ext.samples[:1, :n]])
    return AudioClip(merged, clip.sample_rate_hz)


def _enhance_report(cfg: EnhanceConfig, result: EnhanceResult, elapsed: float) -> dict:
    counts = result.status_counts()
    return {
        "config": cfg.describe(),
        "per_bin_status_counts": counts,
        "spp_activity_fraction": result.mask.activity_fraction(),
        "filter_compute_seconds": result.filterbank.compute_seconds,
        "elapsed_seconds": elapsed,
    }


def cmd_enhance(args: argparse.Namespace) -> int:
    overrides = {
        "method": args.method,
        "spp_mode": args.spp_mode,
        "spp_channel": args.spp_channel,
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        return _fail_config(str(exc))
    try:
        external = args.external or cfg.external_path
        clip = _load_multichannel(args.input, external)
        if cfg.spp_mode == "external" and cfg.spp_channel is None and external is not None:
            cfg = replace(cfg, spp_channel=clip.n_channels - 1)
        speech_ref = noise_ref = None
        speech_path = args.speech_ref or cfg.speech_ref_path
        noise_path = args.noise_ref or cfg.noise_ref_path
        if cfg.spp_mode == "oracle" and not (speech_path and noise_path):
            return _fail_config("oracle SPP mode needs --speech-ref and --noise-ref")
        if speech_path and noise_path:
            speech_ref = read_wav(speech_path)
            noise_ref = read_wav(noise_path)
        t0 = time.perf_counter()
        result = enhance(clip, cfg, speech_ref, noise_ref)
        elapsed = time.perf_counter() - t0
        write_wav(result.enhanced, args.output, "32f")
        if args.shadow_speech_out and result.shadow_speech is not None:
            write_wav(result.shadow_speech, args.shadow_speech_out, "32f")
        if args.shadow_noise_out and result.shadow_noise is not None:
            write_wav(result.shadow_noise, args.shadow_noise_out, "32f")
        if args.report:
            Path(args.report).write_text(
                json.dumps(_enhance_report(cfg, result, elapsed), indent=2, sort_keys=True)
            )
    except ConfigError as exc:
        return _fail_config(str(exc))
    except PROCESSING_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    if not args.default_suite and not args.scene_config:
        return _fail_config("need --scene-config or --default-suite")
    out_dir = Path(args.output_dir)
    try:
        if args.default_suite:
            cells = default_suite(args.speech, seed=args.seed)
            manifest_dir = out_dir / "manifests"
            manifest_dir.mkdir(parents=True, exist_ok=True)
            rendered: dict[float, dict] = {}
            for idx, cell in enumerate(cells):
                snr = cell.scene.target_snr_db
                if snr not in rendered:
                    scene_dir = out_dir / "scenes" / f"snr_{snr:+.0f}dB"
                    scene = render_scene(replace(cell.scene, duration_s=args.duration))
                    rendered[snr] = {"dir": str(scene_dir), "manifest": write_scene(scene, scene_dir)}
                entry = dict(cell.key())
                entry["scene_dir"] = rendered[snr]["dir"]
                (manifest_dir / f"cell_{idx:03d}.json").write_text(
                    json.dumps(entry, indent=2, sort_keys=True)
                )
            print(f"wrote {len(cells)} cell manifests and {len(rendered)} scenes under {out_dir}")
        else:
            cfg_path = Path(args.scene_config)
            if not cfg_path.is_file():
                return _fail_config(f"scene config not found: {cfg_path}")
            raw = json.loads(cfg_path.read_text())
            raw.setdefault("speech_path", args.speech)
            cfg = SceneConfig(**raw)
            if args.duration is not None:
                cfg = replace(cfg, duration_s=args.duration)
            scene = render_scene(cfg)
            write_scene(scene, out_dir)
            print(f"wrote scene under {out_dir}")
    except (TypeError, json.JSONDecodeError) as exc:
        return _fail_config(f"bad scene config: {exc}")
    except PROCESSING_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    return EXIT_OK


def _reference_channel(path: str) -> AudioClip:
    """First (reference) channel of a possibly multichannel WAV."""
    clip = read_wav(path)
    return clip.channel(0) if clip.n_channels > 1 else clip


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        clean = _reference_channel(args.clean)
        processed = _reference_channel(args.processed)
        noisy = _reference_channel(args.noisy)
        report: dict = {
            "stoi_in": stoi(clean, noisy),
            "stoi_out": stoi(clean, processed),
            "flags": [],
        }
        report["stoi_improvement"] = report["stoi_out"] - report["stoi_in"]
        if args.shadow_speech and args.shadow_noise:
            shadow_s = _reference_channel(args.shadow_speech)
            shadow_n = _reference_channel(args.shadow_noise)
            noise_in = AudioClip(noisy.samples - clean.samples, clean.sample_rate_hz)
            report["snr_in_db"] = snr_db(clean, noise_in)
            report["snr_out_db"] = snr_db(shadow_s, shadow_n)
            report["snr_improvement_db"] = report["snr_out_db"] - report["snr_in_db"]
        else:
            report["snr_in_db"] = report["snr_out_db"] = report["snr_improvement_db"] = None
            report["flags"].append("no_ground_truth")
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True))
    except PROCESSING_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    print(f"wrote {args.report}")
    return EXIT_OK


def run_cell(scene: "scenegen.SceneOutput", cell: SweepCell) -> dict:
    """One sweep cell on an already-rendered scene; returns the CSV row."""
    manifest = scene.manifest
    ext = manifest["channels"]["external"]
    cfg = EnhanceConfig(
        partition=cell.partition,
        spp_mode=cell.spp_mode,
        spp_channel=ext if cell.spp_mode == "external" else None,
        method=cell.method,
    )
    result = enhance(scene.mixture, cfg, scene.speech_image, scene.noise_image)
    report = evaluate(
        result,
        scene.speech_image.channel(manifest["reference_channel"]),
        scene.mixture.channel(manifest["reference_channel"]),
    )
    row = cell.key()
    row.update(
        {
            "snr_in_db": report.snr_in_db,
            "snr_out_db": report.snr_out_db,
            "snr_improvement_db": report.snr_improvement_db,
            "stoi_in": report.stoi_in,
            "stoi_out": report.stoi_out,
            "stoi_improvement": report.stoi_improvement,
            "status": "ok",
        }
    )
    return row


def _run_scene_group(task: tuple[SceneConfig, list[SweepCell]]) -> list[dict]:
    scene_cfg, cells = task
    scene = render_scene(scene_cfg)
    rows = []
    for cell in cells:
        try:
            rows.append(run_cell(scene, cell))
        except PROCESSING_ERRORS as exc:
            row = cell.key()
            row["status"] = f"failed: {exc}"
            rows.append(row)
    return rows


CSV_COLUMNS = [
    "seed", "snr_db", "m_speech_noise", "m_noise_only", "spp_mode", "method",
    "snr_in_db", "snr_out_db", "snr_improvement_db",
    "stoi_in", "stoi_out", "stoi_improvement", "status",
]


def run_sweep(
    speech_path: str,
    seeds: list[int],
    duration_s: float | None = None,
    snrs: tuple[float, ...] = DEFAULT_SNRS_DB,
    workers: int | None = None,
) -> list[dict]:
    """The full grid for every seed; rows come back in deterministic order."""
    tasks: list[tuple[SceneConfig, list[SweepCell]]] = []
    for seed in seeds:
        by_scene: dict[float, list[SweepCell]] = {}
        for cell in default_suite(speech_path, seed=seed):
            if cell.scene.target_snr_db not in snrs:
                continue
            by_scene.setdefault(cell.scene.target_snr_db, []).append(cell)
        for snr, cells in by_scene.items():
            scene_cfg = replace(cells[0].scene, duration_s=duration_s)
            tasks.append((scene_cfg, cells))

    if workers is None:
        workers = int(os.environ.get("EGOMWF_THREADS", "0")) or min(4, os.cpu_count() or 1)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            grouped = list(pool.map(_run_scene_group, tasks))
    else:
        grouped = [_run_scene_group(t) for t in tasks]
    rows = [row for group in grouped for row in group]
    rows.sort(key=lambda r: (r["seed"], r["snr_db"], r["m_speech_noise"], r["spp_mode"], r["method"]))
    return rows


def write_sweep_outputs(rows: list[dict], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.json").write_text(json.dumps(rows, indent=2, sort_keys=True))
    with open(out_dir / "results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt_csv(row.get(k)) for k in CSV_COLUMNS})


def _fmt_csv(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        seeds = [int(s) for s in args.seeds.split(",")]
    except ValueError:
        return _fail_config(f"bad --seeds list: {args.seeds!r}")
    try:
        t0 = time.perf_counter()
        rows = run_sweep(args.speech, seeds, duration_s=args.duration, workers=args.workers)
        elapsed = time.perf_counter() - t0
        write_sweep_outputs(rows, Path(args.output_dir))
    except PROCESSING_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    failures = [r for r in rows if r["status"] != "ok"]
    print(f"{len(rows)} cells in {elapsed:.1f}s, {len(failures)} failed")
    for row in failures:
        print(f"  failed cell: {row}")
    return EXIT_PROCESSING if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="egomwf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="run the enhancement pipeline on a WAV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--report")
    p.add_argument("--spp-mode", dest="spp_mode", choices=SPP_MODES)
    p.add_argument("--spp-channel", dest="spp_channel", type=int)
    p.add_argument("--external", help="external-microphone WAV appended as the last channel")
    p.add_argument("--speech-ref", dest="speech_ref", help="ground-truth speech components WAV")
    p.add_argument("--noise-ref", dest="noise_ref", help="ground-truth noise components WAV")
    p.add_argument("--shadow-speech-out", dest="shadow_speech_out",
                   help="write the shadow-filtered speech component here")
    p.add_argument("--shadow-noise-out", dest="shadow_noise_out",
                   help="write the shadow-filtered noise component here")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("simulate", help="render synthetic scenes")
    p.add_argument("--scene-config", dest="scene_config")
    p.add_argument("--default-suite", dest="default_suite", action="store_true")
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--speech", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="objective metrics for a processed file")
    p.add_argument("--clean", required=True)
    p.add_argument("--processed", required=True)
    p.add_argument("--noisy", required=True)
    p.add_argument("--shadow-speech", dest="shadow_speech")
    p.add_argument("--shadow-noise", dest="shadow_noise")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="simulate + enhance + evaluate the whole grid")
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--speech", required=True)
    p.add_argument("--seeds", default="0")
    p.add_argument("--duration", type=float)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
