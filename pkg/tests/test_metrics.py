import numpy as np
import pytest

from egomwf.audio_io import AudioClip
from egomwf.config import EnhanceConfig
from egomwf.metrics import SNR_CAP_DB, MetricsError, evaluate, snr_db, stoi
from egomwf.pipeline import enhance
from egomwf.scenegen import suite_partition


def _clip(x, rate=16000):
    return AudioClip(np.asarray(x, dtype=float)[None, :], rate)


def test_snr_closed_form(rng):
    s = rng.standard_normal(8000)
    s *= 1.0 / np.sqrt(np.mean(s**2))
    n = rng.standard_normal(8000)
    n *= np.sqrt(0.1) / np.sqrt(np.mean(n**2))
    assert snr_db(_clip(s), _clip(n)) == pytest.approx(10.0, abs=1e-12)


def test_snr_equal_components(rng):
    x = rng.standard_normal(1000)
    assert snr_db(_clip(x), _clip(x)) == pytest.approx(0.0, abs=1e-12)


def test_snr_caps(rng):
    x = rng.standard_normal(100)
    assert snr_db(_clip(x), _clip(np.zeros(100))) == SNR_CAP_DB
    assert snr_db(_clip(np.zeros(100)), _clip(x)) == -SNR_CAP_DB


def test_snr_scale_invariance(rng):
    s = rng.standard_normal(500)
    n = rng.standard_normal(500)
    assert snr_db(_clip(3.7 * s), _clip(3.7 * n)) == pytest.approx(
        snr_db(_clip(s), _clip(n)), abs=1e-12
    )


def test_snr_length_mismatch(rng):
    with pytest.raises(MetricsError):
        snr_db(_clip(np.ones(10)), _clip(np.ones(11)))


def test_scene_ground_truth_snr(default_scene):
    got = snr_db(default_scene.speech_image.channel(0), default_scene.noise_image.channel(0))
    assert got == pytest.approx(-10.0, abs=0.1)


def test_stoi_self_identity(speech_clip):
    ref = speech_clip.channel(0)
    assert stoi(ref, ref, 16000) == pytest.approx(1.0, abs=1e-10)


def test_stoi_gain_invariance(speech_clip):
    ref = speech_clip.channel(0)
    half = AudioClip(0.5 * ref.samples, 16000)
    assert stoi(ref, half, 16000) == pytest.approx(1.0, abs=1e-10)
    double_ref = AudioClip(2.0 * ref.samples, 16000)
    noisy = AudioClip(ref.samples + 0.01 * np.sin(np.arange(ref.n_frames)), 16000)
    scaled_noisy = AudioClip(2.0 * noisy.samples, 16000)
    assert stoi(double_ref, scaled_noisy, 16000) == pytest.approx(
        stoi(ref, noisy, 16000), abs=1e-10
    )


def test_stoi_noise_monotonicity(speech_clip, rng):
    ref = speech_clip.channel(0)
    p = np.mean(ref.samples**2)
    noise = rng.standard_normal(ref.n_frames)
    noise /= np.sqrt(np.mean(noise**2))
    scores = []
    for snr in (10.0, 0.0, -10.0):
        level = np.sqrt(p / 10 ** (snr / 10))
        noisy = AudioClip(ref.samples + level * noise[None, :], 16000)
        scores.append(stoi(ref, noisy, 16000))
    assert scores[0] > scores[1] > scores[2]


def test_stoi_rejects_bad_inputs(rng):
    with pytest.raises(MetricsError):
        stoi(_clip(np.zeros(16000)), _clip(rng.standard_normal(16000)), 16000)
    with pytest.raises(MetricsError):
        stoi(_clip(rng.standard_normal(100)), _clip(rng.standard_normal(100)), 16000)
    with pytest.raises(MetricsError):
        stoi(_clip(rng.standard_normal(16000)), _clip(rng.standard_normal(15000)), 16000)


def test_stoi_too_little_speech(rng):
    # loud click followed by silence: everything but a few frames is removed
    x = np.zeros(16000)
    x[100:200] = 1.0
    with pytest.raises(MetricsError):
        stoi(_clip(x), _clip(x), 16000)


def test_evaluate_passthrough_filter(default_scene):
    cfg = EnhanceConfig(
        partition=suite_partition(8), spp_mode="oracle", method="pk-mwf", delta=1e-6
    )
    result = enhance(
        default_scene.mixture, cfg, default_scene.speech_image, default_scene.noise_image
    )
    # overwrite with an identity filter on the reference channel
    w = np.zeros_like(result.filterbank.weights)
    w[:, 0] = 1.0
    from dataclasses import replace

    from egomwf.pipeline import EnhanceResult, apply_filterbank
    from egomwf.stft import StftGrid, analyze, synthesize

    fb = replace(result.filterbank, weights=w)
    order = list(fb.partition.ordered_channels)
    grid = analyze(default_scene.mixture).select_channels(order)

    def synth(g):
        return synthesize(StftGrid(g[:, :, None], grid.params, grid.n_samples))

    passthrough = EnhanceResult(
        enhanced=synth(apply_filterbank(grid, fb)),
        filterbank=fb,
        mask=result.mask,
        shadow_speech=synth(
            apply_filterbank(analyze(default_scene.speech_image).select_channels(order), fb)
        ),
        shadow_noise=synth(
            apply_filterbank(analyze(default_scene.noise_image).select_channels(order), fb)
        ),
    )
    report = evaluate(
        passthrough,
        default_scene.speech_image.channel(0),
        default_scene.mixture.channel(0),
    )
    assert report.snr_improvement_db == pytest.approx(0.0, abs=0.01)
    assert report.stoi_improvement == pytest.approx(0.0, abs=0.01)


def test_evaluate_zero_filter_flags(default_scene):
    from dataclasses import replace

    cfg = EnhanceConfig(partition=suite_partition(4), spp_mode="oracle", method="pk-mwf")
    result = enhance(
        default_scene.mixture, cfg, default_scene.speech_image, default_scene.noise_image
    )
    zeroed = replace(
        result,
        enhanced=AudioClip(np.zeros_like(result.enhanced.samples), 16000),
        shadow_speech=AudioClip(np.zeros_like(result.enhanced.samples), 16000),
        shadow_noise=AudioClip(np.zeros_like(result.enhanced.samples), 16000),
    )
    report = evaluate(
        zeroed, default_scene.speech_image.channel(0), default_scene.mixture.channel(0)
    )
    assert "snr_capped" in report.flags
    assert report.stoi_out <= 0.1


def test_evaluate_without_shadows(default_scene):
    cfg = EnhanceConfig(partition=suite_partition(4), spp_mode="internal", method="mwf")
    result = enhance(default_scene.mixture, cfg)
    report = evaluate(
        result, default_scene.speech_image.channel(0), default_scene.mixture.channel(0)
    )
    assert report.snr_in_db is None
    assert report.snr_improvement_db is None
    assert "no_ground_truth" in report.flags
    assert 0.0 <= report.stoi_in <= 1.0


def test_evaluate_end_to_end_improves(default_scene):
    cfg = EnhanceConfig(partition=suite_partition(8), spp_mode="oracle", method="pk-mwf")
    result = enhance(
        default_scene.mixture, cfg, default_scene.speech_image, default_scene.noise_image
    )
    report = evaluate(
        result, default_scene.speech_image.channel(0), default_scene.mixture.channel(0)
    )
    assert report.snr_improvement_db > 0.0
    assert report.stoi_improvement > 0.0
    assert report.snr_improvement_db == pytest.approx(
        report.snr_out_db - report.snr_in_db, abs=1e-12
    )
    as_dict = report.to_dict()
    assert as_dict["method"] == "pk-mwf"
    assert as_dict["spp_mode"] == "oracle"
