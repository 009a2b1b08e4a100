import struct

import numpy as np
import pytest
from scipy.io import wavfile

from egomwf.audio_io import AudioClip, AudioError, read_wav, resample, write_wav


def test_roundtrip_shape_and_rate(tmp_path, rng):
    x = rng.uniform(-0.5, 0.5, (2, 160))
    write_wav(AudioClip(x, 16000), tmp_path / "t.wav", "16")
    clip = read_wav(tmp_path / "t.wav")
    assert clip.samples.shape == (2, 160)
    assert clip.sample_rate_hz == 16000


def test_int16_full_scale_normalization(tmp_path):
    wavfile.write(tmp_path / "fs.wav", 16000, np.array([32767, -32768, 0], dtype=np.int16))
    clip = read_wav(tmp_path / "fs.wav")
    assert clip.samples[0, 0] == pytest.approx(32767 / 32768, abs=1e-12)
    assert clip.samples[0, 1] == -1.0


def test_24bit_read_normalization(tmp_path):
    vals = [8388607, -8388608, 4194304, 0]
    data = b"".join(struct.pack("<i", v)[:3] for v in vals)
    hdr = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    hdr += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, 16000, 16000 * 3, 3, 24)
    hdr += b"data" + struct.pack("<I", len(data))
    (tmp_path / "t24.wav").write_bytes(hdr + data)
    clip = read_wav(tmp_path / "t24.wav")
    assert clip.samples[0, 0] == pytest.approx(8388607 / 8388608, abs=1e-6)
    assert clip.samples[0, 1] == -1.0
    assert clip.samples[0, 2] == pytest.approx(0.5, abs=1e-6)


def test_16bit_roundtrip_quantization_error(tmp_path, rng):
    x = rng.uniform(-1.0, 1.0, (3, 4000))
    clip = AudioClip(x, 16000)
    write_wav(clip, tmp_path / "q.wav", "16")
    back = read_wav(tmp_path / "q.wav")
    assert np.max(np.abs(back.samples - x)) <= 2.0**-15


def test_32f_roundtrip_bit_exact(tmp_path, rng):
    x = rng.uniform(-1.0, 1.0, (2, 500)).astype(np.float32).astype(np.float64)
    write_wav(AudioClip(x, 44100), tmp_path / "f.wav", "32f")
    back = read_wav(tmp_path / "f.wav")
    assert np.array_equal(back.samples, x)
    assert back.sample_rate_hz == 44100


def test_silence_file_length(tmp_path):
    write_wav(AudioClip(np.zeros((1, 100)), 16000), tmp_path / "s.wav", "16")
    assert (tmp_path / "s.wav").stat().st_size == 44 + 100 * 2


def test_write_clamps_out_of_range(tmp_path):
    write_wav(AudioClip(np.array([[1.5, -2.0]]), 16000), tmp_path / "c.wav", "16")
    rate, data = wavfile.read(tmp_path / "c.wav")
    assert data[0] == 32767
    assert data[1] == -32768


def test_read_errors(tmp_path):
    with pytest.raises(AudioError):
        read_wav(tmp_path / "missing.wav")
    (tmp_path / "junk.wav").write_bytes(b"not a wav at all")
    with pytest.raises(AudioError):
        read_wav(tmp_path / "junk.wav")


def test_write_empty_rejected(tmp_path):
    with pytest.raises(AudioError):
        write_wav(AudioClip(np.zeros((1, 0)), 16000), tmp_path / "e.wav", "16")


def test_clip_invariants():
    with pytest.raises(AudioError):
        AudioClip(np.array([[np.nan, 0.0]]), 16000)
    with pytest.raises(AudioError):
        AudioClip(np.zeros((1, 10)), 0)


def test_resample_identity(rng):
    clip = AudioClip(rng.standard_normal((2, 1000)), 16000)
    assert resample(clip, 16000) is clip


def test_resample_sine_amplitude():
    t = np.arange(int(44100 * 1.5)) / 44100
    clip = AudioClip(np.sin(2 * np.pi * 1000 * t)[None, :], 44100)
    out = resample(clip, 16000)
    assert out.n_frames == -(-clip.n_frames * 160 // 441)
    seg = out.samples[0, 3000:-3000]
    amp = np.sqrt(2 * np.mean(seg**2))
    assert abs(amp - 1.0) <= 0.01


def test_resample_stopband_attenuation():
    t = np.arange(int(44100 * 1.5)) / 44100
    clip = AudioClip(np.sin(2 * np.pi * 10000 * t)[None, :], 44100)
    out = resample(clip, 16000)
    seg = out.samples[0, 3000:-3000]
    atten_db = 10 * np.log10(np.mean(seg**2) / 0.5 + 1e-300)
    assert atten_db <= -40.0


def test_resample_linearity(rng):
    x = AudioClip(rng.standard_normal((1, 5000)), 44100)
    y = AudioClip(rng.standard_normal((1, 5000)), 44100)
    mix = AudioClip(2.0 * x.samples + 3.0 * y.samples, 44100)
    lhs = resample(mix, 16000).samples
    rhs = 2.0 * resample(x, 16000).samples + 3.0 * resample(y, 16000).samples
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(rhs)))


def test_resample_preserves_channels(rng):
    clip = AudioClip(rng.standard_normal((5, 4410)), 44100)
    out = resample(clip, 16000)
    assert out.n_channels == 5
    for c in range(5):
        single = resample(AudioClip(clip.samples[c : c + 1], 44100), 16000)
        assert np.array_equal(out.samples[c], single.samples[0])


def test_resample_rejects_bad_ratios(rng):
    clip = AudioClip(rng.standard_normal((1, 1000)), 44100)
    with pytest.raises(AudioError):
        resample(clip, 0)
    with pytest.raises(AudioError):
        resample(AudioClip(clip.samples, 44101), 16000)  # reduces to 16000/44101
