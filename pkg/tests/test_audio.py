import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.io import wavfile

from contamkit.audio import (
    AudioBuffer,
    AudioFormatError,
    FrameGrid,
    SpeechActivity,
    apply_gain,
    convolve,
    mask_to_activity,
    mean_power,
    rasterize,
    read_wav,
    write_wav,
)


def direct_convolution(x, h):
    """O(N*M) reference: y[n] = sum_k h[k] x[n-k], full length."""
    y = np.zeros(len(x) + len(h) - 1)
    for k, hk in enumerate(h):
        y[k : k + len(x)] += hk * x
    return y


def test_read_pcm16_scaling(tmp_path):
    path = tmp_path / "pcm.wav"
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(16000)
        w.writeframes(struct.pack("<3h", 0, 16384, -32768))
    assert read_wav(path).samples.tolist() == [0.0, 0.5, -1.0]


def test_read_rejects_stereo(tmp_path):
    path = tmp_path / "stereo.wav"
    wavfile.write(path, 16000, np.zeros((10, 2), dtype=np.int16))
    with pytest.raises(AudioFormatError, match="channels=2 unsupported"):
        read_wav(path)


def test_read_rejects_other_rates(tmp_path):
    path = tmp_path / "8k.wav"
    wavfile.write(path, 8000, np.zeros(10, dtype=np.int16))
    with pytest.raises(AudioFormatError, match="sample_rate=8000"):
        read_wav(path)


def test_read_rejects_pcm32(tmp_path):
    path = tmp_path / "pcm32.wav"
    wavfile.write(path, 16000, np.zeros(10, dtype=np.int32))
    with pytest.raises(AudioFormatError, match="encoding"):
        read_wav(path)


def test_float32_passthrough(tmp_path):
    path = tmp_path / "f.wav"
    wavfile.write(path, 16000, np.array([0.25, -0.25], dtype=np.float32))
    assert read_wav(path).samples.tolist() == [0.25, -0.25]


def test_write_empty_and_out_of_range(tmp_path):
    write_wav(AudioBuffer([]), tmp_path / "empty.wav")
    assert len(read_wav(tmp_path / "empty.wav")) == 0
    write_wav(AudioBuffer([1.5]), tmp_path / "loud.wav")
    assert read_wav(tmp_path / "loud.wav").samples.tolist() == [1.5]


def test_write_to_missing_directory_names_path(tmp_path):
    with pytest.raises(OSError, match="nope"):
        write_wav(AudioBuffer([0.0]), tmp_path / "nope" / "x.wav")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-4, 4, width=32), max_size=200))
def test_wav_round_trip_is_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "x.wav"
    buf = AudioBuffer(np.array(values, dtype=np.float32))
    write_wav(buf, path)
    back = read_wav(path)
    assert back.samples.astype(np.float32).tobytes() == buf.samples.astype(np.float32).tobytes()


def test_buffer_invariants():
    with pytest.raises(ValueError):
        AudioBuffer(np.zeros((4, 2)))
    with pytest.raises(ValueError):
        AudioBuffer([0.0, np.nan])
    with pytest.raises(ValueError):
        AudioBuffer([0.0], sample_rate=0)
    buf = AudioBuffer([1.0, 2.0])
    with pytest.raises(ValueError):
        buf.samples[0] = 3.0


def test_activity_invariants():
    with pytest.raises(ValueError):
        SpeechActivity(((1.0, 0.5),))
    with pytest.raises(ValueError):
        SpeechActivity(((0.0, 1.0), (0.5, 2.0)))
    SpeechActivity(((0.0, 1.0), (1.0, 2.0)))  # touching is fine
    merged = SpeechActivity.from_intervals([(1.0, 2.0), (0.0, 1.5), (3.0, 4.0)])
    assert merged.regions == ((0.0, 2.0), (3.0, 4.0))
    with pytest.raises(ValueError):
        merged.check_within(3.5)


def test_convolve_examples():
    x = AudioBuffer([1.0, 0.0, 0.0])
    assert convolve(x, AudioBuffer([0.5, 0.25])).samples.tolist() == [0.5, 0.25, 0.0]
    rng = np.random.default_rng(0)
    y = AudioBuffer(rng.standard_normal(100))
    np.testing.assert_allclose(convolve(y, AudioBuffer([1.0])).samples, y.samples, rtol=0, atol=1e-9)
    np.testing.assert_allclose(
        convolve(y, AudioBuffer([1.0, 0.0, 0.0])).samples, y.samples, rtol=0, atol=1e-9
    )


def test_convolve_matches_direct_sum():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(4096)
    h = rng.standard_normal(512)
    got = convolve(AudioBuffer(x), AudioBuffer(h)).samples
    ref = direct_convolution(x, h)[: len(x)]
    assert len(got) == len(x)
    assert np.max(np.abs(got - ref)) <= 1e-6 * np.max(np.abs(ref))


def test_convolve_errors():
    with pytest.raises(ValueError, match="sample rate"):
        convolve(AudioBuffer([1.0], 16000), AudioBuffer([1.0], 8000))
    with pytest.raises(ValueError):
        convolve(AudioBuffer([1.0]), AudioBuffer([]))


@settings(max_examples=25, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.integers(1, 300),
    st.integers(1, 64),
)
def test_convolve_linearity(seed, a, b, n, m):
    rng = np.random.default_rng(seed)
    x, y, h = rng.standard_normal(n), rng.standard_normal(n), AudioBuffer(rng.standard_normal(m))
    lhs = convolve(AudioBuffer(a * x + b * y), h).samples
    rhs = a * convolve(AudioBuffer(x), h).samples + b * convolve(AudioBuffer(y), h).samples
    scale = max(1.0, np.max(np.abs(lhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-6 * scale


def test_mean_power_examples():
    assert mean_power(AudioBuffer(np.full(100, 0.5))) == 0.25
    assert mean_power(AudioBuffer([1.0, -1.0, 1.0, -1.0])) == 1.0
    x = np.random.default_rng(2).standard_normal(1000)
    assert abs(mean_power(AudioBuffer(x)) - sum(v * v for v in x) / len(x)) <= 1e-9


def test_mean_power_frame_mask():
    x = np.concatenate([np.full(256, 1.0), np.full(256, 3.0), np.full(100, 9.0)])
    buf = AudioBuffer(x)
    assert mean_power(buf, np.array([True, False])) == 1.0
    assert mean_power(buf, np.array([False, True])) == 9.0
    assert mean_power(buf, np.array([False, False]), return_count=True) == (0.0, 0)
    assert mean_power(AudioBuffer([]), return_count=True) == (0.0, 0)
    with pytest.raises(ValueError):
        mean_power(buf, np.ones(3, dtype=bool))


def test_apply_gain():
    x = AudioBuffer(np.random.default_rng(3).standard_normal(64))
    assert np.array_equal(apply_gain(x, 1.0).samples, x.samples)
    assert not np.any(apply_gain(x, 0.0).samples)
    assert mean_power(apply_gain(x, 2.0)) == pytest.approx(4 * mean_power(x), rel=1e-12)
    for bad in (-1.0, np.inf, np.nan):
        with pytest.raises(ValueError):
            apply_gain(x, bad)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1e3))
def test_gain_scales_power_quadratically(seed, g):
    x = AudioBuffer(np.random.default_rng(seed).standard_normal(257))
    assert mean_power(apply_gain(x, g)) == pytest.approx(g * g * mean_power(x), rel=1e-9, abs=0)


def test_rasterize_majority_rule():
    grid = FrameGrid(4)
    # frame 0 fully, frame 1 exactly half (not > 50 %), frame 2 60 %
    act = SpeechActivity(((0.0, 0.024), (0.032 + 0.0064, 0.048)))
    assert rasterize(act, grid).tolist() == [True, False, True, False]


def test_mask_to_activity_round_trip():
    mask = np.array([0, 1, 1, 0, 1, 0, 0, 1], dtype=bool)
    act = mask_to_activity(mask)
    assert np.array_equal(rasterize(act, FrameGrid(8)), mask)


def test_frame_grid():
    assert FrameGrid.for_duration(0.048).num_frames == 3
    assert FrameGrid.for_duration(0.047).num_frames == 2
    assert FrameGrid.for_audio(AudioBuffer(np.zeros(16000))).num_frames == 62
