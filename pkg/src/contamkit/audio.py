"""Mono audio buffers, speech-activity regions, WAV I/O and basic signal arithmetic."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.io import wavfile
from scipy.signal import oaconvolve

SAMPLE_RATE = 16000
FRAME_DURATION = 0.016
PCM16_SCALE = 32768.0


class AudioFormatError(ValueError):
    """Raised when a WAV file cannot be ingested (channels, rate or encoding)."""


def _frozen(x: np.ndarray) -> np.ndarray:
    x.setflags(write=False)
    return x


@dataclass(frozen=True)
class AudioBuffer:
    """Single-channel signal in linear amplitude.

    ``samples`` is stored as a read-only float64 array, so a buffer can be
    shared between workers without copying.
    """

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError(f"audio must be single channel, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("audio samples must be finite")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"invalid sample rate {self.sample_rate}")
        object.__setattr__(self, "samples", _frozen(x))
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate)


@dataclass(frozen=True)
class SpeechActivity:
    """Sorted, non-overlapping speech regions in seconds; touching regions are allowed."""

    regions: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        regions = tuple((float(on), float(off)) for on, off in self.regions)
        prev_off = 0.0
        for on, off in regions:
            if not (0.0 <= on < off):
                raise ValueError(f"invalid region ({on}, {off})")
            if on < prev_off:
                raise ValueError(f"regions overlap or are unsorted near {on}")
            prev_off = off
        object.__setattr__(self, "regions", regions)

    @classmethod
    def from_intervals(cls, intervals: Iterable[Sequence[float]]) -> "SpeechActivity":
        """Build from possibly unsorted / overlapping intervals by taking their union."""
        merged = []
        for on, off in sorted((float(a), float(b)) for a, b in intervals):
            if off <= on:
                continue
            if merged and on <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], off)
            else:
                merged.append([on, off])
        return cls(tuple((a, b) for a, b in merged))

    def __len__(self) -> int:
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    @property
    def end(self) -> float:
        return self.regions[-1][1] if self.regions else 0.0

    @property
    def speech_duration(self) -> float:
        return sum(off - on for on, off in self.regions)

    def check_within(self, duration: float, tol: float = 1e-9) -> None:
        if self.end > duration + tol:
            raise ValueError(
                f"speech activity ends at {self.end:.6f}s beyond audio duration {duration:.6f}s"
            )

    def sample_mask(self, num_samples: int, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
        """Boolean mask of speech-active samples; region [on, off) covers samples round(on*sr) .. round(off*sr)-1."""
        mask = np.zeros(num_samples, dtype=bool)
        for on, off in self.regions:
            a = min(num_samples, int(round(on * sample_rate)))
            b = min(num_samples, int(round(off * sample_rate)))
            mask[a:b] = True
        return mask


@dataclass(frozen=True)
class FrameGrid:
    """Fixed-duration frame grid; frame k covers [k*d, (k+1)*d)."""

    num_frames: int
    frame_duration: float = FRAME_DURATION

    @classmethod
    def for_duration(cls, duration: float, frame_duration: float = FRAME_DURATION) -> "FrameGrid":
        # small epsilon so that e.g. 0.048 / 0.016 does not floor to 2
        return cls(int(np.floor(duration / frame_duration + 1e-9)), frame_duration)

    @classmethod
    def for_audio(cls, audio: AudioBuffer, frame_duration: float = FRAME_DURATION) -> "FrameGrid":
        spf = frame_samples(frame_duration, audio.sample_rate)
        return cls(len(audio) // spf, frame_duration)

    @property
    def starts(self) -> np.ndarray:
        return np.arange(self.num_frames) * self.frame_duration

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.num_frames) + 0.5) * self.frame_duration


def frame_samples(frame_duration: float, sample_rate: int) -> int:
    n = int(round(frame_duration * sample_rate))
    if n <= 0:
        raise ValueError("frame shorter than one sample")
    return n


def rasterize(activity: SpeechActivity, grid: FrameGrid) -> np.ndarray:
    """Frame-level VAD mask: a frame is speech iff more than half of it overlaps speech."""
    starts = grid.starts
    ends = starts + grid.frame_duration
    overlap = np.zeros(grid.num_frames)
    for on, off in activity.regions:
        overlap += np.clip(np.minimum(ends, off) - np.maximum(starts, on), 0.0, None)
    return overlap > 0.5 * grid.frame_duration


def mask_to_activity(mask: np.ndarray, frame_duration: float = FRAME_DURATION) -> SpeechActivity:
    """Collapse runs of speech frames into regions."""
    m = np.asarray(mask, dtype=bool).astype(np.int8)
    edges = np.diff(np.concatenate([[0], m, [0]]))
    onsets = np.flatnonzero(edges == 1)
    offsets = np.flatnonzero(edges == -1)
    return SpeechActivity(
        tuple((on * frame_duration, off * frame_duration) for on, off in zip(onsets, offsets))
    )


# --------------------------------------------------------------------------- I/O


def read_wav(path: str | os.PathLike) -> AudioBuffer:
    """Read a mono 16 kHz WAV (PCM 16-bit or IEEE float 32-bit)."""
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    channels = 1 if data.ndim == 1 else data.shape[1]
    if channels != 1:
        raise AudioFormatError(f"{path}: channels={channels} unsupported")
    if rate != SAMPLE_RATE:
        raise AudioFormatError(f"{path}: sample_rate={rate} unsupported")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioFormatError(f"{path}: encoding={data.dtype} unsupported")
    return AudioBuffer(samples, rate)


def write_wav(buffer: AudioBuffer, path: str | os.PathLike) -> None:
    """Write ``buffer`` as IEEE float 32-bit mono WAV."""
    try:
        wavfile.write(path, buffer.sample_rate, buffer.samples.astype(np.float32))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------- arithmetic


def convolve(signal: AudioBuffer, ir: AudioBuffer) -> AudioBuffer:
    """Linear convolution truncated to ``len(signal)``.

    The reverberant tail past the original duration is dropped so that
    speech-activity timestamps stay valid.
    """
    if signal.sample_rate != ir.sample_rate:
        raise ValueError(
            f"sample rate mismatch: signal {signal.sample_rate} vs ir {ir.sample_rate}"
        )
    if len(ir) == 0:
        raise ValueError("impulse response is empty")
    n = len(signal)
    if n == 0:
        return signal
    if len(ir) == 1:
        return signal.with_samples(signal.samples * ir.samples[0])
    out = oaconvolve(signal.samples, ir.samples, mode="full")[:n]
    return signal.with_samples(out)


def mean_power(
    signal: AudioBuffer,
    mask: Optional[np.ndarray] = None,
    frame_duration: float = FRAME_DURATION,
    return_count: bool = False,
):
    """Mean of squared samples, optionally restricted to frames where ``mask`` is true.

    Samples in a trailing partial frame are not covered by a frame mask and
    are excluded. An empty selection gives 0.0; pass ``return_count=True``
    to tell it apart from true silence.
    """
    x = signal.samples
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        spf = frame_samples(frame_duration, signal.sample_rate)
        if mask.shape[0] * spf > len(x):
            raise ValueError("frame mask extends beyond the signal")
        x = x[: mask.shape[0] * spf][np.repeat(mask, spf)]
    count = x.shape[0]
    power = float(np.mean(x * x)) if count else 0.0
    return (power, count) if return_count else power


def apply_gain(signal: AudioBuffer, gain: float) -> AudioBuffer:
    if not np.isfinite(gain) or gain < 0:
        raise ValueError(f"gain must be finite and non-negative, got {gain}")
    return signal.with_samples(signal.samples * gain)


def power_db(p_num: float, p_den: float) -> float:
    return float(10.0 * np.log10(p_num / p_den))
