"""Oracle-VAD heuristic SNR estimator.

Noise power is the mean power of non-speech frames near each speech frame,
speech power the mean power of speech frames in the same window. Speech
frames carry noise too, so the estimate is biased upward by
10*log10(1 + 10**(-snr/10)); this is kept as-is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .audio import AudioBuffer, FrameGrid, frame_samples

SNR_CEILING = 80.0


@dataclass(frozen=True)
class HeuristicConfig:
    window: float = 6.0
    fallback: Optional[float] = None

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError("window must be positive")


def frame_powers(audio: AudioBuffer, grid: FrameGrid) -> np.ndarray:
    spf = frame_samples(grid.frame_duration, audio.sample_rate)
    if grid.num_frames * spf > len(audio):
        raise ValueError("frame grid extends beyond the audio")
    x = audio.samples[: grid.num_frames * spf].reshape(grid.num_frames, spf)
    return np.mean(x * x, axis=1)


def utterance_heuristic_snr(audio: AudioBuffer, vad: np.ndarray, grid: FrameGrid) -> float:
    """Whole-utterance version of the estimate, used as the default fallback."""
    vad = np.asarray(vad, dtype=bool)
    p = frame_powers(audio, grid)
    if not vad.any() or vad.all():
        raise ValueError("utterance needs both speech and non-speech frames")
    p_noise = p[~vad].mean()
    if p_noise == 0.0:
        return SNR_CEILING
    return float(10.0 * np.log10(p[vad].mean() / p_noise))


def heuristic_snr(
    audio: AudioBuffer,
    vad: np.ndarray,
    grid: Optional[FrameGrid] = None,
    config: HeuristicConfig = HeuristicConfig(),
    return_tally: bool = False,
):
    """Per-frame SNR estimate on speech frames (NaN elsewhere).

    The window holds frames whose centres lie within ``config.window / 2``
    seconds of the current frame centre, clipped at the utterance edges.
    Windows without non-speech frames get ``config.fallback``; if that is
    unset, the whole-utterance estimate is used.
    """
    vad = np.asarray(vad, dtype=bool)
    grid = grid or FrameGrid(len(vad))
    if len(vad) != grid.num_frames:
        raise ValueError("vad mask is not aligned with the frame grid")
    p = frame_powers(audio, grid)
    half = int(math.floor(config.window / 2.0 / grid.frame_duration + 1e-9))

    # running sums over frames: counts are exact integers, power sums are short
    cp_speech = np.concatenate([[0.0], np.cumsum(np.where(vad, p, 0.0))])
    cp_noise = np.concatenate([[0.0], np.cumsum(np.where(vad, 0.0, p))])
    cn_speech = np.concatenate([[0], np.cumsum(vad)])

    out = np.full(grid.num_frames, np.nan)
    tally = {"fallback": 0, "zero_noise_power": 0}
    fallback = config.fallback
    for k in np.flatnonzero(vad):
        a = max(0, k - half)
        b = min(grid.num_frames, k + half + 1)
        n_sp = cn_speech[b] - cn_speech[a]
        n_ns = (b - a) - n_sp
        if n_ns == 0:
            if fallback is None:
                fallback = utterance_heuristic_snr(audio, vad, grid)
            out[k] = fallback
            tally["fallback"] += 1
            continue
        p_noise = (cp_noise[b] - cp_noise[a]) / n_ns
        p_speech = (cp_speech[b] - cp_speech[a]) / n_sp
        if p_noise <= 0.0:
            out[k] = SNR_CEILING
            tally["zero_noise_power"] += 1
            continue
        out[k] = 10.0 * math.log10(p_speech / p_noise)
    return (out, tally) if return_tally else out
