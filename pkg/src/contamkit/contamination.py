"""The contamination pipeline: silence extension, reverberation, SNR-targeted mixing and labels.

Every random choice for an utterance flows from ``utterance_seed(master_seed,
utterance_id)``, so results do not depend on corpus order or worker count.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .audio import (
    FRAME_DURATION,
    AudioBuffer,
    FrameGrid,
    SpeechActivity,
    apply_gain,
    convolve,
    frame_samples,
    mean_power,
    rasterize,
)
from .rir import C50_BOUNDS, RoomImpulseResponse, clamp_c50, compute_c50

SNR_BOUNDS = (-15.0, 80.0)
DEFAULT_P_RIR = 0.9
DEFAULT_SNR_RANGE = (0.0, 30.0)
DEFAULT_NS_RATIO = 0.3

# independent random streams derived from one utterance seed
_STREAM_RECIPE, _STREAM_SILENCE, _STREAM_NOISE_CROP = 0, 1, 2


class ContaminationError(RuntimeError):
    def __init__(self, utterance_id: str, cause: Exception):
        super().__init__(f"{utterance_id}: {cause}")
        self.utterance_id = utterance_id
        self.cause = cause


def utterance_seed(master_seed: int, utterance_id: str) -> int:
    digest = hashlib.sha256(f"{int(master_seed)}\x00{utterance_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


@dataclass(frozen=True)
class ContaminationRecipe:
    """Every random draw needed to reproduce one contaminated utterance."""

    utterance_id: str
    master_seed: int
    noise_id: str
    target_snr: float
    speech_rir_id: Optional[str] = None
    noise_rir_id: Optional[str] = None
    p_rir: float = DEFAULT_P_RIR
    snr_range: Tuple[float, float] = DEFAULT_SNR_RANGE
    ns_ratio: float = DEFAULT_NS_RATIO

    def __post_init__(self):
        if not 0.0 <= self.p_rir <= 1.0:
            raise ValueError(f"p_rir must be in [0, 1], got {self.p_rir}")
        lo, hi = self.snr_range
        if lo > hi:
            raise ValueError(f"invalid snr_range {self.snr_range}")
        if not lo <= self.target_snr <= hi:
            raise ValueError(f"target_snr {self.target_snr} outside {self.snr_range}")
        if not 0.0 <= self.ns_ratio < 1.0:
            raise ValueError(f"ns_ratio must be in [0, 1), got {self.ns_ratio}")
        object.__setattr__(self, "snr_range", (float(lo), float(hi)))

    @property
    def seed(self) -> int:
        return utterance_seed(self.master_seed, self.utterance_id)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_range"] = list(self.snr_range)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ContaminationRecipe":
        d = dict(d)
        d["snr_range"] = tuple(d.get("snr_range", DEFAULT_SNR_RANGE))
        return cls(**d)


def draw_recipe(
    utterance_id: str,
    master_seed: int,
    noise_ids: Sequence[str],
    rir_ids: Sequence[str],
    p_rir: float = DEFAULT_P_RIR,
    snr_range: Tuple[float, float] = DEFAULT_SNR_RANGE,
    ns_ratio: float = DEFAULT_NS_RATIO,
) -> ContaminationRecipe:
    """Draw the random choices for one utterance.

    The two reverberation coin flips are independent; each successful flip
    picks an impulse response uniformly from ``rir_ids``.
    """
    if not noise_ids:
        raise ValueError("no noise assets to draw from")
    rng = _rng(utterance_seed(master_seed, utterance_id), _STREAM_RECIPE)
    # fixed draw order keeps recipes stable when p_rir changes
    speech_flip, noise_flip = rng.random(2)
    speech_pick, noise_pick = rng.integers(0, max(len(rir_ids), 1), size=2)
    noise_pick_id = noise_ids[int(rng.integers(0, len(noise_ids)))]
    target = float(rng.uniform(snr_range[0], snr_range[1]))
    use_speech_rir = bool(rir_ids) and speech_flip < p_rir
    use_noise_rir = bool(rir_ids) and noise_flip < p_rir
    return ContaminationRecipe(
        utterance_id=utterance_id,
        master_seed=int(master_seed),
        noise_id=noise_pick_id,
        target_snr=target,
        speech_rir_id=rir_ids[int(speech_pick)] if use_speech_rir else None,
        noise_rir_id=rir_ids[int(noise_pick)] if use_noise_rir else None,
        p_rir=p_rir,
        snr_range=tuple(snr_range),
        ns_ratio=ns_ratio,
    )


@dataclass(frozen=True)
class LabeledUtterance:
    """Contaminated audio with its labels.

    ``speech`` and ``noise`` keep the mixed components (reverberant speech and
    scaled reverberant noise) so label computations can be re-checked.
    """

    audio: AudioBuffer
    vad: np.ndarray
    snr: np.ndarray
    c50: float
    recipe: ContaminationRecipe
    activity: SpeechActivity
    speech: AudioBuffer
    noise: AudioBuffer
    noise_gain: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> FrameGrid:
        return FrameGrid(len(self.vad))


@dataclass
class AssetStore:
    """Read-only lookup of noise and impulse-response buffers by id."""

    noises: Mapping[str, AudioBuffer]
    rirs: Mapping[str, AudioBuffer] = field(default_factory=dict)

    def noise(self, asset_id: str) -> AudioBuffer:
        try:
            return self.noises[asset_id]
        except KeyError:
            raise KeyError(f"unknown noise asset {asset_id!r}") from None

    def rir(self, asset_id: str) -> AudioBuffer:
        try:
            return self.rirs[asset_id]
        except KeyError:
            raise KeyError(f"unknown impulse response {asset_id!r}") from None


# ------------------------------------------------------------------ operations


def extend_with_silence(
    speech: AudioBuffer,
    activity: SpeechActivity,
    target_ns_ratio: float,
    seed: int,
) -> tuple[AudioBuffer, SpeechActivity]:
    """Insert digital silence at region boundaries until the non-speech fraction reaches the target.

    Fractions are measured in samples. Insertion points are the onsets and
    offsets of the speech regions; the total gap length is spread over them
    with a uniform multinomial draw.
    """
    if not 0.0 <= target_ns_ratio < 1.0:
        raise ValueError(f"target_ns_ratio must be in [0, 1), got {target_ns_ratio}")
    activity.check_within(speech.duration)
    n = len(speech)
    sr = speech.sample_rate
    n_speech = int(activity.sample_mask(n, sr).sum())
    if n == 0 or (n - n_speech) >= target_ns_ratio * n:
        return speech, activity

    total = int(math.ceil(n_speech / (1.0 - target_ns_ratio)))
    while total - n_speech < target_ns_ratio * total:
        total += 1
    extra = total - n

    bounds = sorted({min(n, int(round(t * sr))) for region in activity for t in region})
    rng = _rng(seed, _STREAM_SILENCE)
    counts = rng.multinomial(extra, np.full(len(bounds), 1.0 / len(bounds)))

    pieces, prev = [], 0
    for b, c in zip(bounds, counts):
        pieces.append(speech.samples[prev:b])
        pieces.append(np.zeros(int(c)))
        prev = b
    pieces.append(speech.samples[prev:])
    out = speech.with_samples(np.concatenate(pieces))

    bounds_arr = np.asarray(bounds)
    cum = np.concatenate([[0], np.cumsum(counts)])

    def shift(t: float, onset: bool) -> float:
        s = min(n, int(round(t * sr)))
        # gaps at an onset boundary precede the region, at an offset boundary follow it
        k = np.searchsorted(bounds_arr, s, side="right" if onset else "left")
        return t + cum[k] / sr

    new_activity = SpeechActivity(
        tuple((shift(on, True), shift(off, False)) for on, off in activity)
    )
    return out, new_activity


def mix_at_snr(
    speech: AudioBuffer,
    activity: SpeechActivity,
    noise: AudioBuffer,
    target_snr: float,
) -> tuple[AudioBuffer, float]:
    """Add ``noise`` to ``speech`` scaled so the utterance SNR equals ``target_snr``.

    Speech power is measured over speech-active samples only; noise power
    over the whole speech span. Returns the mixture and the noise gain.
    """
    if speech.sample_rate != noise.sample_rate:
        raise ValueError("sample rate mismatch between speech and noise")
    n = len(speech)
    if len(noise) < n:
        raise ValueError(f"noise ({len(noise)} samples) shorter than speech ({n})")
    noise = noise.with_samples(noise.samples[:n])
    gain = snr_gain(speech, activity, noise, target_snr)
    mixed = speech.with_samples(speech.samples + gain * noise.samples)
    return mixed, gain


def snr_gain(
    speech: AudioBuffer, activity: SpeechActivity, noise: AudioBuffer, target_snr: float
) -> float:
    mask = activity.sample_mask(len(speech), speech.sample_rate)
    active = speech.samples[mask]
    p_speech = float(np.mean(active**2)) if active.size else 0.0
    p_noise = mean_power(noise.with_samples(noise.samples[: len(speech)]))
    if p_speech == 0.0:
        raise ValueError("zero speech power over speech-active samples")
    if p_noise == 0.0:
        raise ValueError("zero noise power")
    return math.sqrt(p_speech / (p_noise * 10.0 ** (target_snr / 10.0)))


def utterance_snr(speech: AudioBuffer, activity: SpeechActivity, noise: AudioBuffer) -> float:
    """Utterance SNR of a (speech, noise) pair, with the same power conventions as mix_at_snr."""
    mask = activity.sample_mask(len(speech), speech.sample_rate)
    p_speech = float(np.mean(speech.samples[mask] ** 2))
    p_noise = mean_power(noise.with_samples(noise.samples[: len(speech)]))
    return float(10.0 * np.log10(p_speech / p_noise))


def frame_snr(
    speech_rev: AudioBuffer,
    noise_scaled: AudioBuffer,
    activity: SpeechActivity,
    grid: Optional[FrameGrid] = None,
    window: float = 2.0,
    return_tally: bool = False,
):
    """Frame-level SNR from a sliding window centred on each frame.

    For frame k, both powers are taken over ``window`` seconds centred on
    the frame centre, clipped at the signal edges; speech power uses only
    speech-active samples. Non-speech frames are NaN. Values are clamped to
    [-15, 80] dB; speech frames whose window holds no active speech power
    are set to the floor and counted in the tally.
    """
    if len(speech_rev) != len(noise_scaled):
        raise ValueError("speech and noise must be length-aligned")
    if window <= 0:
        raise ValueError("window must be positive")
    sr = speech_rev.sample_rate
    n = len(speech_rev)
    grid = grid or FrameGrid.for_audio(speech_rev)
    spf = frame_samples(grid.frame_duration, sr)
    vad = rasterize(activity, grid)

    active = activity.sample_mask(n, sr)
    s2 = np.where(active, speech_rev.samples**2, 0.0)
    n2 = noise_scaled.samples**2
    cc = np.concatenate([[0], np.cumsum(active)])

    half = int(round(window * sr / 2.0))
    centers = np.arange(grid.num_frames) * spf + spf // 2
    lo = np.clip(centers - half, 0, n)
    hi = np.clip(centers + half, 0, n)

    out = np.full(grid.num_frames, np.nan)
    tally = {"speech_frames": int(vad.sum()), "zero_speech_power": 0, "zero_noise_power": 0}
    lo_db, hi_db = SNR_BOUNDS
    for k in np.flatnonzero(vad):
        a, b = lo[k], hi[k]
        count = cc[b] - cc[a]
        # direct sums: differences of running sums lose precision on long signals
        es = float(np.sum(s2[a:b]))
        en = float(np.sum(n2[a:b]))
        if count == 0 or es <= 0.0:
            tally["zero_speech_power"] += 1
            out[k] = lo_db
            continue
        if en <= 0.0:
            tally["zero_noise_power"] += 1
            out[k] = hi_db
            continue
        p_s = es / count
        p_n = en / (b - a)
        out[k] = min(max(10.0 * math.log10(p_s / p_n), lo_db), hi_db)
    return (out, tally) if return_tally else out


def crop_noise(noise: AudioBuffer, length: int, rng: np.random.Generator) -> AudioBuffer:
    """Crop ``length`` samples at a uniform offset, looping the noise end-to-start if short."""
    size = len(noise)
    if size == 0:
        raise ValueError("empty noise asset")
    if size >= length:
        offset = int(rng.integers(0, size - length + 1))
        return noise.with_samples(noise.samples[offset : offset + length])
    offset = int(rng.integers(0, size))
    idx = (offset + np.arange(length)) % size
    return noise.with_samples(noise.samples[idx])


def contaminate(
    speech: AudioBuffer,
    activity: SpeechActivity,
    assets: AssetStore,
    recipe: ContaminationRecipe,
    frame_duration: float = FRAME_DURATION,
    snr_window: float = 2.0,
) -> LabeledUtterance:
    """Run the full pipeline for one clean utterance."""
    try:
        return _contaminate(speech, activity, assets, recipe, frame_duration, snr_window)
    except ContaminationError:
        raise
    except Exception as exc:
        raise ContaminationError(recipe.utterance_id, exc) from exc


def _contaminate(speech, activity, assets, recipe, frame_duration, snr_window):
    seed = recipe.seed
    s1, act = extend_with_silence(speech, activity, recipe.ns_ratio, seed)

    if recipe.speech_rir_id is not None:
        rir_s = RoomImpulseResponse(assets.rir(recipe.speech_rir_id))
        s2 = convolve(s1, rir_s.ir)
        c50 = clamp_c50(compute_c50(rir_s))
    else:
        s2 = s1
        c50 = C50_BOUNDS[1]

    n1 = crop_noise(assets.noise(recipe.noise_id), len(s1), _rng(seed, _STREAM_NOISE_CROP))
    n2 = convolve(n1, assets.rir(recipe.noise_rir_id)) if recipe.noise_rir_id is not None else n1

    s3, gain = mix_at_snr(s2, act, n2, recipe.target_snr)
    noise_scaled = apply_gain(n2, gain)

    grid = FrameGrid.for_audio(s3, frame_duration)
    vad = rasterize(act, grid)
    snr, tally = frame_snr(s2, noise_scaled, act, grid, snr_window, return_tally=True)
    return LabeledUtterance(
        audio=s3,
        vad=vad,
        snr=snr,
        c50=c50,
        recipe=recipe,
        activity=act,
        speech=s2,
        noise=noise_scaled,
        noise_gain=gain,
        diagnostics=tally,
    )
