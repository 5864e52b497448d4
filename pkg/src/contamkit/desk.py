"""Small synthetic corpora for tests, demos and smoke runs.

The "speech" here is harmonic bursts with a syllable-rate envelope; it only
has to look like speech to the pipeline (known activity, non-zero power).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np
from scipy.signal import lfilter

from .audio import SAMPLE_RATE, AudioBuffer, SpeechActivity, write_wav
from .rir import synth_exponential_rir


def synth_speech(
    rng: np.random.Generator, duration: float, sample_rate: int = SAMPLE_RATE
) -> Tuple[AudioBuffer, SpeechActivity]:
    """Speech-like bursts separated by short pauses, plus the exact activity."""
    n = int(round(duration * sample_rate))
    x = np.zeros(n)
    regions = []
    t = float(rng.uniform(0.0, 0.3))
    while True:
        seg = float(rng.uniform(0.4, 1.5))
        if t + seg > duration:
            break
        a, b = int(round(t * sample_rate)), int(round((t + seg) * sample_rate))
        tt = np.arange(b - a) / sample_rate
        f0 = rng.uniform(90.0, 250.0)
        voiced = sum(np.sin(2 * np.pi * f0 * h * tt + rng.uniform(0, 2 * np.pi)) / h for h in range(1, 6))
        syllables = 0.55 + 0.45 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * tt) ** 2
        x[a:b] = 0.1 * voiced * syllables
        regions.append((a / sample_rate, b / sample_rate))
        t += seg + float(rng.uniform(0.05, 0.6))
    if not regions:
        b = n
        x[:b] = 0.1 * np.sin(2 * np.pi * 150.0 * np.arange(b) / sample_rate)
        regions.append((0.0, b / sample_rate))
    return AudioBuffer(x, sample_rate), SpeechActivity(tuple(regions))


def synth_noise(rng: np.random.Generator, duration: float, sample_rate: int = SAMPLE_RATE) -> AudioBuffer:
    """Coloured Gaussian noise with a slow level drift, so frame SNRs actually vary."""
    n = int(round(duration * sample_rate))
    pole = rng.uniform(-0.5, 0.97)
    x = lfilter([1.0], [1.0, -pole], rng.standard_normal(n))
    drift = 1.0 + 0.5 * np.sin(2 * np.pi * rng.uniform(0.05, 0.5) * np.arange(n) / sample_rate)
    x = x * drift
    return AudioBuffer(0.05 * x / np.std(x), sample_rate)


@dataclass(frozen=True)
class DeskCorpus:
    root: Path
    speech_manifest: Path
    noise_manifest: Path
    rir_manifest: Path


def make_desk_corpus(
    root: str | Path,
    n_utterances: int = 20,
    n_noises: int = 10,
    n_rirs: int = 10,
    seed: int = 0,
    duration_range: Tuple[float, float] = (2.0, 5.0),
) -> DeskCorpus:
    """Write speech, noise and RIR WAVs plus the three JSONL manifests under ``root``."""
    root = Path(root)
    for sub in ("speech", "noise", "rir"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    splits = ["train"] * 8 + ["dev", "test"]

    speech_rows: List[dict] = []
    for i in range(n_utterances):
        uid = f"utt{i:04d}"
        audio, activity = synth_speech(rng, float(rng.uniform(*duration_range)))
        write_wav(audio, root / "speech" / f"{uid}.wav")
        with open(root / "speech" / f"{uid}.csv", "w", encoding="utf-8") as f:
            f.write("onset,offset\n")
            f.writelines(f"{on!r},{off!r}\n" for on, off in activity)
        speech_rows.append(
            {
                "utterance_id": uid,
                "wav_path": f"speech/{uid}.wav",
                "activity_path": f"speech/{uid}.csv",
                "split": splits[i % len(splits)],
            }
        )

    noise_rows = []
    for i in range(n_noises):
        nid = f"noise{i:03d}"
        # some noises are shorter than the utterances and get looped
        write_wav(synth_noise(rng, float(rng.uniform(1.0, 8.0))), root / "noise" / f"{nid}.wav")
        noise_rows.append({"id": nid, "path": f"noise/{nid}.wav"})

    rir_rows = []
    for i in range(n_rirs):
        rid = f"rir{i:03d}"
        tau = float(np.exp(rng.uniform(np.log(0.008), np.log(0.3))))
        rir = synth_exponential_rir(tau, max(0.3, 8 * tau), float(rng.uniform(0.0, 0.01)), int(rng.integers(2**31)))
        write_wav(rir.ir, root / "rir" / f"{rid}.wav")
        rir_rows.append({"id": rid, "path": f"rir/{rid}.wav"})

    paths = []
    for name, rows in (("speech", speech_rows), ("noise", noise_rows), ("rir", rir_rows)):
        p = root / f"{name}.jsonl"
        with open(p, "w", encoding="utf-8") as f:
            f.writelines(json.dumps(r) + "\n" for r in rows)
        paths.append(p)
    return DeskCorpus(root, *paths)
