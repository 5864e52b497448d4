"""Manifests, asset splitting and parallel corpus synthesis."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from collections.abc import Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .annotations import format_rttm, format_snr_csv, read_activity
from .audio import AudioBuffer, mask_to_activity, read_wav, write_wav
from .contamination import (
    DEFAULT_NS_RATIO,
    DEFAULT_P_RIR,
    DEFAULT_SNR_RANGE,
    AssetStore,
    ContaminationRecipe,
    contaminate,
    draw_recipe,
)

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
FORMAT_VERSION = 1


class ManifestError(ValueError):
    pass


# ------------------------------------------------------------------ manifests


@dataclass(frozen=True)
class SpeechRecord:
    utterance_id: str
    wav_path: str
    activity_path: str
    split: str = "train"


@dataclass(frozen=True)
class AssetRecord:
    id: str
    path: str
    split: Optional[str] = None


def _read_jsonl(path: str | os.PathLike) -> List[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    return rows


def _resolve(base: Path, p: str) -> str:
    return str(p if os.path.isabs(p) else (base / p))


def read_speech_manifest(path: str | os.PathLike, check_paths: bool = True) -> List[SpeechRecord]:
    base = Path(path).parent
    records, seen = [], set()
    for row in _read_jsonl(path):
        try:
            rec = SpeechRecord(
                utterance_id=str(row["utterance_id"]),
                wav_path=_resolve(base, row["wav_path"]),
                activity_path=_resolve(base, row["activity_path"]),
                split=row.get("split", "train"),
            )
        except KeyError as exc:
            raise ManifestError(f"{path}: record missing {exc}") from None
        if rec.split not in SPLITS:
            raise ManifestError(f"{path}: unknown split {rec.split!r} for {rec.utterance_id}")
        if rec.utterance_id in seen:
            raise ManifestError(f"{path}: duplicate utterance_id {rec.utterance_id}")
        seen.add(rec.utterance_id)
        if check_paths:
            for p in (rec.wav_path, rec.activity_path):
                if not os.path.exists(p):
                    raise ManifestError(f"{path}: {rec.utterance_id}: missing file {p}")
        records.append(rec)
    return records


def read_asset_manifest(path: str | os.PathLike, check_paths: bool = True) -> List[AssetRecord]:
    base = Path(path).parent
    records, seen = [], set()
    for row in _read_jsonl(path):
        p = row.get("path", row.get("wav_path"))
        if p is None:
            raise ManifestError(f"{path}: asset record without path")
        asset_id = str(row.get("id", Path(p).stem))
        if asset_id in seen:
            raise ManifestError(f"{path}: duplicate asset id {asset_id}")
        seen.add(asset_id)
        split = row.get("split")
        if split is not None and split not in SPLITS:
            raise ManifestError(f"{path}: unknown split {split!r} for {asset_id}")
        rec = AssetRecord(asset_id, _resolve(base, p), split)
        if check_paths and not os.path.exists(rec.path):
            raise ManifestError(f"{path}: missing file {rec.path}")
        records.append(rec)
    return records


def write_jsonl(rows, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


# ------------------------------------------------------------------ splitting


def split_sizes(n: int, fractions: Sequence[float] = (0.8, 0.1, 0.1)) -> Tuple[int, ...]:
    """Largest-remainder rounding; ties go to the later split (test first, then dev)."""
    fr = [Fraction(f).limit_denominator(10**6) for f in fractions]
    if sum(fr) != 1:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    quotas = [f * n for f in fr]
    sizes = [math.floor(q) for q in quotas]
    leftover = n - sum(sizes)
    order = sorted(range(len(fr)), key=lambda i: (quotas[i] - sizes[i], i), reverse=True)
    for i in order[:leftover]:
        sizes[i] += 1
    return tuple(sizes)


def split_assets(
    assets: Sequence[str],
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> Tuple[List[str], List[str], List[str]]:
    """Seeded shuffle of the (sorted) ids, then a contiguous train/dev/test partition."""
    if len(assets) == 0:
        raise ValueError("no assets to split")
    ids = sorted(assets)
    perm = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    a, b, _ = split_sizes(len(ids), fractions)
    return shuffled[:a], shuffled[a : a + b], shuffled[a + b :]


def assign_splits(records: Sequence[AssetRecord], seed: int) -> Dict[str, List[AssetRecord]]:
    """Group asset records by split, splitting 80/10/10 those without an explicit tag."""
    by_split: Dict[str, List[AssetRecord]] = {s: [] for s in SPLITS}
    untagged = [r for r in records if r.split is None]
    for r in records:
        if r.split is not None:
            by_split[r.split].append(r)
    if untagged:
        lookup = {r.id: r for r in untagged}
        for name, ids in zip(SPLITS, split_assets(list(lookup), seed=seed)):
            by_split[name].extend(lookup[i] for i in ids)
    for name in SPLITS:
        by_split[name].sort(key=lambda r: r.id)
    return by_split


# ------------------------------------------------------------------ synthesis


@dataclass(frozen=True)
class RunConfig:
    out_dir: str
    master_seed: int = 0
    p_rir: float = DEFAULT_P_RIR
    snr_range: Tuple[float, float] = DEFAULT_SNR_RANGE
    ns_ratio: float = DEFAULT_NS_RATIO
    workers: int = 1

    def __post_init__(self):
        if not 0.0 <= self.p_rir <= 1.0:
            raise ValueError("p_rir must be in [0, 1]")
        if self.snr_range[0] > self.snr_range[1]:
            raise ValueError("snr_range must be (low, high)")
        if not 0.0 <= self.ns_ratio < 1.0:
            raise ValueError("ns_ratio must be in [0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


class LazyWavStore(Mapping):
    """id -> AudioBuffer, reading each file on first access."""

    def __init__(self, paths: Dict[str, str]):
        self._paths = dict(paths)
        self._cache: Dict[str, AudioBuffer] = {}

    def __getitem__(self, key):
        if key not in self._cache:
            self._cache[key] = read_wav(self._paths[key])
        return self._cache[key]

    def __iter__(self):
        return iter(self._paths)

    def __len__(self):
        return len(self._paths)


def recipe_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


_WORKER: dict = {}


def _init_worker(noise_paths: Dict[str, str], rir_paths: Dict[str, str]) -> None:
    _WORKER["assets"] = AssetStore(LazyWavStore(noise_paths), LazyWavStore(rir_paths))


def _atomic_write(path: Path, data: bytes | str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode, **({} if isinstance(data, bytes) else {"encoding": "utf-8"})) as f:
        f.write(data)
    os.replace(tmp, path)


def _outputs(out_dir: Path, uid: str) -> Dict[str, Path]:
    return {
        "wav": out_dir / f"{uid}.wav",
        "rttm": out_dir / f"{uid}.vad.rttm",
        "snr": out_dir / f"{uid}.snr.csv",
        "record": out_dir / f"{uid}.json",
    }


def _existing_record(paths: Dict[str, Path], digest: str) -> Optional[dict]:
    if not all(p.exists() for p in paths.values()):
        return None
    try:
        with open(paths["record"], encoding="utf-8") as f:
            rec = json.load(f)
    except (OSError, json.JSONDecodeError):
        return None
    return rec if rec.get("recipe_hash") == digest else None


def _synthesize_one(task: dict) -> Tuple[str, Optional[dict], Optional[str], bool]:
    """Worker entry point: returns (utterance_id, record, error, skipped)."""
    uid = task["utterance_id"]
    out_dir = Path(task["out_dir"])
    paths = _outputs(out_dir, uid)
    try:
        existing = _existing_record(paths, task["recipe_hash"])
        if existing is not None:
            return uid, existing, None, True
        recipe = ContaminationRecipe.from_dict(task["recipe"])
        speech = read_wav(task["wav_path"])
        activity = read_activity(task["activity_path"])
        utt = contaminate(speech, activity, _WORKER["assets"], recipe)

        tmp_wav = paths["wav"].with_name(paths["wav"].name + ".tmp")
        write_wav(utt.audio, tmp_wav)
        os.replace(tmp_wav, paths["wav"])
        _atomic_write(paths["rttm"], format_rttm(mask_to_activity(utt.vad), uid))
        _atomic_write(paths["snr"], format_snr_csv(utt.snr))

        n = len(utt.audio)
        n_speech = int(utt.activity.sample_mask(n, utt.audio.sample_rate).sum())
        record = {
            "utterance_id": uid,
            "split": task["split"],
            "c50_db": utt.c50,
            "target_snr_db": recipe.target_snr,
            "noise_gain": utt.noise_gain,
            "num_samples": n,
            "speech_samples": n_speech,
            "num_frames": int(utt.vad.size),
            "speech_frames": int(utt.vad.sum()),
            "snr_floor_frames": int(utt.diagnostics.get("zero_speech_power", 0)),
            "recipe": recipe.to_dict(),
            "recipe_hash": task["recipe_hash"],
        }
        _atomic_write(paths["record"], json.dumps(record, sort_keys=True) + "\n")
        return uid, record, None, False
    except Exception as exc:  # reported per utterance, never fatal for the run
        return uid, None, f"{type(exc).__name__}: {exc}", False


def _histogram(values: Sequence[float], edges: Sequence[float]) -> dict:
    counts, _ = np.histogram(np.asarray(values, dtype=np.float64), bins=np.asarray(edges))
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def summarize(records: Sequence[dict], sample_rate: int = 16000) -> dict:
    total = sum(r["num_samples"] for r in records)
    speech = sum(r["speech_samples"] for r in records)
    return {
        "utterances": len(records),
        "total_duration_s": total / sample_rate,
        "speech_duration_s": speech / sample_rate,
        "non_speech_ratio": (total - speech) / total if total else 0.0,
        "per_split": {s: sum(1 for r in records if r["split"] == s) for s in SPLITS},
        "reverberant_speech": sum(1 for r in records if r["recipe"]["speech_rir_id"] is not None),
        "snr_histogram": _histogram([r["target_snr_db"] for r in records], np.arange(-15, 85, 5)),
        "c50_histogram": _histogram([r["c50_db"] for r in records], np.arange(-10, 65, 5)),
    }


@dataclass
class RunResult:
    summary: dict
    processed: int = 0
    skipped: int = 0
    failures: Dict[str, str] = field(default_factory=dict)


def run_synthesis(
    speech: Sequence[SpeechRecord],
    noises: Sequence[AssetRecord],
    rirs: Sequence[AssetRecord],
    config: RunConfig,
) -> RunResult:
    """Contaminate every speech record with assets from its own split.

    Outputs already present with a matching recipe hash are reused.
    ``labels.jsonl`` and ``summary.json`` are rebuilt in manifest order after
    all workers finish, so the tree does not depend on ``config.workers``.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    noise_split = assign_splits(noises, config.master_seed) if noises else {s: [] for s in SPLITS}
    rir_split = assign_splits(rirs, config.master_seed) if rirs else {s: [] for s in SPLITS}
    noise_paths = {r.id: r.path for r in noises}
    rir_paths = {r.id: r.path for r in rirs}

    tasks, failures = [], {}
    for rec in speech:
        noise_ids = [r.id for r in noise_split[rec.split]]
        rir_ids = [r.id for r in rir_split[rec.split]]
        try:
            recipe = draw_recipe(
                rec.utterance_id,
                config.master_seed,
                noise_ids,
                rir_ids,
                config.p_rir,
                tuple(config.snr_range),
                config.ns_ratio,
            )
        except ValueError as exc:
            failures[rec.utterance_id] = f"{rec.split}: {exc}"
            continue
        payload = {
            "version": FORMAT_VERSION,
            "recipe": recipe.to_dict(),
            "wav_path": rec.wav_path,
            "activity_path": rec.activity_path,
            "noise_path": noise_paths[recipe.noise_id],
            "speech_rir_path": rir_paths.get(recipe.speech_rir_id),
            "noise_rir_path": rir_paths.get(recipe.noise_rir_id),
        }
        tasks.append(
            {
                "utterance_id": rec.utterance_id,
                "split": rec.split,
                "wav_path": rec.wav_path,
                "activity_path": rec.activity_path,
                "out_dir": str(out_dir),
                "recipe": recipe.to_dict(),
                "recipe_hash": recipe_hash(payload),
            }
        )

    results = {}
    if config.workers == 1 or len(tasks) <= 1:
        _init_worker(noise_paths, rir_paths)
        outcomes = map(_synthesize_one, tasks)
        results = _collect(outcomes, failures)
    else:
        with ProcessPoolExecutor(
            max_workers=config.workers,
            initializer=_init_worker,
            initargs=(noise_paths, rir_paths),
        ) as pool:
            results = _collect(pool.map(_synthesize_one, tasks, chunksize=1), failures)

    records = [results[rec.utterance_id][0] for rec in speech if rec.utterance_id in results]
    processed = sum(1 for _, skipped in results.values() if not skipped)
    skipped = len(results) - processed
    write_jsonl(
        (
            {
                "utterance_id": r["utterance_id"],
                "split": r["split"],
                "c50_db": r["c50_db"],
                "target_snr_db": r["target_snr_db"],
                "recipe": r["recipe"],
            }
            for r in records
        ),
        out_dir / "labels.jsonl",
    )
    summary = summarize(records)
    summary["failed"] = len(failures)
    _atomic_write(out_dir / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if failures:
        write_jsonl(
            ({"utterance_id": k, "error": v} for k, v in sorted(failures.items())),
            out_dir / "failures.jsonl",
        )
    elif (out_dir / "failures.jsonl").exists():
        (out_dir / "failures.jsonl").unlink()
    log.info(
        "synthesized %d, reused %d, failed %d utterances into %s",
        processed,
        skipped,
        len(failures),
        out_dir,
    )
    return RunResult(summary, processed, skipped, failures)


def _collect(outcomes, failures: Dict[str, str]) -> Dict[str, Tuple[dict, bool]]:
    results = {}
    for uid, record, error, skipped in outcomes:
        if error is not None:
            log.warning("%s failed: %s", uid, error)
            failures[uid] = error
        else:
            log.debug("%s %s", uid, "reused" if skipped else "done")
            results[uid] = (record, skipped)
    return results
