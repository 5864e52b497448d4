"""Reading and writing speech-activity files (RTTM and onset,offset CSV) and frame-SNR CSVs."""

from __future__ import annotations

import csv
import io
import math
import os
from pathlib import Path

import numpy as np

from .audio import SpeechActivity


def read_rttm(path: str | os.PathLike) -> SpeechActivity:
    """Union of all SPEAKER turns in an RTTM file, whatever the speaker label."""
    intervals = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields or fields[0] != "SPEAKER":
                continue
            try:
                onset, dur = float(fields[3]), float(fields[4])
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed RTTM line") from exc
            intervals.append((onset, onset + dur))
    return SpeechActivity.from_intervals(intervals)


def format_rttm(activity: SpeechActivity, uri: str, label: str = "speech") -> str:
    lines = [
        f"SPEAKER {uri} 1 {on:.3f} {off - on:.3f} <NA> <NA> {label} <NA> <NA>\n"
        for on, off in activity
    ]
    return "".join(lines)


def write_rttm(activity: SpeechActivity, path: str | os.PathLike, uri: str | None = None) -> None:
    uri = uri or Path(path).name.split(".")[0]
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_rttm(activity, uri))


def read_activity_csv(path: str | os.PathLike) -> SpeechActivity:
    intervals = []
    with open(path, encoding="utf-8", newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                intervals.append((float(row[0]), float(row[1])))
            except ValueError:
                if intervals:
                    raise
                # header line
    return SpeechActivity.from_intervals(intervals)


def read_activity(path: str | os.PathLike) -> SpeechActivity:
    """Dispatch on extension: ``.rttm`` or anything else treated as onset,offset CSV."""
    if str(path).endswith(".rttm"):
        return read_rttm(path)
    return read_activity_csv(path)


def format_snr_csv(snr_db: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("frame_index,snr_db\n")
    for k, v in enumerate(snr_db):
        buf.write(f"{k},\n" if math.isnan(v) else f"{k},{float(v)!r}\n")
    return buf.getvalue()


def write_snr_csv(snr_db: np.ndarray, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(format_snr_csv(snr_db))


def read_frame_csv(path: str | os.PathLike) -> np.ndarray:
    """Read a ``frame_index,value`` CSV; empty values become NaN."""
    values = {}
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        for row in reader:
            if not row:
                continue
            try:
                k = int(row[0])
            except ValueError:
                continue  # header
            cell = row[1].strip() if len(row) > 1 else ""
            values[k] = float(cell) if cell else math.nan
    out = np.full(max(values) + 1 if values else 0, np.nan)
    for k, v in values.items():
        out[k] = v
    return out
