"""Evaluation metrics and error-analysis reports."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .audio import FRAME_DURATION, FrameGrid, SpeechActivity, rasterize


@dataclass(frozen=True)
class DetectionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "DetectionCounts") -> "DetectionCounts":
        return DetectionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float:
        # no hypothesized speech: nothing was wrongly detected
        return 1.0 if self.tp + self.fp == 0 else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        return 1.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def fscore(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def _collar_mask(reference: SpeechActivity, grid: FrameGrid, collar: float) -> np.ndarray:
    """Frames kept for scoring: those farther than ``collar`` from any reference boundary."""
    keep = np.ones(grid.num_frames, dtype=bool)
    if collar <= 0:
        return keep
    starts = grid.starts
    ends = starts + grid.frame_duration
    for region in reference:
        for t in region:
            keep &= ~((ends > t - collar) & (starts < t + collar))
    return keep


def vad_counts(
    reference: SpeechActivity,
    hypothesis: SpeechActivity,
    duration: float,
    frame: float = FRAME_DURATION,
    collar: float = 0.0,
) -> DetectionCounts:
    grid = FrameGrid.for_duration(duration, frame)
    ref = rasterize(reference, grid)
    hyp = rasterize(hypothesis, grid)
    keep = _collar_mask(reference, grid, collar)
    ref, hyp = ref[keep], hyp[keep]
    return DetectionCounts(
        tp=int(np.sum(ref & hyp)),
        fp=int(np.sum(~ref & hyp)),
        fn=int(np.sum(ref & ~hyp)),
        tn=int(np.sum(~ref & ~hyp)),
    )


def vad_fscore(
    reference: SpeechActivity,
    hypothesis: SpeechActivity,
    duration: float,
    frame: float = FRAME_DURATION,
    collar: float = 0.0,
) -> Tuple[float, float, float]:
    """Frame-level (precision, recall, F-score) of ``hypothesis`` against ``reference``."""
    c = vad_counts(reference, hypothesis, duration, frame, collar)
    return c.precision, c.recall, c.fscore


def mae(
    pred: Sequence[float],
    gold: Sequence[float],
    mask: Optional[Sequence[bool]] = None,
    clamp: Optional[Tuple[float, float]] = None,
) -> float:
    """Frame-level mean absolute error; both sides are clamped when ``clamp`` is given."""
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gold.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        pred, gold = pred[mask], gold[mask]
    if pred.size == 0:
        raise ValueError("no frames to evaluate")
    if clamp is not None:
        lo, hi = clamp
        pred = np.clip(pred, lo, hi)
        gold = np.clip(gold, lo, hi)
    # correctly rounded sum: the result does not depend on summation order
    return math.fsum(np.abs(pred - gold).tolist()) / pred.size


@dataclass(frozen=True)
class DistributionSummary:
    count: int
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    q1: float
    median: float
    q3: float


def conditioned_distribution(
    values: Sequence[float],
    outcomes: Sequence[int],
    bin_width: float = 1.0,
    classes: Iterable[int] = (0, 1),
) -> Dict[int, DistributionSummary]:
    """Split ``values`` by binary outcome and summarize each class.

    All classes share one histogram binning so they can be overlaid.
    """
    values = np.asarray(values, dtype=np.float64)
    outcomes = np.asarray(outcomes).astype(int)
    if values.shape != outcomes.shape:
        raise ValueError("values and outcomes must be aligned")
    classes = list(classes)
    for c in classes:
        if not np.any(outcomes == c):
            raise ValueError(f"outcome class {c} has no items")
    lo = np.floor(values.min() / bin_width) * bin_width
    hi = np.ceil(values.max() / bin_width) * bin_width
    if hi <= lo:
        hi = lo + bin_width
    edges = np.arange(lo, hi + 0.5 * bin_width, bin_width)
    out = {}
    for c in classes:
        v = values[outcomes == c]
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        counts, _ = np.histogram(v, bins=edges)
        out[c] = DistributionSummary(int(v.size), edges, counts, float(q1), float(med), float(q3))
    return out


@dataclass(frozen=True)
class DecileReport:
    bin_edges: np.ndarray  # n_bins + 1 boundaries of the conditioning variable
    counts: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray

    def rows(self) -> List[dict]:
        return [
            {
                "bin": i,
                "low": float(self.bin_edges[i]),
                "high": float(self.bin_edges[i + 1]),
                "count": int(self.counts[i]),
                "mean": float(self.means[i]),
                "stderr": float(self.stderrs[i]),
            }
            for i in range(len(self.counts))
        ]


def decile_report(cond: Sequence[float], outcome: Sequence[float], n_bins: int = 10) -> DecileReport:
    """Equal-count bins of ``cond`` with mean outcome and standard error per bin.

    Ties are broken by input order. Bin sizes differ by at most one, larger
    bins first. Outer edges are the extreme values; inner edges sit midway
    between the last item of one bin and the first of the next.
    """
    cond = np.asarray(cond, dtype=np.float64)
    outcome = np.asarray(outcome, dtype=np.float64)
    if cond.shape != outcome.shape:
        raise ValueError("cond and outcome must be aligned")
    if cond.size < n_bins:
        raise ValueError(f"need at least {n_bins} items, got {cond.size}")
    order = np.argsort(cond, kind="stable")
    parts = np.array_split(order, n_bins)
    counts = np.array([p.size for p in parts])
    means = np.array([outcome[p].mean() for p in parts])
    stderrs = np.array(
        [outcome[p].std(ddof=1) / np.sqrt(p.size) if p.size > 1 else 0.0 for p in parts]
    )
    inner = [(cond[a[-1]] + cond[b[0]]) / 2.0 for a, b in zip(parts[:-1], parts[1:])]
    edges = np.array([cond[order[0]], *inner, cond[order[-1]]])
    return DecileReport(edges, counts, means, stderrs)
