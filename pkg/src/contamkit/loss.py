"""Multi-task training objective with analytic gradients.

Works on raw network outputs of any shape (e.g. ``(batch, frames)``):
a VAD logit and raw SNR / C50 values mapped through bounded sigmoids.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy.special import expit

SNR_BOUNDS = (-15.0, 80.0)
C50_BOUNDS = (-10.0, 60.0)


@dataclass(frozen=True)
class ActivationBounds:
    snr: Tuple[float, float] = SNR_BOUNDS
    c50: Tuple[float, float] = C50_BOUNDS

    def __post_init__(self):
        for name in ("snr", "c50"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} bounds must satisfy low < high")


@dataclass(frozen=True)
class Predictions:
    """Raw outputs before activation, all the same shape."""

    vad_logit: np.ndarray
    snr_raw: np.ndarray
    c50_raw: np.ndarray


@dataclass(frozen=True)
class Targets:
    vad: np.ndarray  # 0/1 per frame
    snr: np.ndarray  # dB, ignored (may be NaN) where vad == 0
    c50: np.ndarray  # dB per frame, usually the utterance value broadcast


@dataclass
class LossBundle:
    l_vad: float
    l_snr: float
    l_c50: float
    total: float
    norm_snr: float
    norm_c50: float
    grad_vad: np.ndarray
    grad_snr: np.ndarray
    grad_c50: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def bounded_activation(raw, bounds: Tuple[float, float]):
    """``low + (high - low) * sigmoid(raw)``."""
    lo, hi = bounds
    if not lo < hi:
        raise ValueError("bounds must satisfy low < high")
    return lo + (hi - lo) * expit(raw)


def bounded_activation_grad(raw, bounds: Tuple[float, float]):
    lo, hi = bounds
    s = expit(raw)
    return (hi - lo) * s * (1.0 - s)


def _bce_with_logits(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # y*softplus(-z) + (1-y)*softplus(z); guarded so infinite logits with matching targets give 0
    pos = np.logaddexp(0.0, -z)
    neg = np.logaddexp(0.0, z)
    with np.errstate(invalid="ignore"):
        out = np.where(y > 0, y * pos, 0.0) + np.where(y < 1, (1.0 - y) * neg, 0.0)
    return out


def multitask_loss(
    preds: Predictions,
    targets: Targets,
    norms: Tuple[float, float] = (1.0, 1.0),
    bounds: ActivationBounds = ActivationBounds(),
) -> LossBundle:
    """Sum of BCE (VAD) and two max-normalized MSE losses (SNR, C50).

    The SNR term averages over speech frames only. A batch without speech
    frames contributes zero SNR loss and zero SNR gradient and sets
    ``diagnostics["no_speech_frames"]``.
    """
    norm_snr, norm_c50 = (float(v) for v in norms)
    if not (norm_snr > 0 and norm_c50 > 0):
        raise ValueError("loss norms must be positive")
    z = np.asarray(preds.vad_logit, dtype=np.float64)
    r_snr = np.asarray(preds.snr_raw, dtype=np.float64)
    r_c50 = np.asarray(preds.c50_raw, dtype=np.float64)
    y = np.asarray(targets.vad, dtype=np.float64)
    t_snr = np.asarray(targets.snr, dtype=np.float64)
    t_c50 = np.asarray(targets.c50, dtype=np.float64)
    shape = z.shape
    for arr in (r_snr, r_c50, y, t_snr, t_c50):
        if arr.shape != shape:
            raise ValueError(f"shape mismatch: {arr.shape} vs {shape}")
    n = z.size
    if n == 0:
        raise ValueError("empty batch")

    l_vad = float(np.mean(_bce_with_logits(z, y)))
    grad_vad = (expit(z) - y) / n

    speech = y > 0.5
    n_speech = int(speech.sum())
    diagnostics = {"no_speech_frames": n_speech == 0}
    a_snr = bounded_activation(r_snr, bounds.snr)
    if n_speech:
        err = np.where(speech, a_snr - np.where(speech, t_snr, 0.0), 0.0)
        l_snr = float(np.sum(err**2) / n_speech) / norm_snr
        grad_snr = 2.0 * err * bounded_activation_grad(r_snr, bounds.snr) / (n_speech * norm_snr)
    else:
        l_snr = 0.0
        grad_snr = np.zeros(shape)

    err_c50 = bounded_activation(r_c50, bounds.c50) - t_c50
    l_c50 = float(np.mean(err_c50**2)) / norm_c50
    grad_c50 = 2.0 * err_c50 * bounded_activation_grad(r_c50, bounds.c50) / (n * norm_c50)

    return LossBundle(
        l_vad=l_vad,
        l_snr=l_snr,
        l_c50=l_c50,
        total=l_vad + l_snr + l_c50,
        norm_snr=norm_snr,
        norm_c50=norm_c50,
        grad_vad=grad_vad,
        grad_snr=grad_snr,
        grad_c50=grad_c50,
        diagnostics=diagnostics,
    )


def calibrate_norms(
    batches: Sequence[Tuple[Predictions, Targets]],
    bounds: ActivationBounds = ActivationBounds(),
    num_batches: int = 10,
) -> Tuple[float, float]:
    """Max unnormalized SNR and C50 loss over the calibration batches.

    A task whose loss is zero on every batch gets norm 1 and a warning.
    """
    if len(batches) != num_batches:
        raise ValueError(f"expected exactly {num_batches} calibration batches, got {len(batches)}")
    raw = [multitask_loss(p, t, (1.0, 1.0), bounds) for p, t in batches]
    norms = []
    for name in ("l_snr", "l_c50"):
        peak = max(getattr(b, name) for b in raw)
        if peak <= 0.0:
            warnings.warn(f"{name} is zero on all calibration batches; using norm 1", RuntimeWarning)
            peak = 1.0
        norms.append(peak)
    return norms[0], norms[1]


def validation_score(
    fscore: float,
    mae_snr: float,
    mae_c50: float,
    max_err: Tuple[float, float] = (SNR_BOUNDS[1] - SNR_BOUNDS[0], C50_BOUNDS[1] - C50_BOUNDS[0]),
) -> float:
    """Composite model-selection score in [0, 1], higher is better."""
    snr_max, c50_max = max_err
    if not (snr_max > 0 and c50_max > 0):
        raise ValueError("max errors must be positive")
    if not 0.0 <= fscore <= 1.0:
        raise ValueError("fscore must be a fraction")
    r_snr = min(max(mae_snr / snr_max, 0.0), 1.0)
    r_c50 = min(max(mae_c50 / c50_max, 0.0), 1.0)
    return (fscore + (1.0 - r_snr) + (1.0 - r_c50)) / 3.0


# ------------------------------------------------------------ gradient checking


def random_batch(rng: np.random.Generator, shape, speech_prob: float = 0.7):
    """Random predictions and targets, useful for gradient checks and demos."""
    vad = (rng.random(shape) < speech_prob).astype(np.float64)
    snr = np.where(vad > 0, rng.uniform(-10.0, 40.0, shape), np.nan)
    c50 = np.full(shape, rng.uniform(-5.0, 55.0))
    preds = Predictions(
        vad_logit=rng.normal(0.0, 2.0, shape),
        snr_raw=rng.normal(0.0, 1.5, shape),
        c50_raw=rng.normal(0.0, 1.5, shape),
    )
    return preds, Targets(vad=vad, snr=snr, c50=c50)


def finite_difference_grads(
    preds: Predictions,
    targets: Targets,
    norms=(1.0, 1.0),
    h: float = 1e-5,
    coords=None,
):
    """Central differences of the total loss w.r.t. each raw prediction.

    ``coords`` optionally restricts the check to a list of flat indices;
    unchecked entries are NaN.
    """
    fields = ("vad_logit", "snr_raw", "c50_raw")
    base = {f: np.array(getattr(preds, f), dtype=np.float64) for f in fields}
    out = {}
    for f in fields:
        g = np.full(base[f].size, np.nan)
        idx = range(base[f].size) if coords is None else coords
        for i in idx:
            vals = []
            for step in (h, -h):
                arrs = {k: v.copy() for k, v in base.items()}
                arrs[f].flat[i] += step
                vals.append(multitask_loss(Predictions(**arrs), targets, norms).total)
            g[i] = (vals[0] - vals[1]) / (2.0 * h)
        out[f] = g.reshape(base[f].shape)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Max of |a - n| / max(|a|, |n|, floor) over checked (non-NaN) entries."""
    a = np.asarray(analytic).ravel()
    fd = np.asarray(numeric).ravel()
    keep = ~np.isnan(fd)
    a, fd = a[keep], fd[keep]
    if a.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(a), np.abs(fd)), floor)
    return float(np.max(np.abs(a - fd) / scale))


def gradient_check(seed: int = 0, num_batches: int = 100, max_frames: int = 40) -> dict:
    """Max relative gradient error per task over random batches (some without speech)."""
    rng = np.random.default_rng(seed)
    worst = {"vad": 0.0, "snr": 0.0, "c50": 0.0}
    for b in range(num_batches):
        shape = (int(rng.integers(1, 5)), int(rng.integers(1, max_frames)))
        speech_prob = 0.0 if b % 10 == 0 else 0.7
        preds, targets = random_batch(rng, shape, speech_prob)
        norms = (float(rng.uniform(0.5, 500.0)), float(rng.uniform(0.5, 500.0)))
        bundle = multitask_loss(preds, targets, norms)
        fd = finite_difference_grads(preds, targets, norms)
        worst["vad"] = max(worst["vad"], relative_error(bundle.grad_vad, fd["vad_logit"]))
        worst["snr"] = max(worst["snr"], relative_error(bundle.grad_snr, fd["snr_raw"]))
        worst["c50"] = max(worst["c50"], relative_error(bundle.grad_c50, fd["c50_raw"]))
        if bundle.diagnostics["no_speech_frames"] and np.any(bundle.grad_snr != 0):
            raise AssertionError("non-zero SNR gradient on a batch without speech")
    return worst
