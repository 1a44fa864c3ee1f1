"""Recovery and detection metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_TAU_RATIO = 0.1


def nmse(estimate, truth) -> float:
    """Normalized MSE in dB; batches are averaged before taking the ratio.

    Returns ``-inf`` when the estimate matches the truth exactly.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch {estimate.shape} vs {truth.shape}")
    den = float(np.sum(truth * truth))
    if den == 0.0:
        raise ValueError("NMSE is undefined for an all-zero ground truth")
    diff = estimate - truth
    num = float(np.sum(diff * diff))
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def nmse_json(value: float) -> dict:
    """JSON-safe form of an NMSE value: ``-inf`` becomes ``null`` plus a flag."""
    if math.isinf(value):
        return {"nmse_db": None, "exact": True}
    return {"nmse_db": value, "exact": False}


def snr_empirical(clean, noise) -> float:
    clean = np.asarray(clean)
    noise = np.asarray(noise)
    pn = float(np.sum(np.abs(noise) ** 2))
    if pn == 0.0:
        raise ValueError("empirical SNR undefined for zero noise")
    return 10.0 * math.log10(float(np.sum(np.abs(clean) ** 2)) / pn)


def device_scores(estimate, n_complex: int) -> np.ndarray:
    """Per-device energy, rejoining lifted rows ``n`` and ``N + n``."""
    estimate = np.asarray(estimate, dtype=float)
    if estimate.shape[-2] != 2 * n_complex:
        raise ValueError(f"estimate has {estimate.shape[-2]} rows, expected {2 * n_complex}")
    sq = np.sum(estimate * estimate, axis=-1)
    return np.sqrt(sq[..., :n_complex] + sq[..., n_complex:])


def relative_tau(ratio: float = DEFAULT_TAU_RATIO):
    def rule(scores: np.ndarray) -> np.ndarray:
        return ratio * np.max(scores, axis=-1, keepdims=True)

    rule.__name__ = f"relative_{ratio:g}"
    return rule


def detect_activity(estimate, n_complex: int, tau_rule=None) -> np.ndarray:
    """Binary activity decision per device (batch-aware).

    A device is active when its score exceeds ``tau_rule(scores)``; the
    default rule is 0.1 times the largest score of the instance.
    """
    rule = relative_tau() if tau_rule is None else tau_rule
    scores = device_scores(estimate, n_complex)
    return (scores > rule(scores)).astype(np.int64)


def oracle_detect_activity(estimate, n_complex: int, activity) -> np.ndarray:
    """Detection with the per-instance threshold that minimizes the error count."""
    scores = np.atleast_2d(device_scores(estimate, n_complex))
    truth = np.atleast_2d(np.asarray(activity)).astype(bool)
    out = np.zeros_like(scores, dtype=np.int64)
    for b, (sc, tr) in enumerate(zip(scores, truth)):
        cands = np.concatenate([[-1.0], np.unique(sc)])
        errs = [np.count_nonzero((sc > c) != tr) for c in cands]
        out[b] = sc > cands[int(np.argmin(errs))]
    return out.reshape(np.shape(device_scores(estimate, n_complex)))


@dataclass
class EvalSummary:
    nmse_db: float
    detection_error_prob: float
    miss_count: int
    false_alarm_count: int
    per_layer_nmse: list[float] | None = None


def summarize(estimate, truth, activity, n_complex: int, tau_rule=None, per_layer=None):
    detected = detect_activity(estimate, n_complex, tau_rule)
    truth_act = np.asarray(activity).astype(bool)
    miss = int(np.count_nonzero(truth_act & ~detected.astype(bool)))
    fa = int(np.count_nonzero(~truth_act & detected.astype(bool)))
    return EvalSummary(
        nmse_db=nmse(estimate, truth),
        detection_error_prob=(miss + fa) / truth_act.size,
        miss_count=miss,
        false_alarm_count=fa,
        per_layer_nmse=per_layer,
    )
