"""Collision-risk arithmetic, ROC/MSE metrics, position heatmaps and a
two-sample bootstrap test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


def collision_prob_iid(tpr, s):
    """Chance that `s` consecutive positive samples are all missed: (1 - tpr)^s.

    Evaluated in log space so tiny probabilities do not underflow early.
    """
    _check_prob("tpr", tpr)
    if s < 1:
        raise ValueError("s must be >= 1")
    if tpr == 1.0:
        return 0.0
    return math.exp(s * math.log1p(-tpr))


def collision_prob_product(p_tn, p_fn):
    """General i.i.d. approach: every negative sample is a true negative and
    every following positive sample a false negative.

    `p_tn` holds per-sample TN probabilities for the first (negative) part of
    the approach, `p_fn` the FN probabilities for the remaining positives.
    """
    probs = np.concatenate([np.asarray(p_tn, dtype=float).ravel(),
                            np.asarray(p_fn, dtype=float).ravel()])
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    if np.any(probs == 0):
        return 0.0
    return float(math.exp(np.sum(np.log(probs))))


def persistence_transition(p_ident, tpr):
    """Negative-to-negative transition when each classification repeats the
    previous one with probability `p_ident` and is otherwise independent."""
    _check_prob("p_ident", p_ident)
    _check_prob("tpr", tpr)
    return p_ident + (1.0 - p_ident) * (1.0 - tpr)


def collision_prob_markov(p_ident, tpr, s):
    """Collision probability under the persistence model: transition^(s-1)."""
    if s < 2:
        raise ValueError("s must be >= 2")
    return persistence_transition(p_ident, tpr) ** (s - 1)


def collision_prob_chain(transition, start, collision_state, steps):
    """Probability mass in `collision_state` after `steps` steps of an
    arbitrary Markov chain, started from state index `start`."""
    P = np.asarray(transition, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("transition matrix must be square")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0):
        raise ValueError("transition rows must be probability distributions")
    dist = np.zeros(len(P))
    dist[start] = 1.0
    for _ in range(steps):
        dist = dist @ P
    return float(dist[collision_state])


def spurious_turn_rate(fpr, fps, speed):
    """Expected false-positive turns per meter travelled."""
    _check_prob("fpr", fpr)
    if speed <= 0:
        raise ValueError("speed must be positive")
    if fps <= 0:
        raise ValueError("fps must be positive")
    return fpr * fps / speed


def _auc_counts(tp, fp, n_pos, n_neg):
    # trapezoid rule on integer counts, divided once at the end so it is exact
    area = np.sum(np.diff(fp) * (tp[1:] + tp[:-1]))
    return float(area / (2 * n_pos * n_neg))


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # a sample is called positive when estimate > threshold
    auc: float
    degenerate: bool = False  # only one class present; auc is nan

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(estimates, truth, t_gt):
    """ROC of `estimates` against labels ``truth > t_gt``.

    Thresholds run from +inf down through every distinct estimate to -inf,
    so the curve starts at (0, 0) and ends at (1, 1).
    """
    est = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape or est.ndim != 1 or len(est) == 0:
        raise ValueError("estimates and truth must be equal-length, non-empty 1-D arrays")
    labels = truth > t_gt
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    values = np.unique(est)[::-1]
    thresholds = np.concatenate([[np.inf], values, [-np.inf]])
    order = np.argsort(-est, kind="stable")
    sorted_est = est[order]
    cum_pos = np.concatenate([[0], np.cumsum(labels[order])])
    # number of estimates strictly above each threshold
    above = np.searchsorted(-sorted_est, -thresholds, side="left")
    tp = cum_pos[above]
    fp = above - tp
    degenerate = n_pos == 0 or n_neg == 0
    tpr = tp / n_pos if n_pos else np.zeros(len(thresholds))
    fpr = fp / n_neg if n_neg else np.zeros(len(thresholds))
    auc = math.nan if degenerate else _auc_counts(tp, fp, n_pos, n_neg)
    return RocCurve(fpr, tpr, thresholds, auc, degenerate)


def operating_point(roc, target_tpr):
    """(threshold, fpr, tpr) of the ROC point whose TPR is closest to
    `target_tpr`; among equally close points the lowest FPR wins."""
    gap = np.abs(roc.tpr - target_tpr)
    candidates = np.flatnonzero(gap == gap.min())
    i = candidates[np.argmin(roc.fpr[candidates])]
    return float(roc.thresholds[i]), float(roc.fpr[i]), float(roc.tpr[i])


def classification_rates(estimates, truth, t):
    """(TPR, FPR) of ``estimates > t`` against ``truth > t``; nan when a class is absent."""
    est = np.asarray(estimates, dtype=float) > t
    pos = np.asarray(truth, dtype=float) > t
    n_pos, n_neg = pos.sum(), (~pos).sum()
    tpr = float((est & pos).sum() / n_pos) if n_pos else math.nan
    fpr = float((est & ~pos).sum() / n_neg) if n_neg else math.nan
    return tpr, fpr


def mse(estimates, truth):
    a = np.asarray(estimates, dtype=float)
    b = np.asarray(truth, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("mse of empty arrays")
    return float(np.mean((a - b) ** 2))


def bootstrap_mean_diff_test(a, b, iters=10_000, rng=None):
    """Two-sided bootstrap p-value for a difference in means.

    Both groups are resampled with replacement from the pooled data (the
    null of no difference); p is the fraction of resampled |mean
    differences| at least as large as the observed one, with the usual +1
    correction so it is never exactly zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if iters < 1000:
        raise ValueError("iters must be >= 1000")
    rng = np.random.default_rng() if rng is None else rng
    observed = abs(a.mean() - b.mean())
    pooled = np.concatenate([a, b])
    ia = rng.integers(0, len(pooled), size=(iters, len(a)))
    ib = rng.integers(0, len(pooled), size=(iters, len(b)))
    diffs = np.abs(pooled[ia].mean(axis=1) - pooled[ib].mean(axis=1))
    # guard against rounding making identical means look different
    hits = np.count_nonzero(diffs >= observed - 1e-12 * max(1.0, observed))
    return (hits + 1) / (iters + 1)


def heatmap(xy, modes=None, mode_filter=None, bins=20, extent=(10.0, 10.0)):
    """2-D histogram of positions over the room, optionally restricted to
    frames whose mode is in `mode_filter`. Returns counts indexed [ix, iy]."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if mode_filter is not None:
        keep = np.isin(np.asarray(modes), np.atleast_1d(mode_filter))
        xy = xy[keep]
    counts, _, _ = np.histogram2d(xy[:, 0], xy[:, 1], bins=bins,
                                  range=[[0.0, extent[0]], [0.0, extent[1]]])
    return counts.astype(np.int64)
