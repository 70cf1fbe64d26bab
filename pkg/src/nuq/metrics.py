"""Ranking and selective-prediction metrics.

All metrics accept +inf scores (two +inf values tie); NaN is rejected.
Sorts break ties by input index, so results are reproducible.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError


def _scores(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if np.any(np.isnan(arr)):
        raise InputError(f"{name} must not contain NaN")
    return arr


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """One-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    n = values.shape[0]
    boundaries = np.flatnonzero(sorted_vals[1:] != sorted_vals[:-1]) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [n]))
    ranks = np.empty(n)
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    return ranks


def roc_auc(in_scores, out_scores) -> float:
    """P(out_score > in_score) + 0.5 P(tie), by rank sums in O(n log n)."""
    a = _scores(in_scores, "in_scores")
    b = _scores(out_scores, "out_scores")
    if a.size == 0 or b.size == 0:
        raise InputError("roc_auc needs at least one score on each side")
    ranks = _average_ranks(np.concatenate([a, b]))
    rank_sum_out = ranks[a.size:].sum()
    u = rank_sum_out - b.size * (b.size + 1) / 2.0
    return float(u / (a.size * b.size))


def rcc_auc(uncertainties, errors) -> float:
    """Discrete risk-coverage area: sum over k of prefix error rate.

    Points are taken in ascending uncertainty (ties by input index);
    risk(k) is the error fraction among the k most-confident points and
    the returned value is the unnormalized sum of risk(1..n).  Lower is
    better; zero iff there are no errors.
    """
    unc = _scores(uncertainties, "uncertainties")
    err = np.asarray(errors, dtype=bool).reshape(-1)
    if unc.shape[0] != err.shape[0]:
        raise InputError("uncertainties and errors must have equal length")
    if unc.shape[0] < 1:
        raise InputError("rcc_auc needs at least one sample")
    order = np.argsort(unc, kind="stable")
    risks = np.cumsum(err[order]) / np.arange(1, unc.shape[0] + 1)
    return float(risks.sum())


def risk_coverage_points(uncertainties, errors) -> list[tuple[float, float]]:
    """(coverage k/n, prefix risk) pairs behind the rcc_auc sum."""
    unc = _scores(uncertainties, "uncertainties")
    err = np.asarray(errors, dtype=bool).reshape(-1)
    if unc.shape[0] != err.shape[0]:
        raise InputError("uncertainties and errors must have equal length")
    n = unc.shape[0]
    order = np.argsort(unc, kind="stable")
    risks = np.cumsum(err[order]) / np.arange(1, n + 1)
    return [(float((k + 1) / n), float(risks[k])) for k in range(n)]


def accuracy_rejection_curve(uncertainties, correctness) -> list[tuple[float, float]]:
    """Prefix accuracies after the ascending-uncertainty sort."""
    unc = _scores(uncertainties, "uncertainties")
    correct = np.asarray(correctness, dtype=bool).reshape(-1)
    if unc.shape[0] != correct.shape[0]:
        raise InputError("uncertainties and correctness must have equal length")
    n = unc.shape[0]
    if n < 1:
        raise InputError("accuracy_rejection_curve needs at least one sample")
    order = np.argsort(unc, kind="stable")
    accs = np.cumsum(correct[order]) / np.arange(1, n + 1)
    return [(float((k + 1) / n), float(accs[k])) for k in range(n)]


def roc_points(in_scores, out_scores) -> list[tuple[float, float]]:
    """(fpr, tpr) pairs sweeping the decision threshold over distinct scores.

    "Positive" is out-of-distribution, flagged when the score is at least
    the threshold.  The trapezoid area under these points equals roc_auc.
    """
    a = _scores(in_scores, "in_scores")
    b = _scores(out_scores, "out_scores")
    if a.size == 0 or b.size == 0:
        raise InputError("roc_points needs at least one score on each side")
    merged = np.concatenate([a, b])
    is_out = np.concatenate([np.zeros(a.size, dtype=bool), np.ones(b.size, dtype=bool)])
    order = np.argsort(-merged, kind="stable")
    sorted_scores = merged[order]
    sorted_out = is_out[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = merged.shape[0]
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            tp += int(sorted_out[j])
            fp += int(not sorted_out[j])
            j += 1
        points.append((fp / a.size, tp / b.size))
        i = j
    return points


def ood_prefix_curve(in_scores, out_scores) -> np.ndarray:
    """Cumulative out-of-distribution counts along the merged ascending sort.

    Ties between the two sides resolve with in-distribution first.
    """
    a = _scores(in_scores, "in_scores")
    b = _scores(out_scores, "out_scores")
    if a.size == 0 or b.size == 0:
        raise InputError("ood_prefix_curve needs at least one score on each side")
    merged = np.concatenate([a, b])
    marker = np.concatenate([np.zeros(a.size, dtype=np.int64), np.ones(b.size, dtype=np.int64)])
    order = np.argsort(merged, kind="stable")
    return np.cumsum(marker[order])


def agreement(preds_a, preds_b) -> float:
    """Fraction of positions where the two prediction sequences match."""
    a = np.asarray(preds_a).reshape(-1)
    b = np.asarray(preds_b).reshape(-1)
    if a.shape[0] != b.shape[0]:
        raise InputError("prediction sequences must have equal length")
    if a.shape[0] == 0:
        raise InputError("agreement needs at least one prediction")
    return float(np.mean(a == b))
