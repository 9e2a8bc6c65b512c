"""Evaluation metrics: AUC, accuracy at a cutoff, selection summaries."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .core import InvalidArgumentError, UndefinedMetricError


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via the rank-sum statistic with midrank ties.

    Equals (concordant pairs + 0.5 * tied pairs) / (positives * negatives).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise InvalidArgumentError("scores and labels must have equal length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC undefined: labels contain a single class")
    ranks = rankdata(scores)
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(scores: np.ndarray, labels: np.ndarray, cutoff: float = 0.5) -> float:
    """Fraction of rows where (score >= cutoff) matches the label.

    Scores exactly at the cutoff classify as positive.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise InvalidArgumentError("scores and labels must have equal length")
    predicted = (scores >= cutoff).astype(labels.dtype)
    return float(np.mean(predicted == labels))


def inclusion_probabilities(
    selections: list[set[int]],
    n_views: int,
) -> np.ndarray:
    """Per-view frequency of inclusion across replications."""
    counts = np.zeros(n_views)
    for s in selections:
        for v in s:
            if not (0 <= v < n_views):
                raise InvalidArgumentError(f"selected view id {v} out of range")
            counts[v] += 1
    return counts / max(len(selections), 1)


def selection_summary(
    selections: list[set[int]],
    signal_probs: list[float],
) -> dict:
    """Inclusion probability per signal-probability group.

    ``signal_probs`` gives each view's generative signal probability; views
    sharing a value form a group.  Returns per-group mean inclusion frequency
    plus per-replication selected-view counts.
    """
    n_views = len(signal_probs)
    per_view = inclusion_probabilities(selections, n_views)
    probs = np.asarray(signal_probs, dtype=np.float64)
    groups = {}
    for pi in sorted(set(signal_probs), reverse=True):
        members = np.flatnonzero(probs == pi)
        groups[f"{pi:g}"] = float(per_view[members].mean())
    counts = [len(s) for s in selections]
    return {
        "per_view_inclusion": per_view.tolist(),
        "group_inclusion": groups,
        "mean_selected_views": float(np.mean(counts)) if counts else 0.0,
        "replications": len(selections),
    }
