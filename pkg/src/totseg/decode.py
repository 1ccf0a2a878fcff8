"""Order-constrained Viterbi smoothing of frame probabilities.

Actions are assumed to occur in the fixed order 0..K-1. Decoding finds the
best monotone label path under that order: start in cluster 0, end in
cluster K-1, move by steps of 0 or +1, so every cluster gets at least one
frame. The path maximizes the summed per-frame log probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix

PROBABILITY_FLOOR = 1e-12


@dataclass(frozen=True)
class SegmentationResult:
    """Decoded path for one video.

    Attributes:
        labels: F cluster ids, monotone non-decreasing, covering 0..K-1.
        log_score: Sum of log_probs along the path.
        segments: Maximal runs of equal labels as (cluster, start, end)
            with half-open frame ranges partitioning [0, F).
    """

    labels: np.ndarray
    log_score: float
    segments: list[tuple[int, int, int]]


def log_probabilities(probs, floor: float = PROBABILITY_FLOOR) -> np.ndarray:
    """Elementwise log with a positive floor, so lattices stay finite."""
    if floor <= 0:
        raise ValueError(f"floor must be positive, got {floor}")
    return np.log(np.maximum(as_matrix(probs), floor))


def segments_from_labels(labels) -> list[tuple[int, int, int]]:
    """Maximal runs of equal labels as (label, start, end), end exclusive.

    Raises:
        ValueError: On an empty label array.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("cannot segment an empty label sequence")
    boundaries = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [labels.size]])
    return [(int(labels[s]), int(s), int(e)) for s, e in zip(starts, ends)]


def viterbi_fixed_order(log_probs) -> SegmentationResult:
    """Best monotone full-traversal path through an F x K log lattice.

    Dynamic program on suffix scores: best[t, k] is the top score of
    frames t..F-1 given frame t sits in cluster k and the path still has
    to reach K-1. The label walk then runs forward, staying in the current
    cluster on ties, which pushes every boundary as late as the optimum
    allows.

    Args:
        log_probs: F x K matrix of finite log probabilities (clamp zeros
            with ``log_probabilities`` first).

    Returns:
        SegmentationResult with labels, path score, and segments.

    Raises:
        ValueError: If F < K (some cluster would get no frame) or the
            lattice is not finite.
    """
    lp = as_matrix(log_probs)
    f, k = lp.shape
    if f < k:
        raise ValueError(
            f"no feasible path: {f} frames cannot cover {k} clusters in order"
        )
    if not np.isfinite(lp).all():
        raise ValueError("log_probs must be finite; clamp with log_probabilities")

    best = np.full((f, k), -np.inf)
    best[f - 1, k - 1] = lp[f - 1, k - 1]
    for t in range(f - 2, -1, -1):
        advance = np.concatenate([best[t + 1, 1:], [-np.inf]])
        best[t] = lp[t] + np.maximum(best[t + 1], advance)

    labels = np.empty(f, dtype=np.int64)
    labels[0] = 0
    cluster = 0
    for t in range(1, f):
        if cluster + 1 < k and best[t, cluster + 1] > best[t, cluster]:
            cluster += 1
        labels[t] = cluster
    return SegmentationResult(
        labels=labels,
        log_score=float(best[0, 0]),
        segments=segments_from_labels(labels),
    )
