"""Clustering cross-entropy and temporal coherence, with analytic gradients.

Both losses return their gradients alongside the value; nothing here calls
an autograd engine. The clustering loss compares each frame's predicted
cluster distribution against its transported code; the coherence loss asks
each embedded frame to recognize its own temporal neighbor among the
batch's positives.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix, logsumexp_rows, matmul, row_softmax

logger = logging.getLogger(__name__)

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class LossConfig:
    """Loss hyperparameters.

    Attributes:
        temperature: Softmax sharpness of the predicted codes.
        alpha: Weight of the temporal coherence term in the total loss.
        window: Half-width (in frames) of the positive sampling window.
        renormalize_codes: Rescale each code row to sum to 1 before the
            clustering loss, instead of consuming rows that sum to 1/B.
    """

    temperature: float = 0.1
    alpha: float = 1.0
    window: int = 30
    renormalize_codes: bool = False

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")


def predicted_codes(embeddings, prototypes, temperature: float) -> np.ndarray:
    """Row-stochastic cluster predictions from embedding/prototype similarity.

    Args:
        embeddings: B x D matrix, rows expected to be unit norm.
        prototypes: K x D matrix, rows expected to be unit norm.
        temperature: Positive softmax sharpness.

    Returns:
        B x K matrix of probabilities, rows summing to one.
    """
    scores = matmul(embeddings, as_matrix(prototypes).T)
    return row_softmax(scores, temperature)


def cross_entropy(
    predictions, codes, temperature: float
) -> tuple[float, np.ndarray]:
    """Mean per-frame cross-entropy of predictions against fixed codes.

    The loss is -(1/B) sum_ij codes_ij * log(predictions_ij). Codes are
    treated as constants: the returned gradient is with respect to the
    pre-softmax scores that produced ``predictions``, which for row
    softmax at the given temperature is

        (1 / (B * temperature)) * (row_mass * predictions - codes),

    where row_mass is each code row's sum. Zero predictions facing
    positive code mass are clamped at a log floor and logged, since they
    signal saturated scores rather than a valid optimum.

    Args:
        predictions: B x K row-stochastic matrix.
        codes: B x K nonnegative matrix (rows need not sum to one).
        temperature: The softmax temperature used to build predictions.

    Returns:
        (loss value, B x K gradient w.r.t. the pre-softmax scores).
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    p = as_matrix(predictions)
    q = as_matrix(codes)
    if p.shape != q.shape:
        raise ValueError(f"predictions {p.shape} and codes {q.shape} differ in shape")
    b = p.shape[0]
    clamped = (p < _LOG_FLOOR) & (q > 0)
    if clamped.any():
        logger.warning(
            "cross_entropy clamped %d zero predictions with positive code mass",
            int(clamped.sum()),
        )
    loss = float(-(q * np.log(np.maximum(p, _LOG_FLOOR))).sum() / b)
    row_mass = q.sum(axis=1, keepdims=True)
    grad_scores = (row_mass * p - q) / (b * temperature)
    return loss, grad_scores


def temporal_coherence(
    anchors, positives
) -> tuple[float, np.ndarray, np.ndarray]:
    """Each anchor should score its own positive above everyone else's.

    With similarity A = anchors @ positives.T, the loss is the mean over
    rows of  log(sum_j exp(A_ij)) - A_ii:  softmax cross-entropy with the
    diagonal as the target and no temperature. Rows must be aligned
    (anchor i's neighbor is positives row i) and both sides are expected
    to be unit-norm embeddings.

    Args:
        anchors: N x D matrix.
        positives: N x D matrix, row-aligned with anchors.

    Returns:
        (loss value, gradient w.r.t. anchors, gradient w.r.t. positives).
    """
    z = as_matrix(anchors)
    mates = as_matrix(positives)
    if z.shape != mates.shape:
        raise ValueError(
            f"anchors {z.shape} and positives {mates.shape} differ in shape"
        )
    n = z.shape[0]
    sims = matmul(z, mates.T)
    loss = float((logsumexp_rows(sims) - np.diag(sims)).mean())
    # d loss / d sims = (softmax(rows) - I) / n
    dsims = row_softmax(sims, 1.0)
    np.fill_diagonal(dsims, np.diag(dsims) - 1.0)
    dsims /= n
    grad_anchors = dsims @ mates
    grad_positives = dsims.T @ z
    return loss, grad_anchors, grad_positives


def total_loss(clustering: float, coherence: float, alpha: float) -> float:
    """Training objective: clustering loss plus alpha times coherence."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return clustering + alpha * coherence
