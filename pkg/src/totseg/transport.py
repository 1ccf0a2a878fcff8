"""Pseudo-label codes from entropy- and prior-regularized optimal transport.

Given a frame-by-cluster score matrix S (B x K), both solvers here find the
coupling Q on the equal-partition polytope

    rows of Q sum to 1/B,  columns of Q sum to 1/K,

that maximizes the transported score minus a regularizer:

  * ``sinkhorn_ot``  solves  max <Q, S> + eps * H(Q)
    (entropy regularization), whose optimum is a diagonal scaling of
    exp(S / eps);
  * ``sinkhorn_tot`` solves  max <Q, S> - rho * KL(Q || T)
    for a fixed positive prior T, whose optimum is a diagonal scaling of
    T * exp(S / rho). The Gaussian ``temporal_prior`` concentrates mass
    near the diagonal so codes respect temporal order.

Both reduce to Sinkhorn-Knopp: alternately rescale rows and columns of the
kernel to hit the marginals. Scaling runs in the log domain (potentials f,
g and logsumexp sweeps) so small eps or rho cannot overflow. A sweep is one
row update followed by one column update; after a column update the column
marginals are exact, so the reported error is dominated by the rows.

Codes are targets, not variables: callers must not backpropagate through
the returned matrix, and nothing here is differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .numerics import as_matrix, logsumexp_rows


@dataclass(frozen=True)
class TransportConfig:
    """Knobs shared by both solvers and the temporal prior.

    Attributes:
        epsilon: Entropy weight for the plain solver.
        rho: Prior (KL) weight for the temporally regularized solver.
        sigma: Width of the Gaussian temporal prior, in normalized
            diagonal-distance units.
        iterations: Sinkhorn sweep budget per solve.
        marginal_tolerance: If positive, stop sweeping early once both
            marginal errors fall below it.
    """

    epsilon: float = 0.05
    rho: float = 0.07
    sigma: float = 2.5
    iterations: int = 3
    marginal_tolerance: float = 0.0

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.marginal_tolerance < 0:
            raise ValueError(
                f"marginal_tolerance must be >= 0, got {self.marginal_tolerance}"
            )


@dataclass(frozen=True)
class CodeMatrix:
    """A solved coupling plus how well it sits on the polytope.

    Attributes:
        values: B x K nonnegative matrix; rows aim at 1/B, columns at 1/K.
        row_error: max abs deviation of row sums from 1/B after the last sweep.
        col_error: max abs deviation of column sums from 1/K.
        sweeps: Number of row+column sweeps actually performed.
    """

    values: np.ndarray
    row_error: float
    col_error: float
    sweeps: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def marginal_error(q) -> tuple[float, float]:
    """Max abs deviation of (row sums, column sums) from 1/B and 1/K."""
    q = as_matrix(q)
    rows, cols = q.shape
    row_err = float(np.abs(q.sum(axis=1) - 1.0 / rows).max())
    col_err = float(np.abs(q.sum(axis=0) - 1.0 / cols).max())
    return row_err, col_err


def temporal_prior(num_frames: int, num_clusters: int, sigma: float) -> np.ndarray:
    """Gaussian prior peaked along the normalized diagonal.

    Entry (i, j) for 1-based i, j is  N(d; 0, sigma)  with

        d = |i/B - j/K| / sqrt(1/B^2 + 1/K^2),

    the perpendicular-style distance of position (i/B, j/K) from the main
    diagonal of the unit square. Frames early in a video therefore prefer
    low cluster indices and late frames high ones.

    Args:
        num_frames: B, number of rows.
        num_clusters: K, number of columns.
        sigma: Positive width; larger flattens the prior toward uniform.

    Returns:
        B x K positive matrix (not normalized to any marginal).
    """
    if num_frames < 1 or num_clusters < 1:
        raise ValueError(
            f"prior needs positive dimensions, got {num_frames} x {num_clusters}"
        )
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    b, k = num_frames, num_clusters
    i = np.arange(1, b + 1, dtype=np.float64)[:, None] / b
    j = np.arange(1, k + 1, dtype=np.float64)[None, :] / k
    distance = np.abs(i - j) / np.sqrt(1.0 / b**2 + 1.0 / k**2)
    return np.exp(-(distance**2) / (2.0 * sigma**2)) / (sigma * np.sqrt(2.0 * np.pi))


def sinkhorn_ot(
    scores,
    epsilon: float,
    iterations: int = 3,
    tolerance: float = 0.0,
) -> CodeMatrix:
    """Entropy-regularized codes: diagonal scaling of exp(scores / epsilon).

    Args:
        scores: B x K matrix of frame-cluster similarities, finite.
        epsilon: Positive entropy weight.
        iterations: Sweep budget.
        tolerance: Optional early-stop threshold on both marginal errors.

    Returns:
        CodeMatrix with the scaled coupling and final marginal errors.

    Raises:
        NumericalError: If the kernel is not usable (non-finite scores).
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    log_kernel = as_matrix(scores) / epsilon
    return _scale_to_polytope(
        log_kernel, iterations, tolerance, f"entropic kernel (epsilon={epsilon})"
    )


def sinkhorn_tot(
    scores,
    prior,
    rho: float,
    iterations: int = 3,
    tolerance: float = 0.0,
) -> CodeMatrix:
    """Prior-regularized codes: diagonal scaling of prior * exp(scores / rho).

    Args:
        scores: B x K matrix of frame-cluster similarities, finite.
        prior: B x K nonnegative prior coupling (zero entries stay zero).
        rho: Positive weight of the KL pull toward the prior.
        iterations: Sweep budget.
        tolerance: Optional early-stop threshold on both marginal errors.

    Returns:
        CodeMatrix with the scaled coupling and final marginal errors.

    Raises:
        NumericalError: If the kernel has NaNs or rows/columns of zeros.
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    scores = as_matrix(scores)
    prior = as_matrix(prior)
    if prior.shape != scores.shape:
        raise ValueError(
            f"prior shape {prior.shape} does not match scores shape {scores.shape}"
        )
    if np.any(prior < 0):
        raise ValueError("prior must be nonnegative")
    with np.errstate(divide="ignore"):
        log_kernel = scores / rho + np.log(prior)
    return _scale_to_polytope(
        log_kernel, iterations, tolerance, f"prior-weighted kernel (rho={rho})"
    )


def _scale_to_polytope(
    log_kernel: np.ndarray,
    iterations: int,
    tolerance: float,
    context: str,
) -> CodeMatrix:
    """Log-domain Sinkhorn-Knopp onto rows=1/B, columns=1/K.

    -inf entries (zero kernel mass) are legal; NaN / +inf are not, and an
    all-zero row or column makes the marginals unreachable.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if tolerance < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance}")
    if np.isnan(log_kernel).any() or np.isposinf(log_kernel).any():
        raise NumericalError(f"non-finite values in {context}")
    if np.isneginf(log_kernel.max(axis=1)).any() or np.isneginf(
        log_kernel.max(axis=0)
    ).any():
        raise NumericalError(f"empty row or column in {context}")

    b, k = log_kernel.shape
    log_row_target = -np.log(b)
    log_col_target = -np.log(k)
    f = np.zeros(b)
    g = np.zeros(k)
    sweeps = 0
    for _ in range(iterations):
        f = log_row_target - logsumexp_rows(log_kernel + g[None, :])
        g = log_col_target - logsumexp_rows(log_kernel.T + f[None, :])
        sweeps += 1
        # Materializing Q to test convergence costs as much as a sweep, so
        # on long runs the test happens only every 16th sweep; overshooting
        # the stopping point only drives the marginals further down.
        if tolerance > 0 and (sweeps <= 32 or sweeps % 16 == 0):
            q = np.exp(f[:, None] + log_kernel + g[None, :])
            row_err, col_err = marginal_error(q)
            if row_err <= tolerance and col_err <= tolerance:
                break
    q = np.exp(f[:, None] + log_kernel + g[None, :])
    row_err, col_err = marginal_error(q)
    return CodeMatrix(values=q, row_error=row_err, col_error=col_err, sweeps=sweeps)
