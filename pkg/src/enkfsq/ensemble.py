"""Ensemble statistics and Kalman-gain computation shared by all filters.

An ensemble is represented as a plain ``(n, N)`` ndarray: one column per
member, one row per state component. The forecast covariance is never formed
explicitly; the gain is computed from the anomalies with a Cholesky solve of
the (small) m x m innovation covariance. Observation errors are restricted to
a diagonal R, so the API takes a variance vector and correlated R is
unrepresentable by construction.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "EnsembleStats",
    "ObservationOperator",
    "GainContext",
    "compute_stats",
    "kalman_gain",
]


@dataclass(frozen=True)
class EnsembleStats:
    """Mean and anomalies of an ensemble.

    Attributes
    ----------
    mean : ndarray (n,)
        Per-component ensemble average.
    anomalies : ndarray (n, N)
        Member deviations from the mean; columns sum to zero.
    """

    mean: np.ndarray
    anomalies: np.ndarray

    @property
    def n(self):
        return self.anomalies.shape[0]

    @property
    def size(self):
        return self.anomalies.shape[1]


@dataclass(frozen=True)
class ObservationOperator:
    """Linear selection operator: each row observes one state component."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp)
        object.__setattr__(self, "rows", rows)
        if rows.ndim != 1 or rows.size == 0:
            raise ValueError("observation operator needs a 1-d, non-empty index list")
        if np.unique(rows).size != rows.size:
            raise ValueError("observed state indices must be unique")
        if rows.min() < 0:
            raise ValueError("observed state indices must be non-negative")

    @property
    def m(self):
        return self.rows.size

    def apply(self, states):
        """Select observed components from a state vector or ensemble."""
        return np.asarray(states)[self.rows]


@dataclass(frozen=True)
class GainContext:
    """Kalman gain with the diagonal observation-error variances it used."""

    gain: np.ndarray
    obs_error_variances: np.ndarray


def compute_stats(ensemble):
    """Compute mean and anomalies of an ``(n, N)`` ensemble.

    Raises ``ValueError`` on degenerate input (fewer than two members or
    non-finite entries).
    """
    states = np.asarray(ensemble, dtype=float)
    if states.ndim != 2:
        raise ValueError(f"ensemble must be 2-d (n, N), got shape {states.shape}")
    if states.shape[1] < 2:
        raise ValueError(f"need at least 2 members, got N={states.shape[1]}")
    if not np.all(np.isfinite(states)):
        raise ValueError("ensemble contains non-finite entries")
    mean = states.mean(axis=1)
    anomalies = states - mean[:, None]
    return EnsembleStats(mean=mean, anomalies=anomalies)


def kalman_gain(stats, h, r_diag):
    """Kalman gain from ensemble anomalies and diagonal observation errors.

    Evaluates ``K = P H^T (H P H^T + R)^{-1}`` with ``P = A A^T / (N - 1)``
    without ever forming P: the m x m innovation covariance is factorized by
    Cholesky and applied to ``A (HA)^T / (N - 1)``.

    Parameters
    ----------
    stats : EnsembleStats
    h : ObservationOperator
    r_diag : array_like (m,)
        Observation error variances (diagonal of R), all strictly positive.

    Returns
    -------
    GainContext
    """
    r_diag = np.asarray(r_diag, dtype=float)
    if r_diag.ndim != 1 or r_diag.size != h.m:
        raise ValueError(f"r_diag must have length m={h.m}, got shape {r_diag.shape}")
    if not np.all(r_diag > 0.0):
        raise ValueError("observation error variances must be strictly positive")

    ha = h.apply(stats.anomalies)                    # (m, N)
    scale = 1.0 / (stats.size - 1)
    innov_cov = scale * (ha @ ha.T)                  # (m, m)
    innov_cov[np.diag_indices_from(innov_cov)] += r_diag
    cross = scale * (stats.anomalies @ ha.T)         # (n, m) = P H^T
    try:
        factor = cho_factor(innov_cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "innovation covariance is not positive definite; "
            "check R and ensemble for degeneracy"
        ) from exc
    gain = cho_solve(factor, cross.T).T              # (n, m)
    return GainContext(gain=gain, obs_error_variances=r_diag)
