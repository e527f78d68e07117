"""Analysis schemes: stochastic EnKF, the semi-qualitative EnKF, and the
partial deterministic EnKF.

Three update rules cover the four experimental regimes:

* ``enkf_analysis`` is the stochastic (perturbed-observations) EnKF for
  batches of hard data only. It serves both the no-detection-limit regime
  and the ignore-soft-data regime (the caller drops OR rows for the latter).
* ``enkfsq_analysis`` consumes mixed hard/OR batches. Each member is
  classified against the detection limit per OR row, gets the matching
  observation-error variance (in-range or out-of-range) in its own R, and is
  updated with its own gain; OR rows are perturbed with draws from the
  two-piece Gaussian likelihood.
* ``pdenkf_analysis`` is deterministic: hard rows update the mean with the
  full gain and the anomalies with half the gain; OR rows never touch the
  mean and contract, with half gain, only the anomalies of members inside
  the observable range. The result is intentionally not recentered, which
  preserves extra spread.

The stochastic schemes compute gains by cross validation: the ensemble is
split into a few groups and each member's gain uses the complementary
groups' statistics. This removes the inbreeding between gain and update that
makes single-gain perturbed-observation filters collapse their spread in
long cycling runs, without any inflation or localization. Per-member gains
differ only through the R diagonal, and the m x m Cholesky solves are
memoized per distinct classification pattern within each call.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ensemble import ObservationOperator, compute_stats, kalman_gain
from .observations import LimitSide, TwoPieceGaussian

__all__ = [
    "FilterKind",
    "AnalysisDiagnostics",
    "AnalysisResult",
    "enkf_analysis",
    "enkfsq_analysis",
    "pdenkf_analysis",
]


class FilterKind(Enum):
    ENKF_ALL = "enkf-all"
    ENKF_IGNORE = "enkf-ig"
    ENKF_SQ = "enkf-sq"
    PDENKF = "pdenkf"


@dataclass
class AnalysisDiagnostics:
    """Per-analysis bookkeeping.

    ``in_range_members`` counts, per OR row, how many members were classified
    inside the observable range. ``perturbed_obs`` is the (m, N) matrix of
    perturbed observations for stochastic schemes (None for deterministic).
    """

    n_hard: int
    n_soft: int
    in_range_members: np.ndarray | None = None
    perturbed_obs: np.ndarray | None = None
    note: str = ""


@dataclass
class AnalysisResult:
    analysis: np.ndarray
    diagnostics: AnalysisDiagnostics


def _as_forecast(forecast):
    forecast = np.asarray(forecast, dtype=float)
    if forecast.ndim != 2:
        raise ValueError("forecast ensemble must be (n, N)")
    return forecast


def _batch_upper(forecast, batch):
    """Reduce to the upper-limit case by mirroring when needed."""
    if batch.limit.side is LimitSide.LOWER:
        return -forecast, batch.mirrored(), True
    return forecast, batch, False


CROSS_VALIDATION_FOLDS = 4
_LOO_BELOW = 50  # below this size every member gets the maximal complement


def _subensembles(n_members, folds=CROSS_VALIDATION_FOLDS):
    """(update indices, statistics indices) pairs for cross-validated gains.

    Members are split into ``folds`` groups; each group is updated with
    gains computed from the complementary groups. Gains stay well
    conditioned only when the complement is large, so small ensembles use
    leave-one-out complements instead of the grouped shortcut. Tiny
    ensembles that cannot spare a complement of two fall back to
    self-statistics.
    """
    members = np.arange(n_members)
    if n_members < 4:
        return [(members, members)]
    if n_members < _LOO_BELOW:
        return [
            (members[i:i + 1], np.delete(members, i)) for i in range(n_members)
        ]
    groups = np.array_split(members, folds)
    return [
        (g, np.concatenate([groups[j] for j in range(folds) if j != i]))
        for i, g in enumerate(groups)
    ]


def _apply_gain(block, gain, sites, perturbed):
    """Members + K (perturbed obs - observed members), column block."""
    return block + gain @ (perturbed - block[sites])


def enkf_analysis(forecast, batch, rng):
    """Stochastic EnKF update with perturbed observations.

    The batch must contain hard data only; each member sees the observation
    perturbed with an independent N(0, sigma_obs^2) draw and is updated with
    its group's cross-validated gain. An empty batch is a logged no-op.
    """
    forecast = _as_forecast(forecast)
    forecast, batch, mirrored = _batch_upper(forecast, batch)
    if batch.n_out_of_range:
        raise ValueError(
            "enkf_analysis takes hard data only; drop OR rows first "
            "(or use enkfsq_analysis / pdenkf_analysis)"
        )
    n, n_members = forecast.shape
    if batch.m == 0:
        sign = -1.0 if mirrored else 1.0
        diag = AnalysisDiagnostics(n_hard=0, n_soft=0, note="empty batch: no-op")
        return AnalysisResult(analysis=sign * forecast.copy(), diagnostics=diag)

    h = ObservationOperator(batch.sites)
    perturbed = (
        batch.values[:, None]
        + batch.sigma_obs[:, None] * rng.standard_normal((batch.m, n_members))
    )
    r_diag = batch.sigma_obs**2
    analysis = np.empty_like(forecast)
    for update, source in _subensembles(n_members):
        stats = compute_stats(forecast[:, source])
        gain = kalman_gain(stats, h, r_diag).gain
        analysis[:, update] = _apply_gain(
            forecast[:, update], gain, h.rows, perturbed[:, update]
        )
    if mirrored:
        analysis = -analysis
        perturbed = -perturbed
    diag = AnalysisDiagnostics(n_hard=batch.m, n_soft=0, perturbed_obs=perturbed)
    return AnalysisResult(analysis=analysis, diagnostics=diag)


def _soft_row_sigmas(batch):
    soft = np.flatnonzero(batch.is_or)
    sigma_or = batch.sigma_or[soft]
    if np.any(~np.isfinite(sigma_or)) or np.any(sigma_or <= 0):
        raise ValueError("every OR row needs a finite, positive sigma_or")
    return soft, sigma_or


def enkfsq_analysis(forecast, batch, rng):
    """Semi-qualitative EnKF update for mixed hard/OR batches.

    Per member: every OR row is classified by comparing the observed forecast
    value against the detection limit (strictly above means out of range);
    the member's R carries sigma_or^2 on OR rows where it is out of range and
    sigma_obs^2 elsewhere; the member is then updated with its own gain.
    Hard rows are perturbed with N(y, sigma_obs^2), OR rows with two-piece
    Gaussian draws.

    With no OR rows this reduces bit-for-bit to :func:`enkf_analysis`.
    """
    forecast = _as_forecast(forecast)
    forecast, batch, mirrored = _batch_upper(forecast, batch)
    n, n_members = forecast.shape
    if batch.m == 0:
        sign = -1.0 if mirrored else 1.0
        diag = AnalysisDiagnostics(n_hard=0, n_soft=0, note="empty batch: no-op")
        return AnalysisResult(analysis=sign * forecast.copy(), diagnostics=diag)

    h = ObservationOperator(batch.sites)
    hard = np.flatnonzero(~batch.is_or)
    soft, sigma_or = _soft_row_sigmas(batch)
    mu = batch.limit.mu

    # Perturbation matrix, drawn in fixed row order before any member work so
    # results do not depend on member scheduling: hard rows first as one
    # block, then each OR row from its two-piece likelihood.
    perturbed = np.empty((batch.m, n_members))
    perturbed[hard] = (
        batch.values[hard, None]
        + batch.sigma_obs[hard, None] * rng.standard_normal((hard.size, n_members))
    )
    for k, row in enumerate(soft):
        dist = TwoPieceGaussian(mu=mu, sigma1=batch.sigma_obs[row], sigma2=sigma_or[k])
        perturbed[row] = dist.sample(n_members, rng)

    r_base = batch.sigma_obs**2
    # (n_soft, N) classification of members against the limit (strict >).
    out_of_range = forecast[batch.sites[soft]] > mu
    analysis = np.empty_like(forecast)
    for update, source in _subensembles(n_members):
        stats = compute_stats(forecast[:, source])
        if soft.size == 0:
            gain = kalman_gain(stats, h, r_base).gain
            analysis[:, update] = _apply_gain(
                forecast[:, update], gain, h.rows, perturbed[:, update]
            )
            continue
        patterns, member_pattern = np.unique(
            out_of_range[:, update], axis=1, return_inverse=True
        )
        for p in range(patterns.shape[1]):
            members = update[np.flatnonzero(member_pattern == p)]
            r = r_base.copy()
            r[soft[patterns[:, p]]] = sigma_or[patterns[:, p]] ** 2
            gain = kalman_gain(stats, h, r).gain
            analysis[:, members] = _apply_gain(
                forecast[:, members], gain, h.rows, perturbed[:, members]
            )

    if mirrored:
        analysis = -analysis
        perturbed = -perturbed
    diag = AnalysisDiagnostics(
        n_hard=hard.size,
        n_soft=soft.size,
        in_range_members=n_members - out_of_range.sum(axis=1),
        perturbed_obs=perturbed,
    )
    return AnalysisResult(analysis=analysis, diagnostics=diag)


def pdenkf_analysis(forecast, batch, serial_soft=False):
    """Partial deterministic EnKF update (no observation perturbations).

    Hard rows: the mean moves by the full gain times the mean innovation and
    every anomaly contracts by half the gain. OR rows: the mean is never
    updated; a virtual observation at the detection limit with the in-range
    error variance contracts, by half gain, the anomalies of members observed
    inside the range, row eligibility being decided per member. Members are
    recombined as updated mean plus updated own anomaly without recentering.

    ``serial_soft`` processes OR rows one at a time (gains always from the
    forecast statistics) instead of the default joint update per member.
    """
    forecast = _as_forecast(forecast)
    forecast, batch, mirrored = _batch_upper(forecast, batch)
    n, n_members = forecast.shape
    if batch.m == 0:
        sign = -1.0 if mirrored else 1.0
        diag = AnalysisDiagnostics(n_hard=0, n_soft=0, note="empty batch: no-op")
        return AnalysisResult(analysis=sign * forecast.copy(), diagnostics=diag)

    stats = compute_stats(forecast)
    hard = np.flatnonzero(~batch.is_or)
    soft, _ = _soft_row_sigmas(batch) if batch.is_or.any() else (np.array([], int), None)
    mu = batch.limit.mu
    r_all = batch.sigma_obs**2  # virtual OR observations carry sigma_obs too

    mean = stats.mean
    if soft.size:
        inside = ~(forecast[batch.sites[soft]] > mu)  # (n_soft, N)
    else:
        inside = np.zeros((0, n_members), dtype=bool)
    in_range_members = inside.sum(axis=1)

    if hard.size:
        h_hard = ObservationOperator(batch.sites[hard])
        gain_hard = kalman_gain(stats, h_hard, r_all[hard]).gain
        mean = mean + gain_hard @ (batch.values[hard] - h_hard.apply(stats.mean))

    if soft.size == 0 and hard.size == 0:
        analysis = forecast.copy()
    elif soft.size == 0:
        anomalies = stats.anomalies - 0.5 * gain_hard @ h_hard.apply(stats.anomalies)
        analysis = mean[:, None] + anomalies
    elif serial_soft:
        analysis = _pdenkf_serial(forecast, stats, batch, hard, soft, inside,
                                  mean, r_all)
    else:
        analysis = _pdenkf_joint(forecast, stats, batch, hard, soft, inside,
                                 mean, r_all)

    if mirrored:
        analysis = -analysis
    diag = AnalysisDiagnostics(
        n_hard=hard.size, n_soft=soft.size, in_range_members=in_range_members
    )
    return AnalysisResult(analysis=analysis, diagnostics=diag)


def _pdenkf_joint(forecast, stats, batch, hard, soft, inside, mean, r_all):
    """One joint half-gain anomaly update per member over the hard rows plus
    the member's eligible OR rows."""
    analysis = np.empty_like(forecast)
    patterns, member_pattern = np.unique(inside, axis=1, return_inverse=True)
    for p in range(patterns.shape[1]):
        members = np.flatnonzero(member_pattern == p)
        rows = np.concatenate([hard, soft[patterns[:, p]]])
        if rows.size == 0:
            analysis[:, members] = forecast[:, members]  # untouched, exact
            continue
        h_rows = ObservationOperator(batch.sites[rows])
        gain = kalman_gain(stats, h_rows, r_all[rows]).gain
        block = stats.anomalies[:, members]
        block = block - 0.5 * gain @ h_rows.apply(block)
        analysis[:, members] = mean[:, None] + block
    return analysis


def _pdenkf_serial(forecast, stats, batch, hard, soft, inside, mean, r_all):
    """Half-gain updates applied row by row; gains from the forecast stats."""
    anomalies = stats.anomalies.copy()
    touched = np.zeros(forecast.shape[1], dtype=bool)
    if hard.size:
        h_hard = ObservationOperator(batch.sites[hard])
        gain_hard = kalman_gain(stats, h_hard, r_all[hard]).gain
        anomalies -= 0.5 * gain_hard @ h_hard.apply(anomalies)
        touched[:] = True
    for k, row in enumerate(soft):
        members = np.flatnonzero(inside[k])
        if members.size == 0:
            continue
        h_row = ObservationOperator(batch.sites[row:row + 1])
        gain = kalman_gain(stats, h_row, r_all[row:row + 1]).gain
        block = anomalies[:, members]
        anomalies[:, members] = block - 0.5 * gain @ h_row.apply(block)
        touched[members] = True
    analysis = np.where(touched[None, :], mean[:, None] + anomalies, forecast)
    return analysis
