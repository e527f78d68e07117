"""Evaluation metrics: RMSE, ensemble spread, skewness, moving averages."""

import logging
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RunMetrics",
    "rmse",
    "time_avg_rmse",
    "multi_run_avg",
    "aes",
    "skew_analysis",
    "skew_obs",
    "moving_average",
]

log = logging.getLogger(__name__)


@dataclass
class RunMetrics:
    """Metric outputs of one twin-experiment run."""

    rmse_series: np.ndarray
    aes_series: np.ndarray
    time_avg_rmse: float
    skew_a: float
    skew_o: float


def rmse(mean_forecast, reference):
    """Root mean square componentwise difference."""
    a = np.asarray(mean_forecast, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def time_avg_rmse(series):
    """Arithmetic mean of a per-analysis-time RMSE series."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValueError("empty RMSE series")
    return float(series.mean())


def multi_run_avg(runs):
    """Average a metric over repeated runs (different seeds)."""
    runs = np.asarray(runs, dtype=float)
    if runs.size == 0:
        raise ValueError("no runs to average")
    return float(runs.mean())


def aes(ensemble):
    """Average ensemble spread: mean over components of the sample std."""
    ensemble = np.asarray(ensemble, dtype=float)
    if ensemble.ndim != 2 or ensemble.shape[1] < 2:
        raise ValueError("need an (n, N) ensemble with N >= 2")
    return float(np.mean(np.std(ensemble, axis=1, ddof=1)))


def _mean_abs_skew(rows):
    """Average absolute per-row skewness with 1/N moment normalization."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] < 3:
        raise ValueError("need an (k, N) matrix with N >= 3")
    dev = rows - rows.mean(axis=1, keepdims=True)
    m2 = np.mean(dev**2, axis=1)
    m3 = np.mean(dev**3, axis=1)
    skew = np.zeros(rows.shape[0])
    ok = m2 > 0.0
    if not ok.all():
        log.warning("zero-variance rows in skewness input treated as skew 0")
    skew[ok] = np.abs(m3[ok] / m2[ok] ** 1.5)
    return float(skew.mean())


def skew_analysis(ensemble):
    """Average absolute skewness of the analysis ensemble across variables."""
    return _mean_abs_skew(ensemble)


def skew_obs(perturbations):
    """Average absolute skewness of observation perturbations across rows."""
    return _mean_abs_skew(perturbations)


def moving_average(series, window):
    """Centered moving average; windows shrink near the edges."""
    if window < 1:
        raise ValueError("window must be >= 1")
    series = np.asarray(series, dtype=float)
    left = (window - 1) // 2
    right = window // 2
    out = np.empty_like(series)
    for i in range(series.size):
        lo = max(0, i - left)
        hi = min(series.size, i + right + 1)
        out[i] = series[lo:hi].mean()
    return out
