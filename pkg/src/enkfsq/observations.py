"""Detection-limited observations and the two-piece Gaussian likelihood.

A gauge with an upper detection limit measures with Gaussian noise and then
clips: noisy values above the limit are reported only as "out of range" (OR).
The OR likelihood is a two-piece Gaussian whose mode sits at the detection
limit, with the in-range std on the observable side and a (usually larger)
climatology-derived std on the unobservable side.

Lower detection limits are handled by mirroring: all internal logic assumes
an upper limit, and lower-limit data is sign-flipped on the way in and out.
"""

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "LimitSide",
    "DetectionLimit",
    "TwoPieceGaussian",
    "Observation",
    "ObservationBatch",
    "ClimatologyEstimate",
    "observe_truth",
    "sigma_or_from_climatology",
    "detection_limit_for_or_fraction",
    "save_climatology",
    "load_climatology",
]

_ROOT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class LimitSide(Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class DetectionLimit:
    """Saturation point of the gauge. ``mu`` may be +inf (no censoring)."""

    mu: float
    side: LimitSide = LimitSide.UPPER

    def mirrored(self):
        side = LimitSide.LOWER if self.side is LimitSide.UPPER else LimitSide.UPPER
        return DetectionLimit(mu=-self.mu, side=side)


@dataclass(frozen=True)
class TwoPieceGaussian:
    """Two Gaussian halves joined at their common mode ``mu``.

    The density is ``w * exp(-(x - mu)^2 / (2 sigma1^2))`` for x <= mu and
    ``w * exp(-(x - mu)^2 / (2 sigma2^2))`` above, with the shared normalizer
    ``w = sqrt(2/pi) / (sigma1 + sigma2)``. The left piece carries probability
    mass ``sigma1 / (sigma1 + sigma2)``.
    """

    mu: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("two-piece Gaussian stds must be strictly positive")

    @property
    def w(self):
        return _ROOT_2_OVER_PI / (self.sigma1 + self.sigma2)

    @property
    def left_mass(self):
        return self.sigma1 / (self.sigma1 + self.sigma2)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        dev = x - self.mu
        sig = np.where(dev <= 0.0, self.sigma1, self.sigma2)
        return self.w * np.exp(-0.5 * (dev / sig) ** 2)

    def mean(self):
        return self.mu + _ROOT_2_OVER_PI * (self.sigma2 - self.sigma1)

    def sample(self, size, rng):
        """Exact draws by composition.

        Picks the left half with probability ``left_mass``, then adds a
        half-normal magnitude scaled by the chosen side's std. This is the
        production sampler; :meth:`sample_rejection` exists as a cross-check.
        """
        left = rng.random(size) < self.left_mass
        mags = np.abs(rng.standard_normal(size))
        return np.where(left, self.mu - mags * self.sigma1, self.mu + mags * self.sigma2)

    def rejection_envelope(self, proposal_std):
        """Bound c with pdf(x) <= c * N(x; mu, proposal_std^2) everywhere.

        The ratio peaks at the mode, giving c = 2 s / (sigma1 + sigma2),
        valid only when the proposal is at least as wide as both pieces.
        """
        if proposal_std < max(self.sigma1, self.sigma2):
            raise ValueError(
                f"proposal std {proposal_std} does not dominate the target "
                f"(needs >= max(sigma1, sigma2) = {max(self.sigma1, self.sigma2)})"
            )
        return 2.0 * proposal_std / (self.sigma1 + self.sigma2)

    def sample_rejection(self, size, rng, proposal_std=None, return_stats=False):
        """Acceptance-rejection draws using a Gaussian proposal at ``mu``.

        The default proposal std is ``max(sigma1, sigma2)``, the widest piece,
        so the scaled proposal dominates the density with acceptance rate
        ``(sigma1 + sigma2) / (2 s)``. Statistically indistinguishable from
        :meth:`sample`. With ``return_stats`` also returns a dict holding the
        proposal/acceptance counts and the envelope constant.
        """
        if proposal_std is None:
            proposal_std = max(self.sigma1, self.sigma2)
        c = self.rejection_envelope(proposal_std)
        peak = c / (proposal_std * math.sqrt(2.0 * math.pi))
        out = np.empty(size)
        filled = 0
        n_proposed = 0
        n_accepted = 0
        while filled < size:
            n_try = max(64, int(1.2 * c * (size - filled)))
            prop = self.mu + proposal_std * rng.standard_normal(n_try)
            u = rng.random(n_try)
            envelope = peak * np.exp(-0.5 * ((prop - self.mu) / proposal_std) ** 2)
            accepted = prop[u * envelope < self.pdf(prop)]
            n_proposed += n_try
            n_accepted += accepted.size
            take = min(accepted.size, size - filled)
            out[filled:filled + take] = accepted[:take]
            filled += take
        if return_stats:
            stats = {
                "n_proposed": n_proposed,
                "n_accepted": n_accepted,
                "envelope_constant": c,
            }
            return out, stats
        return out


@dataclass(frozen=True)
class Observation:
    """A single site reading: either a value or an out-of-range flag."""

    site: int
    value: float | None
    sigma_obs: float
    limit: DetectionLimit
    sigma_or: float | None = None

    @property
    def is_out_of_range(self):
        return self.value is None


class ObservationBatch:
    """Column-oriented batch of same-time observations sharing one limit.

    ``values`` holds NaN where the reading is out of range. ``sigma_or`` may
    be NaN for in-range rows; filters that consume OR rows check it.
    """

    def __init__(self, sites, values, is_or, sigma_obs, sigma_or, limit):
        self.sites = np.asarray(sites, dtype=np.intp)
        self.values = np.asarray(values, dtype=float)
        self.is_or = np.asarray(is_or, dtype=bool)
        self.sigma_obs = np.asarray(sigma_obs, dtype=float)
        self.sigma_or = np.asarray(sigma_or, dtype=float)
        self.limit = limit
        m = self.sites.size
        for name in ("values", "is_or", "sigma_obs", "sigma_or"):
            if getattr(self, name).shape != (m,):
                raise ValueError(f"{name} must have shape ({m},)")
        if np.any(self.sigma_obs <= 0):
            raise ValueError("sigma_obs must be strictly positive")

    @property
    def m(self):
        return self.sites.size

    @property
    def n_out_of_range(self):
        return int(self.is_or.sum())

    def drop_out_of_range(self):
        """In-range rows only (the ignore-soft-data regime)."""
        keep = ~self.is_or
        return ObservationBatch(
            self.sites[keep], self.values[keep], self.is_or[keep],
            self.sigma_obs[keep], self.sigma_or[keep], self.limit,
        )

    def mirrored(self):
        """The same batch under the sign-flip that swaps upper/lower limits."""
        return ObservationBatch(
            self.sites, -self.values, self.is_or,
            self.sigma_obs, self.sigma_or, self.limit.mirrored(),
        )

    def to_observations(self):
        rows = []
        for j in range(self.m):
            sor = self.sigma_or[j]
            rows.append(Observation(
                site=int(self.sites[j]),
                value=None if self.is_or[j] else float(self.values[j]),
                sigma_obs=float(self.sigma_obs[j]),
                limit=self.limit,
                sigma_or=None if np.isnan(sor) else float(sor),
            ))
        return rows


def observe_truth(truth_state, network, sigma_obs, limit, rng, sigma_or=np.nan):
    """Synthesize one batch of noisy, censored observations of the truth.

    Each site reads ``truth + N(0, sigma_obs^2)``; the noisy value (not the
    truth) is then compared against the detection limit, so in-range truths
    can be wrongly reported out of range and vice versa. Lower limits are
    handled by mirroring the upper-limit path, so the two sides agree
    exactly under sign flips.
    """
    if limit.side is LimitSide.LOWER:
        flipped = observe_truth(-np.asarray(truth_state, dtype=float), network,
                                sigma_obs, limit.mirrored(), rng, sigma_or)
        return flipped.mirrored()
    if np.ndim(sigma_obs) == 0:
        sigma_obs = np.full(network.m, float(sigma_obs))
    sigma_obs = np.asarray(sigma_obs, dtype=float)
    if np.any(sigma_obs <= 0):
        raise ValueError("sigma_obs must be strictly positive")
    noisy = network.apply(truth_state) + sigma_obs * rng.standard_normal(network.m)
    is_or = noisy > limit.mu
    values = np.where(is_or, np.nan, noisy)
    sigma_or = np.full(network.m, float(sigma_or))
    return ObservationBatch(network.rows, values, is_or, sigma_obs, sigma_or, limit)


@dataclass(frozen=True)
class ClimatologyEstimate:
    """Pooled climatological sample of the observed quantity."""

    samples: np.ndarray = field()

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).ravel()
        if samples.size == 0:
            raise ValueError("climatology must be non-empty")
        object.__setattr__(self, "samples", samples)


def sigma_or_from_climatology(clim, mu, min_exceedances=100, mode="conditional"):
    """Out-of-range error std from the climatological tail above ``mu``.

    ``mode="conditional"`` (default) returns the mean exceedance
    ``E[y - mu | y > mu]``; ``mode="literal"`` returns the unnormalized tail
    integral ``E[y 1{y > mu}] - mu`` instead.
    """
    samples = clim.samples
    exceed = samples[samples > mu]
    if exceed.size < min_exceedances:
        raise ValueError(
            f"only {exceed.size} climatology samples exceed mu={mu} "
            f"(need {min_exceedances}); detection limit is outside "
            "climatological support"
        )
    if mode == "conditional":
        return float(np.mean(exceed - mu))
    if mode == "literal":
        return float(exceed.sum() / samples.size - mu)
    raise ValueError(f"unknown sigma_or mode {mode!r}")


def detection_limit_for_or_fraction(clim, target_fraction):
    """Detection limit whose censoring yields the target OR fraction.

    Returns +inf for target 0 (nothing censored) and a value strictly below
    the sample minimum for target 1 (everything censored); otherwise the
    empirical ``1 - target`` quantile of the climatology.
    """
    if not 0.0 <= target_fraction <= 1.0:
        raise ValueError("target fraction must lie in [0, 1]")
    samples = clim.samples
    if target_fraction == 0.0:
        return np.inf
    if target_fraction == 1.0:
        return float(np.nextafter(samples.min(), -np.inf))
    return float(np.quantile(samples, 1.0 - target_fraction))


def save_climatology(path, clim):
    """Cache climatology samples as CSV, one value per line."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value"])
        for v in clim.samples:
            writer.writerow([repr(float(v))])


def load_climatology(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["value"]:
            raise ValueError(f"{path}: not a climatology cache")
        samples = [float(row[0]) for row in reader if row]
    return ClimatologyEstimate(samples=np.asarray(samples))
