"""Experiment configuration and the flat ``key=value`` config-file format.

Config files are one key per line, ``#`` starts a comment, unknown keys are
errors. A ``preset`` key applies a named bundle of defaults first; explicit
keys then override it, and CLI flags override both.
"""

import hashlib
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .filters import FilterKind
from .models import (
    L40_FORECAST,
    L40_TRUTH,
    LSST_FORECAST,
    LSST_TRUTH,
)
from .observations import LimitSide

__all__ = ["ConfigError", "ExperimentConfig", "parse_config_file", "PRESETS"]

L40_STEPS_PER_YEAR = 4 * 365      # 4 steps per day
LSST_STEPS_PER_YEAR = 24 * 365 // 10  # 10-hour steps


class ConfigError(Exception):
    """Invalid configuration (maps to CLI exit status 1)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative twin-experiment description.

    ``or_fraction`` picks the detection limit as a climatology quantile;
    ``detection_limit`` sets it explicitly instead (exactly one of the two is
    in effect; explicit wins). ``sigma_or_scale`` is the multiplier applied
    to the climatology estimate of the OR error std.
    """

    model: str = "l40"
    filter: FilterKind = FilterKind.ENKF_SQ
    ensemble_size: int = 75
    obs_every: int = 4
    observed_sites: tuple = ()          # empty means the model default network
    or_fraction: float = 0.8
    detection_limit: float | None = None
    limit_side: LimitSide = LimitSide.UPPER
    alpha: float = 1.0                  # sigma_or multiplier
    steps: int = 7300
    seeds: tuple = tuple(range(10))
    sigma_obs: float = 1.0
    init_spread: float = float(np.sqrt(3.0))
    climatology_steps: int | None = None
    climatology_cache: str | None = None
    sigma_or_mode: str = "conditional"  # or "literal" tail-integral reading
    lsst_init_coord: str = "index"
    lsst_noise_std: float = 0.01
    pdenkf_serial_soft: bool = False
    label: str = ""

    def __post_init__(self):
        if self.model not in ("l40", "lsst"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.ensemble_size < 2:
            raise ConfigError("ensemble_size must be >= 2")
        if self.obs_every < 1:
            raise ConfigError("obs_every must be >= 1")
        if self.steps < self.obs_every:
            raise ConfigError("steps must cover at least one analysis")
        if not 0.0 <= self.or_fraction <= 1.0:
            raise ConfigError("or_fraction must lie in [0, 1]")
        if self.sigma_obs <= 0:
            raise ConfigError("sigma_obs must be positive")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if any(s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative")
        if self.sigma_or_mode not in ("conditional", "literal"):
            raise ConfigError(f"unknown sigma_or_mode {self.sigma_or_mode!r}")

    @property
    def state_size(self):
        return 40 if self.model == "l40" else 100

    @property
    def sites(self):
        """Observed state indices; defaults to the model's standard network."""
        if self.observed_sites:
            return np.asarray(self.observed_sites, dtype=np.intp)
        if self.model == "l40":
            return np.arange(40)
        # standard transport network: 80 regularly spaced of 100 cells
        return np.asarray([i for i in range(100) if i % 5 != 0], dtype=np.intp)

    @property
    def truth_params(self):
        return L40_TRUTH if self.model == "l40" else LSST_TRUTH

    @property
    def forecast_params(self):
        if self.model == "l40":
            return L40_FORECAST
        return replace(LSST_FORECAST, noise_std=self.lsst_noise_std)

    @property
    def n_climatology_steps(self):
        if self.climatology_steps is not None:
            return self.climatology_steps
        years = 5 if self.model == "l40" else 4
        return years * (L40_STEPS_PER_YEAR if self.model == "l40" else LSST_STEPS_PER_YEAR)

    def digest(self):
        """Stable hash of the configuration for run records."""
        text = repr(sorted(self.__dict__.items(), key=lambda kv: kv[0]))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


def _model_defaults(model):
    if model == "l40":
        return dict(model="l40", ensemble_size=75, obs_every=4,
                    steps=5 * L40_STEPS_PER_YEAR, sigma_obs=1.0,
                    init_spread=float(np.sqrt(3.0)))
    if model == "lsst":
        return dict(model="lsst", ensemble_size=30, obs_every=10,
                    steps=4 * LSST_STEPS_PER_YEAR, sigma_obs=0.1,
                    init_spread=0.5)
    raise ConfigError(f"unknown model {model!r}")


PRESETS = {
    "l40_full": dict(_model_defaults("l40")),
    "l40_desk": dict(_model_defaults("l40"), steps=2000),
    "lsst_full": dict(_model_defaults("lsst")),
    "lsst_desk": dict(_model_defaults("lsst"), steps=1752),
}

_FILTER_NAMES = {k.value: k for k in FilterKind}
_FILTER_NAMES.update({"enkf-ignore": FilterKind.ENKF_IGNORE})


def _parse_sites(text):
    text = text.strip()
    if text == "all":
        return ()
    if text.startswith("skip_every:"):
        k = int(text.split(":", 1)[1])
        return ("skip_every", k)
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _parse_bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _coerce(key, value, model):
    if key == "filter":
        name = value.strip().lower()
        if name not in _FILTER_NAMES:
            raise ConfigError(
                f"unknown filter {value!r} (choose from {sorted(_FILTER_NAMES)})"
            )
        return _FILTER_NAMES[name]
    if key == "limit_side":
        try:
            return LimitSide(value.strip().lower())
        except ValueError:
            raise ConfigError(f"limit_side must be 'upper' or 'lower', got {value!r}")
    if key in ("ensemble_size", "obs_every", "steps", "climatology_steps"):
        return int(value)
    if key in ("or_fraction", "detection_limit", "alpha", "sigma_obs",
               "init_spread", "lsst_noise_std"):
        return float(value)
    if key == "seeds":
        return tuple(int(tok) for tok in value.split(",") if tok.strip())
    if key == "observed_sites":
        return _parse_sites(value)
    if key == "pdenkf_serial_soft":
        return _parse_bool(value)
    if key in ("model", "sigma_or_mode", "lsst_init_coord", "climatology_cache", "label"):
        return value.strip()
    if key == "years":
        per_year = L40_STEPS_PER_YEAR if model == "l40" else LSST_STEPS_PER_YEAR
        return int(float(value) * per_year)
    raise ConfigError(f"unknown config key {key!r}")


def make_config(model="l40", **overrides):
    """Build a config from model defaults plus explicit overrides."""
    settings = _model_defaults(model)
    settings.update(overrides)
    sites = settings.get("observed_sites", ())
    if isinstance(sites, tuple) and len(sites) == 2 and sites[0] == "skip_every":
        n = 40 if settings["model"] == "l40" else 100
        settings["observed_sites"] = tuple(i for i in range(n) if i % sites[1] != 0)
    try:
        return ExperimentConfig(**settings)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config_file(path, overrides=None):
    """Parse a flat key=value config file into an :class:`ExperimentConfig`.

    ``overrides`` (a dict of already-coerced field values) wins over file
    keys; this is how CLI flags take precedence.
    """
    raw = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    known = {f.name for f in fields(ExperimentConfig)} | {"years", "preset"}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        raw[key] = value

    settings = {}
    if "preset" in raw:
        name = raw.pop("preset")
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r} (choose from {sorted(PRESETS)})")
        settings.update(PRESETS[name])
    model = raw.get("model", settings.get("model", "l40"))
    if "model" not in raw and "model" not in settings:
        settings["model"] = model
    for key, value in raw.items():
        target = "steps" if key == "years" else key
        try:
            settings[target] = _coerce(key, value, model)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}: bad value for {key!r}: {exc}") from exc
    if overrides:
        settings.update(overrides)
    return make_config(**settings)
