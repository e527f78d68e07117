"""Tests for configuration parsing and defaults."""
import numpy as np
import pytest

from enkfsq import ConfigError, FilterKind, make_config, parse_config_file
from enkfsq.config import PRESETS, ExperimentConfig
from enkfsq.observations import LimitSide


class TestDefaults:
    def test_l40_defaults(self):
        cfg = make_config("l40")
        assert cfg.ensemble_size == 75
        assert cfg.obs_every == 4
        assert cfg.steps == 7300
        assert cfg.sigma_obs == 1.0
        assert len(cfg.sites) == 40
        assert len(cfg.seeds) == 10

    def test_lsst_defaults(self):
        cfg = make_config("lsst")
        assert cfg.ensemble_size == 30
        assert cfg.obs_every == 10
        assert cfg.steps == 3504
        assert len(cfg.sites) == 80
        # regularly spaced: every fifth cell unobserved
        assert all(i % 5 != 0 for i in cfg.sites)

    def test_forecast_params_differ_from_truth(self):
        cfg = make_config("l40")
        assert cfg.truth_params.forcing == 8.0
        assert cfg.forecast_params.forcing == 8.1
        cfg = make_config("lsst")
        assert cfg.forecast_params.porosity == 0.30

    def test_digest_is_stable_and_sensitive(self):
        a = make_config("l40")
        b = make_config("l40")
        c = make_config("l40", alpha=1.3)
        assert a.digest() == b.digest()
        assert a.digest() != c.digest()


class TestValidation:
    def test_unknown_model_rejected(self):
        with pytest.raises(ConfigError):
            make_config("l63")

    @pytest.mark.parametrize("kwargs", [
        dict(ensemble_size=1),
        dict(obs_every=0),
        dict(or_fraction=1.2),
        dict(sigma_obs=0.0),
        dict(alpha=-1.0),
        dict(seeds=()),
        dict(seeds=(-3,)),
        dict(sigma_or_mode="guess"),
        dict(steps=2),
    ])
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            make_config("l40", **kwargs)


class TestConfigFile:
    def write(self, tmp_path, text):
        path = tmp_path / "exp.cfg"
        path.write_text(text)
        return path

    def test_parse_basic(self, tmp_path):
        path = self.write(tmp_path, """
# comment line
model = l40
filter = enkf-sq     # trailing comment
ensemble_size = 30
obs_every = 2
steps = 100
seeds = 3,4,5
or_fraction = 0.5
alpha = 0.8
""")
        cfg = parse_config_file(path)
        assert cfg.model == "l40"
        assert cfg.filter is FilterKind.ENKF_SQ
        assert cfg.ensemble_size == 30
        assert cfg.seeds == (3, 4, 5)
        assert cfg.or_fraction == 0.5
        assert cfg.alpha == 0.8

    def test_unknown_key_rejected(self, tmp_path):
        path = self.write(tmp_path, "modle = l40\n")
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config_file(tmp_path / "nope.cfg")

    def test_malformed_line(self, tmp_path):
        path = self.write(tmp_path, "just some words\n")
        with pytest.raises(ConfigError, match="key=value"):
            parse_config_file(path)

    def test_preset_expansion(self, tmp_path):
        path = self.write(tmp_path, "preset = l40_desk\n")
        cfg = parse_config_file(path)
        assert cfg.steps == 2000
        assert cfg.ensemble_size == 75
        path = self.write(tmp_path, "preset = lsst_desk\nensemble_size = 12\n")
        cfg = parse_config_file(path)
        assert cfg.model == "lsst"
        assert cfg.steps == 1752
        assert cfg.ensemble_size == 12  # explicit key overrides preset

    def test_unknown_preset(self, tmp_path):
        path = self.write(tmp_path, "preset = l42\n")
        with pytest.raises(ConfigError, match="unknown preset"):
            parse_config_file(path)

    def test_years_conversion(self, tmp_path):
        path = self.write(tmp_path, "model = l40\nyears = 5\n")
        assert parse_config_file(path).steps == 7300
        path = self.write(tmp_path, "model = lsst\nyears = 4\n")
        assert parse_config_file(path).steps == 3504

    def test_filter_names(self, tmp_path):
        for name, kind in [("enkf-all", FilterKind.ENKF_ALL),
                           ("enkf-ig", FilterKind.ENKF_IGNORE),
                           ("enkf-ignore", FilterKind.ENKF_IGNORE),
                           ("enkf-sq", FilterKind.ENKF_SQ),
                           ("pdenkf", FilterKind.PDENKF)]:
            path = self.write(tmp_path, f"model = l40\nfilter = {name}\n")
            assert parse_config_file(path).filter is kind
        path = self.write(tmp_path, "filter = kalman\n")
        with pytest.raises(ConfigError, match="unknown filter"):
            parse_config_file(path)

    def test_observed_sites_syntax(self, tmp_path):
        path = self.write(tmp_path, "model = l40\nobserved_sites = 1,3,5\n")
        assert tuple(parse_config_file(path).sites) == (1, 3, 5)
        path = self.write(tmp_path, "model = l40\nobserved_sites = skip_every:2\n")
        cfg = parse_config_file(path)
        assert all(i % 2 == 1 for i in cfg.sites)
        path = self.write(tmp_path, "model = l40\nobserved_sites = all\n")
        assert len(parse_config_file(path).sites) == 40

    def test_limit_side(self, tmp_path):
        path = self.write(tmp_path, "model = l40\nlimit_side = lower\n")
        assert parse_config_file(path).limit_side is LimitSide.LOWER
        path = self.write(tmp_path, "limit_side = sideways\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)

    def test_overrides_win(self, tmp_path):
        path = self.write(tmp_path, "model = l40\nsteps = 100\nseeds = 1,2\n")
        cfg = parse_config_file(path, {"seeds": (9,)})
        assert cfg.seeds == (9,)
        assert cfg.steps == 100

    def test_bad_value_reported_with_key(self, tmp_path):
        path = self.write(tmp_path, "ensemble_size = many\n")
        with pytest.raises(ConfigError, match="ensemble_size"):
            parse_config_file(path)

    def test_detection_limit_explicit(self, tmp_path):
        path = self.write(tmp_path, "model = l40\ndetection_limit = -0.5\n")
        assert parse_config_file(path).detection_limit == -0.5

    def test_pdenkf_serial_flag(self, tmp_path):
        path = self.write(tmp_path, "model = l40\npdenkf_serial_soft = true\n")
        assert parse_config_file(path).pdenkf_serial_soft is True
        path = self.write(tmp_path, "pdenkf_serial_soft = maybe\n")
        with pytest.raises(ConfigError):
            parse_config_file(path)


class TestPresets:
    def test_known_presets_build(self):
        for name in PRESETS:
            cfg = ExperimentConfig(**{k: v for k, v in PRESETS[name].items()})
            assert cfg.steps > 0
