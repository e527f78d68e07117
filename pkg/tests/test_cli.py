"""Tests for the command-line front-end."""
import os

import pytest

from enkfsq.cli import main

TINY_CFG = """
model = l40
filter = enkf-sq
ensemble_size = 12
obs_every = 4
steps = 80
seeds = 0,1
or_fraction = 0.4
climatology_steps = 1500
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CFG)
    return path


class TestRunCommand:
    def test_happy_path(self, tiny_config, tmp_path, capsys):
        out = tmp_path / "results"
        code = main(["run", "--config", str(tiny_config), "--out", str(out)])
        assert code == 0
        files = sorted(p.name for p in out.glob("*.csv"))
        assert files == ["l40_enkf-sq_seed0.csv", "l40_enkf-sq_seed1.csv"]
        header = (out / files[0]).read_text().splitlines()[0]
        assert header == "step,rmse,aes,n_or"
        stdout = capsys.readouterr().out
        assert stdout.count("run model=l40") == 2

    def test_missing_config_exits_1(self, tmp_path):
        out = tmp_path / "results"
        code = main(["run", "--config", str(tmp_path / "absent.cfg"),
                     "--out", str(out)])
        assert code == 1
        assert not list(out.glob("*.csv"))

    def test_bad_config_key_exits_1(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("wibble = 3\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 1

    def test_seed_override_reproduces_bytes(self, tiny_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", str(tiny_config), "--out", str(out1),
                     "--seed", "7", "--quiet"]) == 0
        assert main(["run", "--config", str(tiny_config), "--out", str(out2),
                     "--seed", "7", "--quiet"]) == 0
        for name in ("l40_enkf-sq_seed7.csv", "l40_enkf-sq_seed8.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_out_dir_env_fallback(self, tiny_config, tmp_path, monkeypatch):
        target = tmp_path / "from_env"
        monkeypatch.setenv("ENKFSQ_OUT_DIR", str(target))
        monkeypatch.chdir(tmp_path)
        assert main(["run", "--config", str(tiny_config), "--quiet"]) == 0
        assert list(target.glob("*.csv"))


class TestUsageErrors:
    def test_no_command_exits_1(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_subcommand_exits_1(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_unknown_flag_exits_1(self, tiny_config, capsys):
        assert main(["run", "--config", str(tiny_config), "--frob"]) == 1
        assert "error" in capsys.readouterr().err.lower()

    def test_missing_required_flag_exits_1(self):
        assert main(["run"]) == 1


class TestPosteriorDemoCommand:
    def test_writes_histogram_csv(self, tmp_path, capsys):
        code = main(["posterior-demo", "--prior-mean", "0", "--prior-std", "1",
                     "--mu", "1", "--sigma-obs", "0.3", "--sigma-or", "1.5",
                     "--samples", "2000", "--out", str(tmp_path)])
        assert code == 0
        lines = (tmp_path / "posterior_demo.csv").read_text().splitlines()
        assert lines[0] == "value,bayes_density,enkfsq_density"
        assert len(lines) > 100
        assert "modes" in capsys.readouterr().out

    def test_degenerate_config_exits_2(self, tmp_path):
        code = main(["posterior-demo", "--prior-mean", "0", "--prior-std", "5",
                     "--mu", "0", "--sigma-obs", "1", "--sigma-or", "1",
                     "--proposal-std", "0.5", "--out", str(tmp_path)])
        assert code == 2


class TestClimatologyCommand:
    def test_writes_cache(self, tiny_config, tmp_path):
        out = tmp_path / "clim"
        assert main(["climatology", "--config", str(tiny_config),
                     "--out", str(out), "--quiet"]) == 0
        lines = (out / "l40_climatology.csv").read_text().splitlines()
        assert lines[0] == "value"
        assert len(lines) == 1 + 1500 * 40


class TestSweepCommands:
    def test_sweep_alpha_tiny(self, tiny_config, tmp_path):
        out = tmp_path / "sw"
        code = main(["sweep-alpha", "--config", str(tiny_config),
                     "--out", str(out), "--alphas", "1.0", "--quiet"])
        assert code == 0
        lines = (out / "sweep_alpha.csv").read_text().splitlines()
        assert lines[0] == "sweep_value,scheme,mean_rmse,std_rmse,skew_a,skew_o"
        # per-run CSVs are written alongside the summary
        assert list(out.glob("l40_enkf-sq_alpha1.0_seed*.csv"))
        assert list(out.glob("l40_pdenkf_alpha1.0_seed*.csv"))

    def test_sweep_n_tiny(self, tiny_config, tmp_path):
        out = tmp_path / "sw"
        code = main(["sweep-n", "--config", str(tiny_config),
                     "--out", str(out), "--sizes", "8,10", "--quiet",
                     "--threads", "2"])
        assert code == 0
        text = (out / "sweep_ensemble_size.csv").read_text()
        assert "enkf-ig" in text and "enkf-all" in text

    def test_sweep_limit_tiny(self, tiny_config, tmp_path):
        out = tmp_path / "sw"
        code = main(["sweep-limit", "--config", str(tiny_config),
                     "--out", str(out), "--fractions", "0.0,0.3", "--quiet"])
        assert code == 0
        assert (out / "sweep_detection_limit.csv").exists()
