"""Config handling, artifacts, determinism and exit codes of the harness."""

import dataclasses

import numpy as np
import pytest

from pdsc import bench_cli
from pdsc.bench_cli import (ConfigError, default_config, load_config, main,
                            read_config_file, run_calibrate, run_tension)


def small_tension(out, **kw):
    cfg = default_config("tension")
    return dataclasses.replace(cfg, size_x=10.0, size_y=20.0, spacing=1.0,
                               horizon=3.0, out=str(out), **kw)


class TestConfig:
    def test_defaults_are_valid(self):
        for name in ("tension", "clamped", "indent", "calibrate"):
            default_config(name).validate()

    def test_file_parsing_and_comments(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# comment\nexperiment = tension\nspacing = 2.0  # inline\n"
                     "variants = corrected\ndump_bonds = true\n")
        cfg = load_config(config_path=p)
        assert cfg.experiment == "tension"
        assert cfg.spacing == 2.0
        assert cfg.variants == ("corrected",)
        assert cfg.dump_bonds is True

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("experiment = tension\nwibble = 3\n")
        with pytest.raises(ConfigError):
            load_config(config_path=p)

    def test_bad_variant_rejected(self):
        with pytest.raises(ConfigError):
            load_config("tension", overrides={"variants": ("fem",)})

    def test_cli_overrides_config(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("experiment = tension\nout = from_file\n")
        cfg = load_config("tension", p, {"out": "from_cli"})
        assert cfg.out == "from_cli"

    def test_m_ratio_derived(self):
        cfg = default_config("clamped")
        assert cfg.m_ratio == pytest.approx(1 / 6)

    def test_repository_configs_parse(self):
        from pathlib import Path
        root = Path(__file__).resolve().parents[1] / "configs"
        for f in sorted(root.glob("*.cfg")):
            cfg = load_config(config_path=f)
            assert cfg.experiment in bench_cli.VARIANTS


class TestTensionHarness:
    def test_zero_traction_zero_errors(self, tmp_path):
        cfg = small_tension(tmp_path, traction=0.0, variants=("corrected",))
        summary = run_tension(cfg)
        assert summary.metrics["corrected.max_err_ux"] == 0.0
        assert summary.metrics["corrected.max_err_uy"] == 0.0

    def test_artifacts_written_and_round_trip(self, tmp_path):
        cfg = small_tension(tmp_path, variants=("corrected",), dump_bonds=True)
        summary = run_tension(cfg)
        out = tmp_path
        assert (out / "summary.txt").exists()
        assert (out / "nodes.csv").exists()
        assert (out / "corrected" / "bonds.csv").exists()
        # recompute the headline metric from the errors artifact
        rows = (out / "corrected" / "errors.csv").read_text().splitlines()[1:]
        err_uy = [float(r.split(",")[4]) for r in rows
                  if r.split(",")[6] == "1"]
        assert max(err_uy) == pytest.approx(summary.metrics["corrected.max_err_uy"],
                                            rel=1e-12)

    def test_deterministic_artifacts(self, tmp_path):
        cfg_a = small_tension(tmp_path / "a", variants=("corrected",))
        cfg_b = small_tension(tmp_path / "b", variants=("corrected",))
        run_tension(cfg_a)
        run_tension(cfg_b)
        for rel in ("corrected/fields.csv", "corrected/errors.csv", "nodes.csv"):
            a = (tmp_path / "a" / rel).read_bytes()
            b = (tmp_path / "b" / rel).read_bytes()
            assert a == b


class TestCalibrateHarness:
    def test_reports_amplitudes_and_residuals(self, tmp_path):
        cfg = dataclasses.replace(default_config("calibrate"), out=str(tmp_path))
        s = run_calibrate(cfg)
        c_cont = s.metrics["c0.constant.continuum"]
        assert c_cont == pytest.approx(9 * 1000 / (np.pi * 125), rel=1e-12)
        assert s.metrics["c0.conical.continuum"] == pytest.approx(4 * c_cont, rel=1e-12)
        assert abs(s.metrics["discrete_vs_continuum.constant"]) < 0.05
        assert s.metrics["residual_uniaxial.constant.discrete"] < 1e-12


class TestMainExitCodes:
    def test_success(self, tmp_path, capsys):
        code = main(["calibrate", "--out", str(tmp_path)])
        assert code == 0
        assert "c0.constant.continuum" in capsys.readouterr().out

    def test_config_error_is_2(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("experiment = tension\nspacing = -1\n")
        assert main(["tension", "--config", str(p)]) == 2

    def test_missing_config_file_is_2(self, tmp_path):
        assert main(["tension", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_uncorrected_indent_abort_is_4(self, tmp_path):
        p = tmp_path / "indent.cfg"
        p.write_text(
            "experiment = indent\nspacing = 0.5\nhorizon = 3.0\n"
            "depth_steps = 40\nvariants = uncorrected\n"
            f"out = {tmp_path / 'run'}\n")
        code = main(["indent", "--config", str(p)])
        assert code == 4
        summary = (tmp_path / "run" / "summary.txt").read_text()
        assert "uncorrected.aborted_on_inversion = True" in summary

    def test_indent_with_surviving_variant_is_0(self, tmp_path):
        # the expected uncorrected abort is not a harness failure when a
        # bond-model variant completes the ramp
        p = tmp_path / "indent.cfg"
        p.write_text(
            "experiment = indent\nspacing = 0.5\nhorizon = 3.0\n"
            "depth_steps = 12\ndepth_max = 1.8\nvariants = corrected,uncorrected\n"
            f"out = {tmp_path / 'run'}\n")
        code = main(["indent", "--config", str(p)])
        summary = (tmp_path / "run" / "summary.txt").read_text()
        assert "uncorrected.aborted_on_inversion = True" in summary
        assert "corrected.aborted_on_inversion = False" in summary
        assert code == 0
