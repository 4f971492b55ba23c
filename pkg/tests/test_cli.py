"""Command line front end: validation, artifacts, determinism, exit codes."""

import json
import subprocess
import sys

import pytest

from nsvlab.cli import (
    ExperimentConfig,
    Report,
    emit_plots,
    load_config,
    main,
    run,
    validate,
)

FAST = dict(N=400, M=60, K=4)


def make_config(experiment, **kw):
    merged = {**FAST, **kw}
    return ExperimentConfig(experiment=experiment, **merged)


class TestValidate:
    def test_default_config_is_clean(self):
        assert validate(ExperimentConfig(experiment="fields-check")) == []

    def test_negative_nu_rejected(self):
        issues = validate(make_config("action", nu=-1.0))
        assert any("nu must be positive" in i["message"] for i in issues)
        assert any(i["level"] == "error" for i in issues)

    def test_minimality_hypothesis_warning(self):
        issues = validate(make_config("minimality", T=4.0))
        warnings = [i for i in issues if i["level"] == "warning"]
        assert any("pi^2" in w["message"] for w in warnings)

    def test_unknown_experiment_flagged(self):
        issues = validate(make_config("nonsense"))
        assert any("unknown experiment" in i["message"] for i in issues)

    def test_bad_drift_spec_flagged(self):
        issues = validate(make_config("action", drift="corrupted:abc"))
        assert any("drift" in i["message"] for i in issues)


class TestConfigLoading:
    def test_flags_override_file(self, tmp_path):
        cfg_file = tmp_path / "c.json"
        cfg_file.write_text(json.dumps({"experiment": "action", "nu": 0.2, "N": 5}))
        cfg = load_config(str(cfg_file), {"nu": 0.3, "experiment": None})
        assert cfg.nu == 0.3 and cfg.N == 5 and cfg.experiment == "action"

    def test_unknown_keys_rejected(self, tmp_path):
        cfg_file = tmp_path / "c.json"
        cfg_file.write_text(json.dumps({"experiment": "action", "bogus": 1}))
        with pytest.raises(ValueError):
            load_config(str(cfg_file), {})

    def test_output_dir_env_fallback(self, monkeypatch):
        monkeypatch.setenv("NSVLAB_OUT", "/tmp/somewhere")
        cfg = ExperimentConfig(experiment="action")
        assert cfg.resolved_output_dir() == "/tmp/somewhere"


class TestRun:
    def test_fields_check_passes(self, tmp_path):
        cfg = make_config("fields-check", output_dir=str(tmp_path))
        assert run(cfg) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["experiment"] == "fields-check"
        assert all(v["pass"] for v in report["verdicts"])
        assert (tmp_path / "tables" / "estimates.csv").exists()
        assert (tmp_path / "tables" / "verdicts.csv").exists()

    def test_zero_drift_action_exact(self, tmp_path):
        cfg = make_config("action", drift="zero", output_dir=str(tmp_path))
        assert run(cfg) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        est = {e["name"]: e for e in report["estimates"]}["action"]
        assert est["value"] == 0.0 and est["se"] == 0.0

    def test_invalid_config_exit_one(self, tmp_path):
        cfg = make_config("action", nu=-1.0, output_dir=str(tmp_path))
        assert run(cfg) == 1
        assert not (tmp_path / "report.json").exists()

    def test_negative_control_exit_two(self, tmp_path):
        cfg = make_config(
            "criticality",
            drift="corrupted:0.5",
            negative_control=True,
            N=2500,
            M=200,
            output_dir=str(tmp_path),
        )
        assert run(cfg) == 2
        report = json.loads((tmp_path / "report.json").read_text())
        verdicts = {v["name"]: v["pass"] for v in report["verdicts"]}
        assert verdicts["negative_control_detected"]
        assert not all(verdicts.values())
        assert (tmp_path / "tables" / "residuals.csv").exists()

    def test_report_deterministic_except_timestamp(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        codes = [
            run(make_config("simulate", drift="zero", output_dir=str(out)))
            for out in (out1, out2)
        ]
        assert codes[0] == codes[1]  # verdicts at tiny N may be unlucky, bytes must agree

        def normalized(p):
            doc = json.loads((p / "report.json").read_text())
            doc.pop("timestamp")
            return json.dumps(doc, sort_keys=True)

        assert normalized(out1) == normalized(out2)
        assert (out1 / "tables" / "estimates.csv").read_bytes() == (
            out2 / "tables" / "estimates.csv"
        ).read_bytes()


class TestPlots:
    def test_empty_report_writes_nothing(self, tmp_path):
        report = Report(ExperimentConfig(experiment="action"))
        assert emit_plots(report, str(tmp_path)) == []
        assert not (tmp_path / "plots").exists()

    def test_bridge_plot_rows_monotone(self, tmp_path):
        cfg = make_config("bridge", N=800, output_dir=str(tmp_path))
        assert run(cfg) == 0
        rows = [
            tuple(map(float, line.split()))
            for line in (tmp_path / "plots" / "bridge_action_vs_log2_cutoff.dat")
            .read_text()
            .splitlines()
        ]
        assert len(rows) == 6
        ys = [y for _, y in rows]
        assert all(b > a for a, b in zip(ys, ys[1:]))

    def test_criticality_ratio_plot_positive_control(self, tmp_path):
        cfg = make_config("criticality", N=2500, M=200, output_dir=str(tmp_path))
        code = run(cfg)
        rows = [
            tuple(map(float, line.split()))
            for line in (tmp_path / "plots" / "residual_over_se.dat").read_text().splitlines()
        ]
        assert len(rows) == 6
        assert code == 0
        assert all(abs(y) <= 3 for _, y in rows)


class TestMainEntry:
    def test_usage_error_exit_one(self):
        assert main(["no-such-experiment"]) == 1

    def test_missing_config_file_exit_one(self):
        assert main(["action", "--config", "/nonexistent.json"]) == 1

    def test_cli_subprocess_round_trip(self, tmp_path):
        out = tmp_path / "o"
        proc = subprocess.run(
            [
                sys.executable,
                "-m",
                "nsvlab.cli",
                "action",
                "--drift",
                "zero",
                "--N",
                "100",
                "--M",
                "20",
                "--out",
                str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "report.json").exists()
