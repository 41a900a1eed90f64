"""Command-line interface: config validation, artifacts, exit codes,
byte-determinism of outputs.
"""

import json
import os

import numpy as np
import pytest

import hypflow.cli as cli
from hypflow.cli import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VERIFY,
    ConfigError,
    main,
    parse_config,
)
from hypflow.flow import FlowTrace, StepFailureError


def write_config(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


FLOW_CFG = {
    "n": 2, "m": 1, "backend": "axisym", "J": 32,
    "shape": {"kind": "perturbed_sphere", "r0": 1.0, "eps": 0.1, "l": 2},
    "flow": {"t_max": 0.05},
}

SWEEP_CFG = {
    "n": 2, "m": 1, "backend": "axisym", "J": 32,
    "shape": {"kind": "perturbed_sphere", "r0": 1.0, "l": 2},
    "sweep": {"eps_list": [0.05, 0.1, 0.2]},
}


class TestParseConfig:
    def test_valid_quermass(self):
        cfg = parse_config({"n": 3, "m": 2, "backend": "axisym", "J": 48,
                            "shape": {"kind": "sphere", "r0": 1.5}}, "quermass")
        assert (cfg.n, cfg.m, cfg.backend, cfg.J) == (3, 2, "axisym", 48)
        assert cfg.shape.kind == "sphere" and cfg.shape.r0 == 1.5

    def test_aggregated_errors_with_paths(self):
        bad = {"n": 1, "backend": "nope", "J": 7, "m": 0,
               "shape": {"kind": "banana"}, "bogus": 1}
        with pytest.raises(ConfigError) as exc:
            parse_config(bad, "quermass")
        text = "\n".join(exc.value.errors)
        for frag in ("n:", "backend:", "J:", "m:", "shape.kind:", "bogus: unknown key"):
            assert frag in text
        assert len(exc.value.errors) >= 6

    def test_full_backend_constraints(self):
        with pytest.raises(ConfigError, match="requires n=2"):
            parse_config({"n": 3, "backend": "full", "J": 32, "m": 1,
                          "shape": {"kind": "sphere", "r0": 1.0}}, "quermass")
        with pytest.raises(ConfigError, match="even J"):
            parse_config({"n": 2, "backend": "full", "J": 33, "m": 1,
                          "shape": {"kind": "sphere", "r0": 1.0}}, "quermass")

    def test_booleans_rejected_for_numbers(self):
        with pytest.raises(ConfigError, match="expected integer"):
            parse_config({"n": 2, "backend": "axisym", "J": True, "m": 1,
                          "shape": {"kind": "sphere", "r0": 1.0}}, "quermass")
        with pytest.raises(ConfigError, match="expected number"):
            parse_config({"n": 2, "backend": "axisym", "J": 32, "m": 1,
                          "shape": {"kind": "sphere", "r0": False}}, "quermass")

    def test_flow_parameter_ranges(self):
        base = dict(FLOW_CFG)
        for flow_block, frag in [
            ({"c_cfl": 0.5}, "c_cfl"),
            ({"c_cfl": 0.0}, "c_cfl"),
            ({"tol_stop": -1.0}, "tol_stop"),
            ({"t_max": 0.0}, "t_max"),
            ({"dt": 0.1}, "unknown key"),
        ]:
            cfg = dict(base, flow=flow_block)
            with pytest.raises(ConfigError, match=frag):
                parse_config(cfg, "flow")
        # tol_stop = 0 is the documented off switch, not an error
        cfg = parse_config(dict(base, flow={"tol_stop": 0.0}), "flow")
        assert cfg.flow.tol_stop == 0.0

    def test_flow_defaults(self):
        cfg = parse_config({k: v for k, v in FLOW_CFG.items() if k != "flow"}, "flow")
        assert cfg.flow.c_cfl == 0.2
        assert cfg.flow.tol_stop == 1e-6
        assert cfg.flow.t_max == 30.0

    def test_sweep_rules(self):
        parse_config(SWEEP_CFG, "sweep")  # valid
        bad = json.loads(json.dumps(SWEEP_CFG))
        bad["shape"]["eps"] = 0.1
        with pytest.raises(ConfigError, match="eps_list, remove it"):
            parse_config(bad, "sweep")
        bad = json.loads(json.dumps(SWEEP_CFG))
        bad["shape"] = {"kind": "sphere", "r0": 1.0}
        with pytest.raises(ConfigError, match="perturbed_sphere"):
            parse_config(bad, "sweep")
        bad = json.loads(json.dumps(SWEEP_CFG))
        bad["sweep"] = {"eps_list": []}
        with pytest.raises(ConfigError, match="nonempty"):
            parse_config(bad, "sweep")
        bad = json.loads(json.dumps(SWEEP_CFG))
        bad["sweep"] = {"eps_list": [0.05, -0.1]}
        with pytest.raises(ConfigError, match=r"eps_list\[1\]"):
            parse_config(bad, "sweep")

    def test_shape_key_sets_are_strict(self):
        with pytest.raises(ConfigError, match="shape.a: unknown key"):
            parse_config({"n": 2, "backend": "axisym", "J": 32, "m": 1,
                          "shape": {"kind": "sphere", "r0": 1.0, "a": 0.1}}, "quermass")
        with pytest.raises(ConfigError, match="shape.a: required"):
            parse_config({"n": 2, "backend": "axisym", "J": 32, "m": 1,
                          "shape": {"kind": "offset_sphere", "r0": 1.0}}, "quermass")
        with pytest.raises(ConfigError, match="must be < r0"):
            parse_config({"n": 2, "backend": "axisym", "J": 32, "m": 1,
                          "shape": {"kind": "offset_sphere", "r0": 1.0, "a": 1.5}},
                         "quermass")

    def test_conformal_has_no_order_key(self):
        with pytest.raises(ConfigError, match="m: unknown key"):
            parse_config({"n": 2, "backend": "axisym", "J": 32, "m": 1,
                          "shape": {"kind": "sphere", "r0": 1.0}}, "conformal")

    def test_verify_schema(self):
        assert parse_config({"seed": 5}, "verify").seed == 5
        assert parse_config({}, "verify").seed == 0
        with pytest.raises(ConfigError):
            parse_config({"seed": -1}, "verify")
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config({"n": 2}, "verify")

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            parse_config({}, "frobnicate")

    def test_nonobject_root(self):
        with pytest.raises(ConfigError, match="config root"):
            parse_config([1, 2], "quermass")


class TestMainQuermass:
    def test_sphere_stdout(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"n": 2, "m": 1, "backend": "full", "J": 64,
                                      "shape": {"kind": "sphere", "r0": 1.0}})
        assert main(["quermass", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "W0 = 5.1109327057082" in out
        assert "W1 = 5.7851291272571" in out
        assert "W2 = 5.8924344400224" in out
        assert "hconvexity_margin" in out and "inradius_rho" in out


class TestMainFlow:
    def test_writes_trace_and_svg(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FLOW_CFG)
        out = tmp_path / "artifacts"
        code = main(["flow", "--config", cfg, "--out", str(out), "--plot"])
        assert code == EXIT_OK
        stdout = capsys.readouterr().out
        csv_path = out / "flow_trace.csv"
        assert csv_path.exists()
        data = csv_path.read_bytes()
        assert b"\r" not in data  # LF endings
        lines = data.decode().strip().split("\n")
        assert lines[0] == ("t,dt,W0,W1,W2,minF,maxF,minH,maxH,minr,maxr,minu,"
                            "AtrL2,AtrMax,minKappaMinus1,cumDeficitIntegral")
        steps = int(stdout.split("steps = ")[1].split()[0])
        assert len(lines) == steps + 2  # header + initial row + steps
        svg = (out / "flow.svg").read_text()
        assert svg.startswith("<svg") and "</svg>" in svg

    def test_byte_determinism(self, tmp_path):
        cfg = write_config(tmp_path, FLOW_CFG)
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["flow", "--config", cfg, "--out", str(out)]) == EXIT_OK
            outs.append((out / "flow_trace.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_rejected_shape_exits_numerical(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(
            FLOW_CFG, shape={"kind": "perturbed_sphere", "r0": 1.0, "eps": 0.8, "l": 2}))
        assert main(["flow", "--config", cfg, "--out", str(tmp_path)]) == EXIT_NUMERICAL
        assert "numerical failure" in capsys.readouterr().err

    def test_step_failure_writes_partial_with_marker(self, tmp_path, capsys, monkeypatch):
        def exploding_run(state, **kw):
            err = StepFailureError("synthetic blow-up", t=0.01, dt=1e-5,
                                   diagnostics={"reason": "test"})
            trace = FlowTrace(n=2, m=1)
            trace.rows.append([0.0] * len(trace.header().split(",")))
            err.partial_trace = trace
            raise err
        monkeypatch.setattr(cli, "run", exploding_run)
        cfg = write_config(tmp_path, FLOW_CFG)
        assert main(["flow", "--config", cfg, "--out", str(tmp_path)]) == EXIT_NUMERICAL
        text = (tmp_path / "flow_trace.csv").read_text()
        assert text.rstrip().endswith("FAILED: synthetic blow-up")
        assert "numerical failure" in capsys.readouterr().err


class TestMainSweep:
    def test_writes_csv_and_svg(self, tmp_path, capsys):
        cfg = write_config(tmp_path, SWEEP_CFG)
        out = tmp_path / "sweepout"
        assert main(["sweep", "--config", cfg, "--out", str(out), "--plot"]) == EXIT_OK
        stdout = capsys.readouterr().out
        lines = (out / "sweep.csv").read_text().strip().split("\n")
        assert lines[0] == "eps,deficit,dist,ratio_m2,ratio_3,minF,maxF,maxH,rhoMinus"
        assert len(lines) == 4
        assert "C* (max ratio) = " in stdout
        assert "log-log slope = " in stdout
        svg = (out / "sweep.svg").read_text()
        assert 'data-slope="0.333333"' in svg
        assert 'data-slope="0.5"' in svg

    def test_thread_invariance(self, tmp_path):
        blobs = []
        for threads, sub in ((1, "t1"), (3, "t3")):
            cfg = write_config(tmp_path, dict(SWEEP_CFG, threads=threads),
                               name=f"cfg{threads}.json")
            out = tmp_path / sub
            assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
            blobs.append((out / "sweep.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_insufficient_points_still_succeeds(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(SWEEP_CFG, sweep={"eps_list": [0.05, 0.1]}))
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
        assert "not fitted" in capsys.readouterr().out


class TestMainConformal:
    def test_report(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"n": 2, "backend": "axisym", "J": 48,
                                      "shape": {"kind": "perturbed_sphere", "r0": 1.0,
                                                "eps": 0.1, "l": 2}})
        assert main(["conformal", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
        report = (tmp_path / "conformal_report.txt").read_text().strip().split("\n")
        assert len(report) == 7
        assert report[1].startswith("relation_residual_max = ")
        res = float(report[1].split(" = ")[1])
        assert res < 1e-4
        margin = float(report[3].split(" = ")[1])
        assert margin > -1e-8


class TestMainPlumbing:
    def test_missing_config_file(self, capsys):
        assert main(["flow", "--config", "/nonexistent.json"]) == EXIT_CONFIG
        assert "no such file" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        assert main(["flow", "--config", str(bad)]) == EXIT_CONFIG
        assert "not valid JSON" in capsys.readouterr().err

    def test_config_errors_reported_individually(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"n": 1, "backend": "nope", "J": 7,
                                      "shape": {"kind": "banana"}, "bogus": 1})
        assert main(["quermass", "--config", cfg]) == EXIT_CONFIG
        err = capsys.readouterr().err
        assert err.count("config error:") >= 5

    def test_out_directory_created(self, tmp_path):
        cfg = write_config(tmp_path, {"n": 2, "m": 1, "backend": "axisym", "J": 32,
                                      "shape": {"kind": "sphere", "r0": 1.0}})
        nested = tmp_path / "deep" / "nested" / "dir"
        assert main(["quermass", "--config", cfg, "--out", str(nested)]) == EXIT_OK
        assert nested.is_dir()

    def test_verify_exit_code_on_failure(self, capsys, monkeypatch):
        from hypflow.checks import CheckResult
        fake = [CheckResult("alpha", True, "ok", 0.0),
                CheckResult("beta", False, "wrong", 0.0)]
        monkeypatch.setattr(cli, "run_verify", lambda seed=0: fake)
        assert main(["verify"]) == EXIT_VERIFY
        out = capsys.readouterr().out
        assert "verify: 1/2 checks passed" in out
        assert "FAIL" in out

    def test_verify_all_pass_exit_zero(self, capsys, monkeypatch):
        from hypflow.checks import CheckResult
        monkeypatch.setattr(cli, "run_verify",
                            lambda seed=0: [CheckResult("alpha", True, "ok", 0.0)])
        assert main(["verify"]) == EXIT_OK

    def test_bad_threads_env_is_config_error(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("HYPFLOW_THREADS", "0")
        cfg = write_config(tmp_path, SWEEP_CFG)
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err
