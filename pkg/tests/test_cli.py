"""Command-line interface tests: exit codes, strict configs, artifact schemas."""

import json
from pathlib import Path

import numpy as np
import pytest

import mixfree as mf
from mixfree.cli import run


def _model_dict(copies=2, flip=0.25, sigma=0.5):
    base = mf.two_state_chain(flip, flip)
    chain = mf.product_chain(base, copies)
    problem = mf.RegressionProblem(
        chain=chain, embedding=mf.product_embedding([-1.0, 1.0], copies),
        mode="linear", noise=mf.NoiseSpec.symmetric(sigma, chain.n_states),
        true_param=np.array([1.0, -0.5])[:copies])
    return mf.processgen.problem_to_dict(problem)


def _write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestConfigErrors:
    def test_malformed_json_cites_position(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"model": [1, 2,\n  }')
        code = run(["bound", "--config", str(path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "line 2" in err and "column" in err

    def test_unknown_key_named(self, tmp_path, capsys):
        cfg = _write(tmp_path, "cfg.json",
                     {"model": _model_dict(), "n": 64, "seed": 1, "bogus": True})
        code = run(["simulate", "--config", cfg, "--out", str(tmp_path)])
        assert code == 1
        assert "bogus" in capsys.readouterr().err

    def test_missing_key_named(self, tmp_path, capsys):
        cfg = _write(tmp_path, "cfg.json", {"model": _model_dict(), "seed": 1})
        code = run(["simulate", "--config", cfg, "--out", str(tmp_path)])
        assert code == 1
        assert "'n'" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        code = run(["bound", "--config", str(tmp_path / "nope.json")])
        assert code == 1

    def test_numeric_failure_exit_two(self, tmp_path, capsys):
        model = _model_dict()
        # degenerate embedding makes the covariate second moment singular
        model["embedding"] = [[1.0, 1.0]] * 4
        cfg = _write(tmp_path, "cfg.json",
                     {"model": model, "class": {"kind": "linear", "dim": 2},
                      "n": 64, "delta": 0.1})
        code = run(["bound", "--config", cfg, "--out", str(tmp_path)])
        assert code == 2
        assert "numeric failure" in capsys.readouterr().err


class TestSimulate:
    def test_writes_schema_csv(self, tmp_path):
        cfg = _write(tmp_path, "cfg.json",
                     {"model": _model_dict(), "n": 32, "seed": 9})
        assert run(["simulate", "--config", cfg, "--out", str(tmp_path),
                    "--quiet"]) == 0
        lines = (tmp_path / "trajectory.csv").read_text().strip().split("\n")
        assert lines[0] == "t,state,x_1,x_2,y"
        assert len(lines) == 33

    def test_seed_override_changes_output(self, tmp_path):
        cfg = _write(tmp_path, "cfg.json",
                     {"model": _model_dict(), "n": 32, "seed": 9})
        run(["simulate", "--config", cfg, "--out", str(tmp_path / "a"), "--quiet"])
        run(["simulate", "--config", cfg, "--out", str(tmp_path / "b"),
             "--seed", "10", "--quiet"])
        a = (tmp_path / "a" / "trajectory.csv").read_text()
        b = (tmp_path / "b" / "trajectory.csv").read_text()
        assert a != b


class TestBound:
    def test_report_round_trips(self, tmp_path):
        cfg = _write(tmp_path, "cfg.json",
                     {"model": _model_dict(), "class": {"kind": "linear", "dim": 2},
                      "n": 512, "delta": 0.05})
        assert run(["bound", "--config", cfg, "--out", str(tmp_path),
                    "--quiet"]) == 0
        payload = json.loads((tmp_path / "bound_report.json").read_text())
        for key in ("r_star", "n_quad", "n_mult", "k_mix", "risk_bound"):
            assert key in payload
        terms = (tmp_path / "bound_terms.csv").read_text().strip().split("\n")
        assert terms[0] == "term,value"
        total = float(dict(t.split(",") for t in terms[1:])["total"])
        parts = [float(v) for k, v in (t.split(",") for t in terms[1:])
                 if k != "total"]
        assert abs(total - sum(parts)) < 1e-12


class TestCertify:
    def test_certificate_json(self, tmp_path):
        cfg = _write(tmp_path, "cfg.json",
                     {"model": _model_dict(), "class": {"kind": "linear", "dim": 2},
                      "p": 2.0, "directions": 500})
        assert run(["certify", "--config", cfg, "--out", str(tmp_path),
                    "--quiet"]) == 0
        payload = json.loads((tmp_path / "certificate.json").read_text())
        assert payload["L"] >= 1.0 and payload["eta"] == 1.0


class TestSweepCommand:
    def _cfg(self, tmp_path, seed=7):
        return _write(tmp_path, "sweep.json", {
            "levels": [{"label": "iid", "model": _model_dict(flip=0.5)}],
            "class": {"kind": "linear", "dim": 2},
            "n_grid": [64, 128, 256], "replicates": 6, "seed": seed,
            "plot": True,
        })

    def test_byte_identical_rerun(self, tmp_path):
        cfg = self._cfg(tmp_path)
        run(["sweep", "--config", cfg, "--out", str(tmp_path / "r1"), "--quiet"])
        run(["sweep", "--config", cfg, "--out", str(tmp_path / "r2"), "--quiet"])
        a = (tmp_path / "r1" / "sweep.csv").read_bytes()
        b = (tmp_path / "r2" / "sweep.csv").read_bytes()
        assert a == b
        assert (tmp_path / "r1" / "sweep.svg").exists()
        assert (tmp_path / "r1" / "summary.json").exists()

    def test_csv_header_and_value_format(self, tmp_path):
        cfg = self._cfg(tmp_path)
        run(["sweep", "--config", cfg, "--out", str(tmp_path / "r"), "--quiet"])
        lines = (tmp_path / "r" / "sweep.csv").read_text().strip().split("\n")
        assert lines[0] == ("nGrid,mixingLevel,replicate,excessRisk,k,nQuad,"
                            "nMult,kMix,rStar,riskBound")
        row = lines[1].split(",")
        assert len(row) == 10
        float(row[3]), float(row[8]), float(row[9])   # plain parseable floats
        assert "np." not in lines[1]


class TestCoverageCommand:
    def test_blocked_bernstein(self, tmp_path):
        cfg = _write(tmp_path, "cov.json", {
            "kind": "blockedBernstein",
            "model": {"transition": [[0.75, 0.25], [0.25, 0.75]]},
            "values": [-1.0, 1.0], "n": 128, "k": 4, "delta": 0.1,
            "replicates": 400, "seed": 3,
        })
        assert run(["coverage", "--config", cfg, "--out", str(tmp_path),
                    "--quiet"]) == 0
        payload = json.loads((tmp_path / "coverage.json").read_text())
        assert payload["frequency"] <= payload["threshold"]
        lines = (tmp_path / "coverage.csv").read_text().strip().split("\n")
        assert lines[0] == "trial,blockedMean,bound,exceeded"


class TestDiagnoseCommand:
    def test_writes_report(self, tmp_path):
        table = [0.5, -0.25, 1.0, 0.0]
        model = {
            "transition": [[0.4, 0.3, 0.2, 0.1]] * 4,
            "mode": "tabular", "true_table": table,
            "noise": {"kind": "martingale-difference",
                      "values": [[-0.5, 0.5]] * 4, "probs": [[0.5, 0.5]] * 4},
        }
        rng = np.random.default_rng(0)
        tables = [table] + (np.asarray(table) + rng.normal(size=(5, 4))).tolist()
        cfg = _write(tmp_path, "diag.json",
                     {"model": model, "class": {"kind": "finite", "tables": tables},
                      "n": 512, "replicates": 24, "epsilon": 0.5, "delta": 0.05,
                      "seed": 2})
        assert run(["diagnose", "--config", cfg, "--out", str(tmp_path),
                    "--quiet"]) == 0
        payload = json.loads((tmp_path / "diagnostics.json").read_text())
        assert 0 <= payload["q_positive_fraction"] <= 1
        assert payload["r_star"] > 0
