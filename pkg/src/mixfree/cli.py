"""Command-line entry point: JSON configs in, CSV/JSON/SVG artifacts out.

Flag grammar: ``mixfree <command> --config <path> [--out <dir>] [--seed <u64>]
[--quiet]`` with commands simulate, bound, certify, sweep, coverage, diagnose.
Exit codes: 0 on success, 1 on configuration errors (diagnostic names the
offending key, or the line/column for malformed JSON), 2 on numeric failures
propagated from the modules. Configs are validated strictly: unknown keys are
rejected.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import bounds, harness, processgen
from .bounds import Constants, INF
from .erm import HypothesisClass

COMMANDS = ("simulate", "bound", "certify", "sweep", "coverage", "diagnose")


class ConfigError(ValueError):
    """Configuration problem attributable to the user-supplied document."""


def _check_keys(obj: dict, required: set, optional: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - required - optional
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{where} is missing required key(s): {sorted(missing)}")


def _parse_p(value) -> float:
    if value in ("inf", "Infinity", None):
        return INF
    return float(value)


def _parse_class(spec) -> HypothesisClass:
    _check_keys(spec, {"kind"}, {"dim", "tables"}, "class")
    if spec["kind"] == "linear":
        if "dim" not in spec:
            raise ConfigError("linear class requires key 'dim'")
        return HypothesisClass.linear(int(spec["dim"]))
    if spec["kind"] == "finite":
        if "tables" not in spec:
            raise ConfigError("finite class requires key 'tables'")
        return HypothesisClass.finite(spec["tables"])
    raise ConfigError(f"class kind must be 'linear' or 'finite', got {spec['kind']!r}")


def _parse_constants(spec) -> Constants:
    if spec is None:
        return Constants()
    _check_keys(spec, set(), {"c1", "c2", "c3", "c_alpha"}, "constants")
    return Constants(**{k: float(v) for k, v in spec.items()})


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError(f"config parse error at line {err.lineno} column "
                          f"{err.colno}: {err.msg}")


def _out_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _cmd_simulate(cfg: dict, out: str, seed: int | None, quiet: bool) -> list:
    _check_keys(cfg, {"model", "n", "seed"}, {"kwise"}, "simulate config")
    problem = processgen.problem_from_dict(cfg["model"])
    n = int(cfg["n"])
    use_seed = int(cfg["seed"]) if seed is None else seed
    if "kwise" in cfg:
        traj = processgen.kwise_independent_surrogate(problem, n,
                                                      int(cfg["kwise"]), use_seed)
    else:
        traj = processgen.sample_trajectory(problem, n, use_seed)
    path = _out_path(out, "trajectory.csv")
    processgen.trajectory_to_csv(traj, path)
    return [path]


def _cmd_bound(cfg: dict, out: str, seed: int | None, quiet: bool) -> list:
    _check_keys(cfg, {"model", "class", "n", "delta"},
                {"q", "p", "k", "constants", "resolution", "seed", "epsilon"},
                "bound config")
    problem = processgen.problem_from_dict(cfg["model"])
    cls = _parse_class(cfg["class"])
    report = bounds.compute_bound_report(
        problem, cls, int(cfg["n"]), float(cfg["delta"]),
        q=float(cfg.get("q", 1.0)), p=_parse_p(cfg.get("p")),
        k=None if cfg.get("k") is None else int(cfg["k"]),
        constants=_parse_constants(cfg.get("constants")),
        resolution=int(cfg.get("resolution", 64)),
        seed=int(cfg.get("seed", 0)) if seed is None else seed)
    json_path = _out_path(out, "bound_report.json")
    with open(json_path, "w") as fh:
        fh.write(report.to_json() + "\n")

    from .erm import population_quantities
    pop = population_quantities(problem, cls)
    rhs = bounds.multiplier_bound_rhs(
        weak_variance=report.weak_variance, gamma2=report.gamma2,
        gamma_eta=report.gamma_eta, L=report.L, eta=report.eta, k=report.k,
        noise_psi_norm=bounds._noise_psi_norm(problem, pop.f_star_table, report.p),
        r=report.r_star, n=report.n, delta=report.delta, p=report.p,
        q_prime=report.q_prime, c1=report.constants.c1, c2=report.constants.c2)
    csv_path = _out_path(out, "bound_terms.csv")
    with open(csv_path, "w") as fh:
        fh.write("term,value\n")
        for name, value in rhs.terms.items():
            fh.write(f"{name},{float(value)!r}\n")
        fh.write(f"total,{float(rhs.total)!r}\n")
    return [json_path, csv_path]


def _cmd_certify(cfg: dict, out: str, seed: int | None, quiet: bool) -> list:
    _check_keys(cfg, {"model", "class"},
                {"p", "method", "directions", "seed", "m_max"}, "certify config")
    problem = processgen.problem_from_dict(cfg["model"])
    cls = _parse_class(cfg["class"])
    cert = bounds.certify_weak_subgaussian(
        cls, problem, p=_parse_p(cfg.get("p", 2.0)),
        method=cfg.get("method", "auto"),
        directions=int(cfg.get("directions", 10_000)),
        m_max=int(cfg.get("m_max", 200)),
        seed=int(cfg.get("seed", 0)) if seed is None else seed)
    payload = asdict(cert)
    payload["p"] = "inf" if cert.p == INF else cert.p
    path = _out_path(out, "certificate.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return [path]


def _cmd_sweep(cfg: dict, out: str, seed: int | None, quiet: bool) -> list:
    _check_keys(cfg, {"levels", "class", "n_grid", "replicates", "seed"},
                {"delta", "q", "p", "constants", "block_rule", "plot", "epsilon"},
                "sweep config")
    if not isinstance(cfg["levels"], list) or not cfg["levels"]:
        raise ConfigError("'levels' must be a nonempty list of {label, model}")
    problems, labels = [], []
    for i, level in enumerate(cfg["levels"]):
        _check_keys(level, {"label", "model"}, set(), f"levels[{i}]")
        problems.append(processgen.problem_from_dict(level["model"]))
        labels.append(level["label"])
    config = harness.SweepConfig(
        problems=tuple(problems), labels=tuple(labels),
        hypothesis=_parse_class(cfg["class"]),
        n_grid=tuple(int(n) for n in cfg["n_grid"]),
        replicates=int(cfg["replicates"]),
        master_seed=int(cfg["seed"]) if seed is None else seed,
        delta=float(cfg.get("delta", 0.05)), q=float(cfg.get("q", 1.0)),
        p=_parse_p(cfg.get("p")),
        constants=_parse_constants(cfg.get("constants")),
        block_rule=cfg.get("block_rule", "kmix"))
    result = harness.run_sweep(config)
    csv_path = _out_path(out, "sweep.csv")
    harness.sweep_to_csv(result, csv_path)
    summary_path = _out_path(out, "summary.json")
    with open(summary_path, "w") as fh:
        json.dump(harness.sweep_summary(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written = [csv_path, summary_path]
    if cfg.get("plot"):
        svg_path = _out_path(out, "sweep.svg")
        harness.svg_loglog(svg_path, config.n_grid,
                           {lab: result.medians(li)
                            for li, lab in enumerate(config.labels)})
        written.append(svg_path)
    return written


def _cmd_coverage(cfg: dict, out: str, seed: int | None, quiet: bool) -> list:
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("coverage config requires key 'kind'")
    kind = cfg["kind"]
    if kind == "blockedBernstein":
        _check_keys(cfg, {"kind", "model", "values", "n", "k", "delta",
                          "replicates", "seed"}, set(), "coverage config")
        model = processgen.MarkovChainModel.from_transition(
            cfg["model"]["transition"] if isinstance(cfg["model"], dict)
            else cfg["model"])
        report = harness.blocked_bernstein_coverage(
            model, np.asarray(cfg["values"], dtype=float), int(cfg["n"]),
            int(cfg["k"]), float(cfg["delta"]), int(cfg["replicates"]),
            int(cfg["seed"]) if seed is None else seed)
    elif kind == "riskBound":
        _check_keys(cfg, {"kind", "model", "class", "n", "delta",
                          "calibration_replicates", "validation_replicates",
                          "seed"}, {"q", "p", "constants"}, "coverage config")
        report = harness.risk_bound_coverage(
            processgen.problem_from_dict(cfg["model"]), _parse_class(cfg["class"]),
            int(cfg["n"]), float(cfg["delta"]),
            int(cfg["calibration_replicates"]), int(cfg["validation_replicates"]),
            int(cfg["seed"]) if seed is None else seed,
            q=float(cfg.get("q", 1.0)), p=_parse_p(cfg.get("p")),
            constants=_parse_constants(cfg.get("constants")))
    else:
        raise ConfigError(f"coverage kind must be 'blockedBernstein' or "
                          f"'riskBound', got {kind!r}")
    csv_path = _out_path(out, "coverage.csv")
    report.to_csv(csv_path)
    json_path = _out_path(out, "coverage.json")
    with open(json_path, "w") as fh:
        json.dump({"kind": report.kind, "replicates": report.replicates,
                   "delta": report.delta, "frequency": report.frequency,
                   "std_error": report.std_error, "threshold": report.threshold,
                   "c2": report.c2}, fh, indent=2)
        fh.write("\n")
    return [csv_path, json_path]


def _cmd_diagnose(cfg: dict, out: str, seed: int | None, quiet: bool) -> list:
    _check_keys(cfg, {"model", "class", "n", "replicates", "epsilon", "delta",
                      "seed"}, {"q", "p", "constants", "rho_grid"},
                "diagnose config")
    report = harness.process_diagnostics(
        processgen.problem_from_dict(cfg["model"]), _parse_class(cfg["class"]),
        int(cfg["n"]), int(cfg["replicates"]), float(cfg["epsilon"]),
        float(cfg["delta"]), int(cfg["seed"]) if seed is None else seed,
        q=float(cfg.get("q", 1.0)), p=_parse_p(cfg.get("p")),
        constants=_parse_constants(cfg.get("constants")),
        rho_grid=int(cfg.get("rho_grid", 64)))
    path = _out_path(out, "diagnostics.json")
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    return [path]


_HANDLERS = {
    "simulate": _cmd_simulate,
    "bound": _cmd_bound,
    "certify": _cmd_certify,
    "sweep": _cmd_sweep,
    "coverage": _cmd_coverage,
    "diagnose": _cmd_diagnose,
}


def run(argv) -> int:
    """Execute one CLI invocation; returns the process exit code."""
    parser = argparse.ArgumentParser(prog="mixfree", add_help=True)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=".")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--quiet", action="store_true")
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return 1
    try:
        cfg = _load_config(args.config)
        written = _HANDLERS[args.command](cfg, args.out, args.seed, args.quiet)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, KeyError, TypeError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 2
    if not args.quiet:
        for path in written:
            print(path)
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
