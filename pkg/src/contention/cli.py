"""Command-line entry point: ``contention <command> [options]``."""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import reports
from .dynamics import run_dynamics
from .equilibrium import is_nash_intervened, is_stackelberg
from .game import GameSpec, ProfileError, write_region_csv
from .intervention import RuleError, TRDRule
from .observation import EstimationUndefinedError, estimate_probabilities, simulate
from .targets import BargainingProblem, SolverError, egalitarian_target, nash_bargaining_target, nonsymmetric_nash_target

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_ESTIMATION = 4

DEFAULTS = {
    "n": None,
    "k": None,
    "target": None,
    "profile": None,
    "m": None,
    "epsilon": None,
    "slots": 1_000_000,
    "seed": 0,
    "threads": 1,
    "out": None,
    "format": None,
    "step": 0.01,
    "p0": 0.0,
    "max_t": 60,
    "tol": 1e-10,
    "trace": None,
}


class ValidationError(ValueError):
    pass


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _ints(text) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValidationError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def resolve_spec(cfg: dict) -> GameSpec:
    k = cfg.get("k")
    ns = _ints(cfg["n"]) if cfg.get("n") is not None else None
    n = ns[0] if ns else None
    if k is None or k in ("ones", "homogeneous"):
        if n is None:
            raise ValidationError("need --n or an explicit --k")
        return GameSpec.homogeneous(n)
    if k in ("ranked", "linear"):
        if n is None:
            raise ValidationError("--k ranked needs --n")
        return GameSpec.ranked(n)
    spec = GameSpec(tuple(_floats(k)))
    if n is not None and n != spec.n:
        raise ValidationError(f"--n {n} disagrees with {spec.n} valuations")
    return spec


def resolve_target(cfg: dict, spec: GameSpec) -> np.ndarray:
    t = cfg.get("target")
    if t is None or t in ("nbs", "equal"):
        return nash_bargaining_target(BargainingProblem(spec))
    if t in ("proportional", "weighted"):
        return nonsymmetric_nash_target(BargainingProblem(spec, weights=spec.k))
    if t == "egalitarian":
        return egalitarian_target(spec)
    vals = np.array(_floats(t))
    if len(vals) != spec.n:
        raise ValidationError(f"target has {len(vals)} entries, game has {spec.n} users")
    return vals


def resolve_profile(cfg: dict, spec: GameSpec, fallback=None) -> np.ndarray:
    p = cfg.get("profile")
    if p is None:
        if fallback is None:
            raise ValidationError("--profile is required")
        return np.asarray(fallback, dtype=float)
    vals = np.array(_floats(p))
    if len(vals) != spec.n:
        raise ValidationError(f"profile has {len(vals)} entries, game has {spec.n} users")
    return vals


def _emit(text: str, cfg: dict) -> None:
    out = cfg.get("out")
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_csv(text: str, cfg: dict, config_view: dict) -> None:
    _emit(text, cfg)
    sidecar = json.dumps({"config": config_view}, indent=2, sort_keys=True) + "\n"
    if cfg.get("out"):
        Path(str(cfg["out"]) + ".config.json").write_text(sidecar)
    else:
        sys.stderr.write(sidecar)


def _emit_json(payload: dict, cfg: dict, config_view: dict) -> None:
    payload = {"config": config_view, **payload}
    _emit(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n", cfg)


def cmd_table1(cfg: dict, view: dict) -> int:
    ns = _ints(cfg.get("n") or "3,10,100")
    if not ns or min(ns) < 1:
        raise ValidationError("table1 needs n >= 1")
    rows = reports.table1(ns)
    if cfg.get("format") == "json":
        _emit_json({"rows": [r.__dict__ for r in rows]}, cfg, view)
        return EXIT_OK
    buf = io.StringIO()
    buf.write("n,individual_payoff,utilization\n")
    for r in rows:
        buf.write(f"{r.n},{r.individual_payoff:.5f},{r.utilization:.5f}\n")
    _emit_csv(buf.getvalue(), cfg, view)
    return EXIT_OK


def cmd_table2(cfg: dict, view: dict) -> int:
    ns = _ints(cfg.get("n") or "3,10,100")
    rows = reports.table2(ns)
    if cfg.get("format") == "json":
        _emit_json({"rows": [r.to_dict() for r in rows]}, cfg, view)
    else:
        buf = io.StringIO()
        buf.write("target,n,average,aggregate,std,utilization,nash_product,generalized_nash_product,error\n")
        for r in rows:
            buf.write(
                f"{r.target},{r.n},{r.average:.5f},{r.aggregate:.5f},{r.std:.5f},{r.utilization:.5f},"
                f"{r.nash_product:.5e},{r.generalized_nash_product:.5e},{r.error or ''}\n"
            )
        _emit_csv(buf.getvalue(), cfg, view)
    return EXIT_SOLVER if any(r.error for r in rows) else EXIT_OK


def cmd_region(cfg: dict, view: dict) -> int:
    mode = cfg["mode"]
    if cfg.get("n") is None and cfg.get("k") is None:
        cfg["n"] = 2
    spec = resolve_spec(cfg)
    m = int(cfg["m"]) if cfg.get("m") is not None else None
    eps = float(cfg["epsilon"]) if cfg.get("epsilon") is not None else None
    pts, vals = reports.region(mode, spec, step=float(cfg["step"]), m=m, epsilon=eps)
    if cfg.get("format") == "json":
        _emit_json({"mode": mode, "profiles": pts.tolist(), "payoffs": vals.tolist()}, cfg, view)
        return EXIT_OK
    buf = io.StringIO()
    write_region_csv(buf, pts, vals)
    _emit_csv(buf.getvalue(), cfg, view)
    return EXIT_OK


def cmd_dynamics(cfg: dict, view: dict) -> int:
    spec = resolve_spec(cfg)
    target = resolve_target(cfg, spec)
    p0 = resolve_profile(cfg, spec)
    trace = run_dynamics(spec, target, p0, max_t=int(cfg["max_t"]), tol=float(cfg["tol"]))
    if cfg.get("format") == "json":
        _emit_json(trace.to_dict(), cfg, view)
    else:
        buf = io.StringIO()
        trace.write_csv(buf)
        _emit_csv(buf.getvalue(), cfg, view)
    for issue in trace.issues:
        sys.stderr.write(f"warning: {issue}\n")
    return EXIT_OK


def cmd_simulate(cfg: dict, view: dict) -> int:
    spec = resolve_spec(cfg)
    p = resolve_profile(cfg, spec, fallback=nash_bargaining_target(BargainingProblem(spec)))
    trace = simulate(
        spec, p, float(cfg["p0"]), int(cfg["slots"]), int(cfg["seed"]), threads=int(cfg["threads"])
    )
    if cfg.get("trace"):
        with open(cfg["trace"], "w") as fh:
            trace.write_csv(fh)
    payload = {"counts": trace.counts(), "success_frequency": trace.success_frequencies().tolist()}
    code = EXIT_OK
    try:
        payload["estimate"] = estimate_probabilities(trace).to_dict()
    except EstimationUndefinedError as exc:
        payload["estimate"] = {"error": str(exc), "users": exc.users}
        code = EXIT_ESTIMATION
    _emit_json(payload, cfg, view)
    return code


def cmd_verify(cfg: dict, view: dict) -> int:
    spec = resolve_spec(cfg)
    target = resolve_target(cfg, spec)
    p_hat = resolve_profile(cfg, spec, fallback=target)
    rule = TRDRule(tuple(target))
    verdict = is_nash_intervened(spec, target, p_hat)
    payload = {
        "verdict": verdict.to_dict(),
        "stackelberg": is_stackelberg(spec, rule, p_hat),
        "rule": rule.to_dict(),
        "intervention_level": float(rule.evaluate(p_hat)),
    }
    _emit_json(payload, cfg, view)
    return EXIT_OK


COMMANDS = {
    "table1": cmd_table1,
    "table2": cmd_table2,
    "region": cmd_region,
    "dynamics": cmd_dynamics,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", help="user count, or a comma list for tables")
    common.add_argument("--k", help="valuations: comma list, 'ones' or 'ranked' (k_i = i)")
    common.add_argument("--target", help="comma list, or nbs | proportional | egalitarian")
    common.add_argument("--profile", help="users' profile (comma list)")
    common.add_argument("--m", type=int, help="quantization intervals")
    common.add_argument("--epsilon", type=float, help="observation noise half-width")
    common.add_argument("--slots", type=int, help="simulated slots")
    common.add_argument("--seed", type=int, help="RNG seed")
    common.add_argument("--threads", type=int, help="worker cap for simulation")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--config", help="JSON file with option values; flags win")
    common.add_argument("--step", type=float, help="grid spacing for regions")
    common.add_argument("--p0", type=float, help="manager transmission probability (simulate)")
    common.add_argument("--max-t", dest="max_t", type=int, help="dynamics step cap")
    common.add_argument("--tol", type=float, help="dynamics convergence tolerance")
    common.add_argument("--trace", help="write the slot trace CSV here (simulate)")

    parser = argparse.ArgumentParser(prog="contention", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("table1", parents=[common], help="homogeneous users at equal shares")
    sub.add_parser("table2", parents=[common], help="heterogeneous users, three targets")
    reg = sub.add_parser("region", parents=[common], help="achievable payoff point cloud")
    reg.add_argument("mode", choices=reports.REGION_MODES)
    sub.add_parser("dynamics", parents=[common], help="adaptive-offset convergence trace")
    sub.add_parser("simulate", parents=[common], help="slot simulation and estimation")
    sub.add_parser("verify", parents=[common], help="equilibrium class of a profile")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
    for key, value in vars(args).items():
        if key != "config" and value is not None:
            cfg[key] = value
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        view = {k: v for k, v in sorted(cfg.items()) if v is not None and k != "out"}
        return COMMANDS[args.command](cfg, view)
    except (ValidationError, ProfileError, RuleError, ValueError) as exc:
        if isinstance(exc, EstimationUndefinedError):
            sys.stderr.write(f"error: {exc}\n")
            return EXIT_ESTIMATION
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except SolverError as exc:
        sys.stderr.write(f"error: {exc} {exc.residuals}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
