"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 infeasible power budget,
4 disagreement between the traversal algorithm and the vertex oracle.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bounds import bound_report
from .errors import DivergentError, InfeasibleError, StructureError, TopologyError, ValidationError
from .game import (
    best_response_dynamics,
    check_nash_fixed_powers,
    detect_shift_structure,
    minimax_power_game,
    special_case_nash,
)
from .instances import counterexample_raw
from .model import Config, adv_index_x, as_pmf, basis, budget_ok, validate
from .power_opt import VARIANTS, algorithm1, algorithm2, oracle_best_d, oracle_best_e
from . import sim

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_ORACLE = 0, 2, 3, 4
ORACLE_TOL = 1e-9
SEED_ENV = "AOIJAM_SEED"

INSTANCE_KEYS = {"num_users", "num_channels", "channel_sets", "bs_powers", "bs_budget",
                 "adv_powers", "adv_budget", "success_matrix"}
EXTRA_KEYS = {"policies", "sim"}


class InputError(Exception):
    pass


# -- config ingestion ----------------------------------------------------------

def load_document(path: str | Path) -> dict:
    """Read a JSON or YAML config file into a mapping."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            doc = yaml.safe_load(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1} column {mark.column + 1}: " if mark else ""
        raise InputError(f"{path}: {where}{getattr(exc, 'problem', None) or exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be a mapping")
    return doc


def load_config(path: str | Path) -> tuple[Config, dict]:
    doc = load_document(path)
    unknown = sorted(set(doc) - INSTANCE_KEYS - EXTRA_KEYS)
    if unknown:
        raise ValidationError([(k, "unknown key") for k in unknown])
    cfg = validate({k: v for k, v in doc.items() if k in INSTANCE_KEYS})
    return cfg, doc


def config_digest(cfg: Config) -> str:
    blob = json.dumps(cfg.to_raw(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def manifest(cfg: Config, subcommand: str, seed: int | None = None) -> dict:
    return {
        "tool_version": __version__,
        "config_digest": config_digest(cfg),
        "subcommand": subcommand,
        "seed": seed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def parse_pmf(text: str, name: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ValidationError([(name, f"not a comma-separated list of numbers: {text!r}")]) from exc
    return as_pmf(vals, name)


def emit(payload: dict, out) -> None:
    json.dump(payload, out, indent=2, sort_keys=True, default=_jsonable)
    out.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# -- subcommands --------------------------------------------------------------

def cmd_bounds(args, out) -> int:
    cfg, _ = load_config(args.config)
    report = bound_report(cfg)
    payload = report.to_dict()
    payload["manifest"] = manifest(cfg, "bounds")
    emit(payload, out)
    return EXIT_OK


def cmd_optimize_power(args, out) -> int:
    cfg, _ = load_config(args.config)
    given = parse_pmf(args.pmf, "pmf")
    F = cfg.success
    if args.given == "d":
        if given.size != cfg.m:
            raise ValidationError([("pmf", f"adversary pmf needs {cfg.m} entries, got {given.size}")])
        if not budget_ok(given, cfg.adv_powers):
            raise ValidationError([("pmf", "violates the adversary power budget")])
        best = algorithm1(given, cfg, args.variant)
        value = float(best @ F @ given)
        oracle, oracle_value = oracle_best_e(given, cfg)
        side = "e"
    else:
        if given.size != cfg.n:
            raise ValidationError([("pmf", f"BS pmf needs {cfg.n} entries, got {given.size}")])
        if not budget_ok(given, cfg.bs_powers):
            raise ValidationError([("pmf", "violates the BS power budget")])
        best = algorithm2(given, cfg, args.variant)
        value = float(given @ F @ best)
        oracle, oracle_value = oracle_best_d(given, cfg)
        side = "d"
    gap = abs(value - oracle_value)
    payload = {
        "given": args.given,
        "result_side": side,
        "pmf": best.tolist(),
        "value": value,
        "variant": args.variant,
        "oracle_pmf": oracle.tolist(),
        "oracle_value": oracle_value,
        "agreement_gap": gap,
        "agree": gap <= ORACLE_TOL,
        "manifest": manifest(cfg, "optimize-power"),
    }
    emit(payload, out)
    return EXIT_OK if gap <= ORACLE_TOL else EXIT_ORACLE


def _write_trace_csv(path: str, trace, cfg: Config) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", *[f"e{i + 1}" for i in range(cfg.n)], *[f"d{j + 1}" for j in range(cfg.m)], "value"])
        w.writerows(trace.csv_rows())


def _dynamics_and_minimax(cfg: Config, init_d: np.ndarray, iters: int, trace_csv: str | None) -> dict:
    trace = best_response_dynamics(init_d, cfg)
    if trace_csv:
        _write_trace_csv(trace_csv, trace, cfg)
    fp = minimax_power_game(cfg, iters=iters)
    exact = minimax_power_game(cfg, method="exact")
    return {
        "best_response": trace.to_dict(),
        "minimax": fp.to_dict(),
        "minimax_exact": exact.to_dict(),
        "note": ("Best-response cycling over algorithm outputs and the mixed saddle point of the "
                 "bilinear power game are reported side by side; neither is treated as a verdict "
                 "on the other."),
    }


def cmd_counterexample(args, out) -> int:
    cfg = validate(counterexample_raw())
    # adversary starts on levels 3 and 5
    init_d = np.array([0.0, 0.75, 0.25])
    payload = _dynamics_and_minimax(cfg, init_d, args.iters, args.trace_csv)
    payload["success_matrix"] = cfg.success.tolist()
    payload["initial_d"] = init_d.tolist()
    payload["manifest"] = manifest(cfg, "counterexample")
    emit(payload, out)
    return EXIT_OK


def _policy_from_block(block: dict | None, kind: str):
    block = dict(block or {})
    cls = sim.BsPolicy if kind == "bs" else sim.AdvPolicy
    for key in ("user_pmf", "channel_pmf", "power_pmf"):
        if key in block and block[key] is not None:
            block[key] = tuple(block[key])
    try:
        return cls(**block)
    except TypeError as exc:
        raise ValidationError([(f"policies.{kind}", str(exc))]) from exc


def _resolve_policies(args, cfg: Config, doc: dict):
    block = doc.get("policies") or {}
    if args.policy == "uniform":
        bs = sim.uniform_policy()
    elif args.policy == "maxage":
        bs = sim.maxage_policy()
    elif args.policy == "config":
        bs = _policy_from_block(block.get("bs"), "bs")
    else:  # from the config when present, otherwise the max-age scheduler
        bs = _policy_from_block(block["bs"], "bs") if "bs" in block else sim.maxage_policy()

    if args.adversary == "uniform-x":
        adv = sim.psi_bar()
    elif args.adversary == "bracket":
        adv = sim.bracket_adversary(cfg)
    elif args.adversary == "best-power":
        _, _, _, e = bs.resolve(cfg)
        adv = sim.AdvPolicy("uniform", "custom", power_pmf=tuple(algorithm2(e, cfg)))
    elif args.adversary == "config":
        adv = _policy_from_block(block.get("adversary"), "adversary")
    else:
        adv = (_policy_from_block(block["adversary"], "adversary")
               if "adversary" in block else sim.psi_bar())
    return bs, adv


def _sim_setting(args, doc: dict, key: str, default):
    flag = getattr(args, key)
    if flag is not None:
        return flag
    block = doc.get("sim") or {}
    if key in block:
        return block[key]
    if key == "seed" and os.environ.get(SEED_ENV):
        try:
            return int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise ValidationError([(SEED_ENV, "must be an integer")]) from exc
    return default


def cmd_simulate(args, out) -> int:
    cfg, doc = load_config(args.config)
    slots = _sim_setting(args, doc, "slots", 100_000)
    reps = _sim_setting(args, doc, "reps", 10)
    seed = _sim_setting(args, doc, "seed", 0)
    for name, val in (("slots", slots), ("reps", reps)):
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise ValidationError([(name, "must be a positive integer")])
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError([("seed", "must be a non-negative integer")])
    bs, adv = _resolve_policies(args, cfg, doc)
    workers = args.workers or sim.default_workers()
    result = sim.run(cfg, bs, adv, slots, reps, seed, workers=workers, burn_in=args.burn_in)
    payload = result.to_dict()
    payload["policy"] = {"bs": _policy_dict(bs), "adversary": _policy_dict(adv)}
    report = bound_report(cfg)
    payload["bounds"] = {
        "lower_bound": report.lower_bound,
        "upper_uniform_general": report.upper_uniform_general,
        "upper_uniform_special": report.upper_uniform_special,
        "upper_maxage": report.upper_maxage,
    }
    payload["manifest"] = manifest(cfg, "simulate", seed)
    if args.trajectories:
        outcome = sim.run_replication(cfg, bs, adv, slots, 0, seed, burn_in=0,
                                      record_slots=min(slots, args.trajectory_slots))
        with open(args.trajectories, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["slot", "user", "age"])
            for t, ages in enumerate(outcome.trajectory):
                for i, v in enumerate(ages):
                    w.writerow([t + 1, i + 1, int(v)])
    emit(payload, out)
    return EXIT_OK


def _policy_dict(p) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in p.__dict__.items()}


def cmd_nash(args, out) -> int:
    cfg, _ = load_config(args.config)
    if args.fixed_powers:
        e = parse_pmf(args.fixed_powers[0], "e")
        d = parse_pmf(args.fixed_powers[1], "d")
        if e.size != cfg.n or d.size != cfg.m:
            raise ValidationError([("fixed_powers", f"need {cfg.n} BS and {cfg.m} adversary weights")])
        report = check_nash_fixed_powers(cfg, e, d)
        payload = {"mode": "fixed_powers", "report": report.to_dict()}
    else:
        shift = detect_shift_structure(cfg.success)
        if shift is not None:
            _, report = special_case_nash(cfg)
            payload = {"mode": "shift_structure", "shift": shift.tolist(), "report": report.to_dict()}
        else:
            init_d = basis(cfg.m, adv_index_x(cfg))
            payload = {"mode": "dynamics", **_dynamics_and_minimax(cfg, init_d, args.iters, None)}
    payload["manifest"] = manifest(cfg, "nash")
    emit(payload, out)
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoijam", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="age bounds, optimality ratios and derived indices")
    p.add_argument("config")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("optimize-power", help="best power pmf against a fixed opponent pmf")
    p.add_argument("config")
    p.add_argument("--given", choices=("d", "e"), required=True,
                   help="which side's pmf is supplied")
    p.add_argument("--pmf", required=True, help="comma-separated weights")
    p.add_argument("--variant", choices=VARIANTS, default="iterated")
    p.set_defaults(func=cmd_optimize_power)

    p = sub.add_parser("counterexample", help="best-response cycle and minimax on the 3x3 instance")
    p.add_argument("--iters", type=int, default=100_000, help="fictitious-play iterations")
    p.add_argument("--trace-csv", help="write the best-response trace as CSV")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("simulate", help="Monte Carlo age simulation")
    p.add_argument("config")
    p.add_argument("--slots", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int, help=f"master seed (default: config, then ${SEED_ENV}, then 0)")
    p.add_argument("--policy", choices=("auto", "uniform", "maxage", "config"), default="auto")
    p.add_argument("--adversary", choices=("auto", "uniform-x", "bracket", "best-power", "config"),
                   default="auto")
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--trajectories", help="CSV path for slot,user,age rows of replication 0")
    p.add_argument("--trajectory-slots", type=int, default=10_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("nash", help="equilibrium verification")
    p.add_argument("config")
    p.add_argument("--fixed-powers", nargs=2, metavar=("E", "D"),
                   help="freeze the power pmfs and verify the uniform user/channel triple")
    p.add_argument("--iters", type=int, default=100_000, help="fictitious-play iterations")
    p.set_defaults(func=cmd_nash)
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (ValidationError, InputError, TopologyError, StructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DivergentError as exc:
        print(f"divergent: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


def main_entry() -> None:
    sys.exit(main())
