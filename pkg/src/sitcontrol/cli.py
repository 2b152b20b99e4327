"""Command line interface: ``sitcontrol <command> ...``."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from typing import List, Optional, Sequence

from sitcontrol.entry_time import HypothesisError, analytic_time_bound, run_until_entry
from sitcontrol.equilibria import (
    NoPositiveEquilibrium,
    classify_stability,
    periodic_threshold,
    sit_equilibria,
    sit_thresholds,
)
from sitcontrol.integrator import Constant, Impulsive, IntegrationError, integrate, integrate_impulsive
from sitcontrol.model import Params, basic_offspring_number, sit_field
from sitcontrol.scenario_io import (
    ScenarioError,
    Segment,
    SemanticError,
    csv_text,
    emit_trajectory,
    fmt,
    read_scenario,
)
from sitcontrol.strategies import CampaignConfig, run_campaign, starting_state, sweep
from sitcontrol.tables import render_csv, render_pretty, reproduce_table, supported_tables

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_SEMANTIC = 4
EXIT_NUMERIC = 5
EXIT_IO = 6


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _param_override(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{key}: not a number: {value!r}")


def _params(args) -> Params:
    overrides = dict(args.param or [])
    if "gamma" in overrides:
        raise SemanticError("set gamma with --gamma")
    try:
        return Params.mosquito(args.gamma, **overrides)
    except (TypeError, ValueError) as exc:
        raise SemanticError(str(exc)) from None


def _write(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _pretty_pairs(pairs) -> str:
    width = max(len(k) for k, _ in pairs)
    return "".join(f"{k.ljust(width)}  {v}\n" for k, v in pairs)


def _emit(args, pairs) -> None:
    if args.format == "csv":
        _write(args, csv_text([["quantity", "value"], *[[k, v] for k, v in pairs]]))
    else:
        _write(args, _pretty_pairs(pairs))


def _state(s) -> str:
    return "(" + ", ".join(fmt(float(v)) for v in s) + ")"


def cmd_threshold(args) -> int:
    p = _params(args)
    q, mt1, mt2 = sit_thresholds(p)
    _emit(args, [
        ("R", fmt(basic_offspring_number(p))),
        ("Q", fmt(q)),
        ("M_T1", fmt(mt1)),
        ("M_T2", fmt(mt2)),
        (f"M_T1_per(tau={args.tau:g})", fmt(periodic_threshold(p, args.tau))),
    ])
    return EXIT_OK


def cmd_equilibria(args) -> int:
    p = _params(args)
    analysis = sit_equilibria(p, args.mt)
    pairs = [
        ("R", fmt(analysis.r_number)),
        ("Q", fmt(analysis.q)),
        ("M_T1", fmt(analysis.mt1)),
        ("M_T2", fmt(analysis.mt2)),
        ("discriminant", fmt(analysis.discriminant)),
        ("kind", analysis.kind.value),
    ]
    for name in ("alpha_minus", "alpha_plus", "alpha_dagger"):
        value = getattr(analysis, name)
        if value is not None:
            pairs.append((name, fmt(value)))
    for rep in classify_stability(p, analysis):
        pairs.append((f"{rep.name} state", _state(rep.state)))
        pairs.append((f"{rep.name} stability", f"{rep.label}; basin {rep.basin}"))
    _emit(args, pairs)
    return EXIT_OK


def _scenario(args):
    with open(args.scenario, encoding="utf-8") as fh:
        scen = read_scenario(fh.read())
    cfg = scen.config
    if args.tol is not None:
        cfg = replace(cfg, tol=args.tol)
    if args.horizon is not None:
        cfg = replace(cfg, horizon=args.horizon)
    return scen, cfg


def cmd_simulate(args) -> int:
    _, cfg = _scenario(args)
    p = cfg.release_params
    x0 = starting_state(cfg)
    amount = cfg.massive_amount()
    if cfg.mode == "constant":
        traj = integrate(sit_field(p, amount), x0, (0.0, args.days), cfg.tol)
    else:
        traj = integrate_impulsive(p, Impulsive.from_pulse(amount, cfg.tau), [*x0, 0.0],
                                   args.days, cfg.tol, pulse_at_start=True)
    target = args.out or sys.stdout
    emit_trajectory([Segment("massive", traj)], target, args.dt)
    return EXIT_OK


def cmd_entry_time(args) -> int:
    _, cfg = _scenario(args)
    res = run_campaign(replace(cfg, post_window=0.0))
    pairs = [
        ("massive amount", fmt(res.massive_amount)),
        ("target Y", _state(res.target.y)),
        ("entry time", "inf" if res.entry_time is None else fmt(res.entry_time)),
    ]
    if res.entry_time is None:
        pairs.append(("outcome", res.reason))
    else:
        pairs.append(("switch state", _state(res.switch_state)))
    if cfg.mode == "constant":
        try:
            bound = analytic_time_bound(res.params_used, res.massive_amount, res.target)
            pairs.append(("comparison guarantee time", fmt(bound.bound)))
        except HypothesisError as exc:
            pairs.append(("comparison guarantee time", f"n/a ({exc})"))
    _emit(args, pairs)
    return EXIT_OK


def cmd_campaign(args) -> int:
    scen, cfg = _scenario(args)
    res = run_campaign(cfg)
    pairs = [
        ("start state", _state(res.pre_state)),
        ("massive amount", fmt(res.massive_amount)),
        ("E1", _state(res.target.e1)),
        ("entry time", "inf" if res.entry_time is None else fmt(res.entry_time)),
    ]
    if res.entry_time is not None:
        pairs += [("switch state", _state(res.switch_state))]
        if res.sustained is not None:
            pairs += [
                (f"state after {cfg.post_window:g} more days", _state(res.final_state)),
                ("containment", "ok" if res.containment_ok else "FAILED"),
            ]
    else:
        pairs.append(("outcome", res.reason))
    path = args.trajectory or scen.trajectory_path
    if path:
        segments = [Segment("massive", res.massive, res.entry_time)]
        if res.sustained is not None:
            segments.append(Segment("sustained", res.sustained))
        emit_trajectory(segments, path, args.dt)
        pairs.append(("trajectory", path))
    _emit(args, pairs)
    return EXIT_OK


def cmd_sweep(args) -> int:
    configs: List[CampaignConfig] = []
    for g in args.gammas:
        for k in args.ks:
            for m in args.mt_small:
                configs.append(CampaignConfig(
                    base=Params.mosquito(g), sustained_level=m, k=k, mode=args.mode, tau=args.tau,
                    mc_percent=args.mc, mc_scope=args.mc_scope, adulticide_days=args.adulticide_days,
                    horizon=args.horizon or 2e6, tol=args.tol or 1e-8, post_window=0.0,
                ))
    cells = sweep(configs, args.threads)
    rows = [["gamma", "k", "mt_small", "entry_time", "error"]]
    for cell in cells:
        c = cell.config
        t = "" if cell.error else ("inf" if cell.entry_time is None else fmt(cell.entry_time))
        rows.append([fmt(c.base.gamma), fmt(c.k), fmt(c.sustained_level), t, cell.error or ""])
    if args.format == "csv":
        _write(args, csv_text(rows))
    else:
        shown = [[("∞" if j == 3 and v == "inf" else str(v)) for j, v in enumerate(r)] for r in rows]
        widths = [max(len(r[j]) for r in shown) for j in range(len(shown[0]))]
        lines = ["  ".join(v.rjust(w) for v, w in zip(r, widths)).rstrip() for r in shown]
        _write(args, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    table = args.table or args.table_id
    if table is None:
        raise SemanticError(f"choose a table with --table ({', '.join(supported_tables())})")
    if table not in supported_tables():
        raise SemanticError(f"unsupported table {table!r}; choose from {', '.join(supported_tables())}")
    art = reproduce_table(table, threads=args.threads, horizon=args.horizon or 2e6, tol=args.tol or 1e-8)
    _write(args, render_csv(art) if args.format == "csv" else render_pretty(art))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, help="integration tolerance (default 1e-8)")
    common.add_argument("--horizon", type=float, help="maximum simulated days (default 2e6)")
    common.add_argument("--threads", type=int, help="worker processes for sweeps")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("csv", "pretty"), default="pretty",
                        help="report format (default pretty)")

    params = argparse.ArgumentParser(add_help=False)
    params.add_argument("--gamma", type=float, required=True, help="maturation rate per day")
    params.add_argument("--param", type=_param_override, action="append", metavar="KEY=VALUE",
                        help="override a rate of the default mosquito parameter set")

    parser = argparse.ArgumentParser(prog="sitcontrol", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", parents=[common, params], help="release thresholds")
    p.add_argument("--tau", type=float, default=7.0, help="pulse period in days")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("equilibria", parents=[common, params], help="SIT equilibria and stability")
    p.add_argument("--mt", type=float, required=True, help="constant sterile-male level")
    p.set_defaults(func=cmd_equilibria)

    p = sub.add_parser("simulate", parents=[common], help="massive-release trajectory as CSV")
    p.add_argument("scenario", help="INI scenario file")
    p.add_argument("--days", type=float, default=365.0, help="simulated days (default 365)")
    p.add_argument("--dt", type=float, help="output spacing in days (default: solver steps)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("entry-time", parents=[common], help="time to enter the switching box")
    p.add_argument("scenario", help="INI scenario file")
    p.set_defaults(func=cmd_entry_time)

    p = sub.add_parser("campaign", parents=[common], help="massive then sustained releases")
    p.add_argument("scenario", help="INI scenario file")
    p.add_argument("--trajectory", help="CSV path for the full trajectory")
    p.add_argument("--dt", type=float, help="trajectory output spacing in days")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("sweep", parents=[common], help="entry times over a grid")
    p.add_argument("--gammas", type=_floats, required=True, help="comma-separated maturation rates")
    p.add_argument("--ks", type=_floats, required=True, help="comma-separated release multiples k")
    p.add_argument("--mt-small", type=_floats, required=True,
                   help="comma-separated sustained levels")
    p.add_argument("--mode", choices=("constant", "impulsive"), default="constant")
    p.add_argument("--tau", type=float, default=7.0, help="pulse period in days")
    p.add_argument("--mc", type=float, default=0.0, help="mechanical control percent")
    p.add_argument("--mc-scope", choices=("all", "pretreatment"), default="all")
    p.add_argument("--adulticide-days", type=float, default=0.0, help="days of adulticide before releases")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", parents=[common], help="recompute a reference table")
    p.add_argument("table_id", nargs="?", help="table id, e.g. 3, 7 or 13b")
    p.add_argument("--table", help="same as the positional table id")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (SemanticError, NoPositiveEquilibrium, HypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC


if __name__ == "__main__":
    sys.exit(main())
