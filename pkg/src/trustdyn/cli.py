"""Command line front end.

Exit codes: 0 success, 2 invalid input, 3 solver or sweep failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .abm import SimConfig, abm_run
from .game import PopulationState
from .markov import ConvergenceError, NonUniqueStationaryError
from .sweep import (
    HIST_HEADER,
    OUTPUT_KINDS,
    PRESETS,
    SERIES_HEADER,
    PointError,
    SweepError,
    _csv_text,
    _write,
    manifest_json,
    parse_axis,
    parse_config,
    point_name,
    preset,
    run_point,
    run_sweep,
    summary_csv,
)

log = logging.getLogger("trustdyn")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3

PARAM_FLAGS = [
    ("--Z", int, "population size"),
    ("--N", int, "group size"),
    ("--M", int, "investment threshold (number of T agents)"),
    ("--tv", float, "investment per round"),
    ("--RT", float, "trustworthy multiply factor"),
    ("--RU", float, "untrustworthy multiply factor"),
    ("--sigma", float, "observation cost"),
    ("--w", float, "continuation probability"),
    ("--beta", float, "selection intensity"),
    ("--mu", float, "mutation probability (default 1/Z)"),
    ("--rounds-override", float, "expected rounds, replacing 1/(1-w)"),
]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model parameters")
    for flag, typ, text in PARAM_FLAGS:
        g.add_argument(flag, type=typ, default=None, help=text)
    s = p.add_argument_group("run settings")
    s.add_argument("--config", type=Path, help="JSON sweep config; flags override it")
    s.add_argument("--tol", type=float, default=None, help="power iteration tolerance")
    s.add_argument("--max-iters", type=int, default=None)
    s.add_argument("--method", choices=("direct", "power"), default=None,
                   help="stationary solver (default direct)")
    s.add_argument("--out", type=Path, default=None, help="output directory")
    s.add_argument("--jobs", type=int, default=None, help="parallel sweep workers")
    s.add_argument("--seed", type=int, default=None, help="simulation seed")
    s.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="trustdyn",
        description="Stochastic dynamics of the repeated N-player trust game.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("stationary", "stationary distribution of one parameter point"),
        ("gradient", "gradient of selection of one parameter point"),
        ("summary", "stationary averages of one parameter point"),
    ]:
        sub.add_parser(name, parents=[common], help=text)

    sw = sub.add_parser("sweep", parents=[common], help="Cartesian parameter sweep")
    sw.add_argument("--axis", action="append", default=None, metavar="NAME=V1,V2",
                    help="sweep axis, repeatable; bind parameters with N:M=4:2,6:3")
    sw.add_argument("--outputs", default=None,
                    help=f"comma separated subset of {','.join(OUTPUT_KINDS)}")

    sim = sub.add_parser("simulate", parents=[common], help="agent-based simulation")
    sim.add_argument("--steps", type=int, default=1_000_000)
    sim.add_argument("--burn-in", type=int, default=100_000)
    sim.add_argument("--payoff-mode", choices=("expected", "sampled"), default="expected")
    sim.add_argument("--groups", type=int, default=1, help="games per payoff evaluation (sampled mode)")
    sim.add_argument("--record-every", type=int, default=1000)
    sim.add_argument("--initial", default=None, metavar="I_CI,I_T",
                     help="initial counts; random strategies when omitted")

    pr = sub.add_parser("preset", parents=[common], help="sweep reproducing one figure")
    pr.add_argument("name", nargs="?", choices=PRESETS)
    pr.add_argument("--list", action="store_true", help="list presets and exit")
    pr.add_argument("--dry-run", action="store_true", help="print the points without running")
    return parser


def _overrides(args) -> dict:
    return {
        "Z": args.Z, "N": args.N, "M": args.M, "tv": args.tv, "R_T": args.RT, "R_U": args.RU,
        "sigma": args.sigma, "w": args.w, "beta": args.beta, "mu": args.mu,
        "rounds_override": args.rounds_override,
    }


def _settings(args) -> dict:
    return {"out": args.out, "jobs": args.jobs, "tol": args.tol,
            "max_iters": args.max_iters, "method": args.method}


def _single(args, kind: str) -> int:
    spec = parse_config(args.config, _overrides(args), axes=[], **_settings(args))
    (params,) = spec.points()
    outputs = ("summary",) if kind == "summary" else (kind, "summary") if kind == "stationary" else (kind,)
    row, files = run_point(params, outputs, spec.out_dir, spec.tol, spec.max_iters, spec.method)
    if spec.out_dir is not None:
        if row is not None:
            _write(spec.out_dir / "summary.csv", summary_csv([row]))
        _write(spec.out_dir / "manifest.json", manifest_json(spec, [params]))
        print(spec.out_dir / kind / f"{point_name(params)}.csv" if kind != "summary"
              else spec.out_dir / "summary.csv")
    elif kind == "summary":
        sys.stdout.write(summary_csv([row]))
    else:
        sys.stdout.write(files[kind])
    return EXIT_OK


def _sweep(args) -> int:
    axes = [parse_axis(a) for a in args.axis] if args.axis else None
    outputs = args.outputs.split(",") if args.outputs else None
    spec = parse_config(args.config, _overrides(args), axes=axes, outputs=outputs, **_settings(args))
    if spec.out_dir is None:
        spec = spec.with_overrides(out_dir=Path("sweep_output"))
    return _run_spec(spec)


def _run_spec(spec) -> int:
    print(f"{spec.size} point(s) -> {spec.out_dir}", file=sys.stderr)
    rows = run_sweep(spec)
    if "summary" in spec.outputs:
        print(spec.out_dir / "summary.csv")
    log.info("%d summary row(s) written", len(rows))
    return EXIT_OK


def _preset(args) -> int:
    if args.list or not args.name:
        for name in PRESETS:
            spec = preset(name)
            axes = "; ".join(f"{','.join(n)}: {len(v)} value(s)" for n, v in spec.axes)
            print(f"{name}\t{axes}")
        return EXIT_OK
    spec = preset(args.name)
    base = dict(spec.base)
    base.update({k: v for k, v in _overrides(args).items() if v is not None})
    changes = {k: v for k, v in _settings(args).items() if v is not None}
    if "out" in changes:
        changes["out_dir"] = changes.pop("out")
    spec = spec.with_overrides(base=base, **changes)
    if spec.out_dir is None:
        spec = spec.with_overrides(out_dir=Path(args.name))
    if args.dry_run:
        for p in spec.points():
            print(point_name(p))
        return EXIT_OK
    return _run_spec(spec)


def _simulate(args) -> int:
    spec = parse_config(args.config, _overrides(args), axes=[], **_settings(args))
    (params,) = spec.points()
    initial = None
    if args.initial:
        i_ci, i_t = (int(x) for x in args.initial.split(","))
        initial = PopulationState(i_ci, i_t)
        initial.check(params.Z)
    seed = 0 if args.seed is None else args.seed
    config = SimConfig(params, args.steps, args.burn_in, seed, args.payoff_mode, args.groups,
                       initial, args.record_every)
    result = abm_run(config)
    if spec.out_dir is not None:
        name = point_name(params)
        _write(spec.out_dir / "abm" / f"{name}_series.csv", _csv_text(SERIES_HEADER, result.series))
        _write(
            spec.out_dir / "abm" / f"{name}_hist.csv",
            _csv_text(HIST_HEADER, ((int(a), int(b), int(params.Z - a - b), int(v))
                                    for (a, b), v in zip(result.states, result.visits))),
        )
    print(json.dumps({"rho_CI": result.rho[0], "rho_T": result.rho[1], "rho_U": result.rho[2],
                      "steps": args.steps, "burn_in": args.burn_in, "seed": seed}))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handlers = {
        "stationary": lambda: _single(args, "stationary"),
        "gradient": lambda: _single(args, "gradient"),
        "summary": lambda: _single(args, "summary"),
        "sweep": lambda: _sweep(args),
        "simulate": lambda: _simulate(args),
        "preset": lambda: _preset(args),
    }
    try:
        return handlers[args.command]()
    except (SweepError, PointError, ConvergenceError, NonUniqueStationaryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
