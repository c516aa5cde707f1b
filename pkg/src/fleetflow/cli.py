"""Command-line front end: ``fleetflow {gen, run, sweep, validate}``.

Exit status: 0 ok, 1 configuration error, 2 solver or validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import (
    POLICIES,
    SWEEP_AXES,
    ConfigError,
    RunConfig,
    run,
    sweep,
    sweep_summary,
    validate_scenario,
    write_sweep_csv,
)
from .lp import LPError, NonIntegralSolution
from .scenarios import ScenarioGenSpec, generate_scenario
from .simulator import InfeasibleDispatch, save_scenario

log = logging.getLogger("fleetflow")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; here 2 means a solver failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--scenario", help="scenario directory or scenario.json")
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--K", type=int, dest="K")
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--driver-multiplier", type=float, dest="driver_multiplier")
    p.add_argument("--online-offline", dest="allow_online_offline", action="store_true", default=None)
    p.add_argument("--no-online-offline", dest="allow_online_offline", action="store_false")
    p.add_argument("--no-clamp-horizon", dest="clamp_horizon", action="store_false", default=None)
    p.add_argument("--out", dest="output", help="output directory")


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {
        k: getattr(args, k)
        for k in ("scenario", "policy", "K", "alpha", "gamma", "kappa", "seed", "driver_multiplier",
                  "allow_online_offline", "clamp_horizon", "output")
        if getattr(args, k, None) is not None
    }
    if "scenario" in overrides:
        overrides["generator"] = None
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def cmd_gen(args) -> int:
    data = {}
    if args.spec:
        try:
            with open(args.spec) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read generator spec {args.spec}: {exc}") from None
    for k in ("radius", "T", "base_rate", "num_drivers", "kappa", "profile", "placement"):
        v = getattr(args, k)
        if v is not None:
            data[k] = v
    try:
        spec = ScenarioGenSpec.from_dict(data)
        scn = generate_scenario(spec, args.seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    path = save_scenario(scn, args.out)
    print(f"wrote {path} ({scn.n} cells, T={scn.T}, {len(scn.requests)} requests, {int(scn.initial_drivers.sum())} drivers)")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    res = run(cfg)
    m = res.metrics
    print(json.dumps({"policy": cfg.policy, **m.to_dict(), "wall_seconds": round(res.wall_seconds, 3)}, indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse sweep values {args.values!r}") from None
    if args.axis == "K":
        values = [int(v) for v in values]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    rows = sweep(cfg, args.axis, values, seeds)
    summary = sweep_summary(rows, args.axis)
    if cfg.output:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, out / "sweep.csv")
        with open(out / "sweep_summary.json", "w") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    for v, mp in zip(summary["values"], summary["mean_relative_profit"]):
        print(f"{args.axis}={v}\tmean relative profit {mp:.4f}")
    print(f"trend: {summary['trend']}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _config(args)
    checks = validate_scenario(cfg)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fleetflow", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic scenario")
    g.add_argument("--spec", help="JSON generator spec")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--radius", type=int)
    g.add_argument("--T", type=int, dest="T")
    g.add_argument("--base-rate", type=float, dest="base_rate")
    g.add_argument("--num-drivers", type=int, dest="num_drivers")
    g.add_argument("--kappa", type=float)
    g.add_argument("--profile")
    g.add_argument("--placement")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="simulate one day under a policy")
    _add_run_flags(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep K or the driver multiplier")
    _add_run_flags(s)
    s.add_argument("--axis", choices=SWEEP_AXES, required=True)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--seeds", help="comma-separated simulation seeds")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="run the invariant suite over a scenario")
    _add_run_flags(v)
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (LPError, NonIntegralSolution, InfeasibleDispatch, AssertionError, ArithmeticError) as exc:
        log.error("solver error: %s: %s", type(exc).__name__, exc)
        return EXIT_SOLVER
    except ValueError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
