"""Run configuration, policy registry, single runs, sweeps and the validation suite."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .baselines import make_proportional_policy, make_random_move_policy
from .dispatch import DEFAULT_ALPHA, DispatchProblem, solve_mcmf_dispatch
from .lp import DEFAULT_GAMMA, gamma_bound, solve_lp_dispatch
from .oracle import OraclePlan, replay_policy, solve_oracle
from .scenarios import ScenarioGenSpec, generate_scenario
from .simulator import Metrics, Scenario, apply_driver_multiplier, load_scenario, run_day, write_metrics_json, write_steps_csv

log = logging.getLogger("fleetflow")

POLICIES = ("flowopt-lp", "flowopt-mcmf", "oracle", "prop-to-demand", "random-move")


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit status 1)."""


@dataclass
class RunConfig:
    scenario: str | None = None  # scenario directory or scenario.json
    generator: dict | None = None  # ScenarioGenSpec fields, used when scenario is None
    gen_seed: int = 0
    policy: str = "flowopt-lp"
    K: int = 30
    alpha: float = DEFAULT_ALPHA
    gamma: float = DEFAULT_GAMMA
    kappa: float | None = None  # overrides the scenario's cost scale when set
    seed: int = 0
    allow_online_offline: bool | None = None  # None keeps the scenario's flag
    driver_multiplier: float = 1.0
    clamp_horizon: bool = True
    step_minutes: float = 10.0
    output: str | None = None

    def validate(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; expected one of {', '.join(POLICIES)}")
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.driver_multiplier <= 1:
            raise ConfigError(f"driver_multiplier must lie in (0, 1], got {self.driver_multiplier}")
        if self.kappa is not None and self.kappa < 0:
            raise ConfigError(f"kappa must be nonnegative, got {self.kappa}")
        if self.scenario is None and self.generator is None:
            raise ConfigError("config needs either a scenario path or a generator spec")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def to_dict(self) -> dict:
        return asdict(self)


def scenario_from_config(cfg: RunConfig) -> Scenario:
    try:
        if cfg.scenario is not None:
            scn = load_scenario(cfg.scenario)
        else:
            scn = generate_scenario(ScenarioGenSpec.from_dict(cfg.generator), cfg.gen_seed)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot build scenario: {exc}") from None
    if cfg.kappa is not None:
        scn = replace(scn, kappa=cfg.kappa)
    if cfg.allow_online_offline is not None:
        scn = replace(scn, allow_online_offline=cfg.allow_online_offline)
    if cfg.driver_multiplier != 1.0:
        scn = apply_driver_multiplier(scn, cfg.driver_multiplier)
    return scn


@dataclass
class StepSolve:
    t: int
    K: int
    seconds: float
    served_plan: int
    f_plus: int
    f_minus: float


class FlowOptPolicy:
    """Receding-horizon dispatch: solve the K-step problem, apply its first move.

    Near the end of the day the horizon is cut to the steps that remain
    when ``clamp_horizon`` is set.
    """

    def __init__(
        self,
        scenario: Scenario,
        K: int,
        alpha: float = DEFAULT_ALPHA,
        gamma: float = DEFAULT_GAMMA,
        solver: str = "lp",
        clamp_horizon: bool = True,
        budget_seconds: float = math.inf,
        cross_check: bool = False,
    ):
        if solver not in ("lp", "mcmf"):
            raise ValueError(f"solver must be 'lp' or 'mcmf', got {solver!r}")
        self.grid = scenario.grid
        self.T = scenario.T
        self.cost = scenario.cost_matrix()
        self.K = K
        self.alpha = alpha
        self.gamma = gamma
        self.solver = solver
        self.clamp_horizon = clamp_horizon
        self.budget_seconds = budget_seconds
        self.cross_check = cross_check
        self.solves: list[StepSolve] = []
        self.mismatches: list[int] = []

    def __call__(self, d_t, r_t, t) -> np.ndarray:
        K = min(self.K, self.T - t) if self.clamp_horizon else self.K
        if d_t.sum() == 0 or r_t.sum() == 0:
            # nothing to serve anywhere in the horizon: every driver stays
            self.solves.append(StepSolve(t, K, 0.0, 0, 0, 0.0))
            return np.diag(d_t)
        p = DispatchProblem.observed(self.grid, d_t, r_t, self.cost, K, self.alpha)
        t0 = time.perf_counter()
        if self.solver == "lp":
            sol = solve_lp_dispatch(p, gamma_bound(p, self.gamma).chosen)
        else:
            sol = solve_mcmf_dispatch(p)
        dt = time.perf_counter() - t0
        if dt > self.budget_seconds:
            log.warning("step %d: solver took %.2fs, above the %.2fs budget", t, dt, self.budget_seconds)
        if self.cross_check:
            other = solve_mcmf_dispatch(p) if self.solver == "lp" else solve_lp_dispatch(p)
            if other.objective_plus != sol.objective_plus or not math.isclose(
                other.objective_minus, sol.objective_minus, rel_tol=1e-9, abs_tol=1e-9
            ):
                self.mismatches.append(t)
        self.solves.append(StepSolve(t, K, dt, int(sol.served[0].sum()), sol.objective_plus, sol.objective_minus))
        return sol.x_first


@dataclass
class RunResult:
    config: RunConfig
    metrics: Metrics
    policy: object = None
    matcher: object = None
    plan: OraclePlan | None = None
    wall_seconds: float = 0.0
    extra: dict = field(default_factory=dict)


def make_policy(name: str, scenario: Scenario, cfg: RunConfig, cross_check: bool = False):
    """``(policy, matcher, plan)`` for a registered policy name."""
    budget = cfg.step_minutes * 60.0 / 10.0
    if name == "flowopt-lp":
        return FlowOptPolicy(scenario, cfg.K, cfg.alpha, cfg.gamma, "lp", cfg.clamp_horizon, budget, cross_check), None, None
    if name == "flowopt-mcmf":
        return FlowOptPolicy(scenario, cfg.K, cfg.alpha, cfg.gamma, "mcmf", cfg.clamp_horizon, budget, cross_check), None, None
    if name == "prop-to-demand":
        return make_proportional_policy(scenario.grid), None, None
    if name == "random-move":
        return make_random_move_policy(scenario.grid), None, None
    if name == "oracle":
        if scenario.allow_online_offline:
            raise ConfigError("the oracle policy requires allow_online_offline = false")
        plan = solve_oracle(scenario)
        policy, matcher = replay_policy(plan)
        return policy, matcher, plan
    raise ConfigError(f"unknown policy {name!r}")


def run(cfg: RunConfig, scenario: Scenario | None = None, cross_check: bool = False) -> RunResult:
    """Simulate one day under ``cfg`` and, if ``cfg.output`` is set, write its artifacts."""
    cfg.validate()
    scn = scenario if scenario is not None else scenario_from_config(cfg)
    t0 = time.perf_counter()
    policy, matcher, plan = make_policy(cfg.policy, scn, cfg, cross_check)
    metrics = run_day(scn, policy, cfg.seed, matcher)
    res = RunResult(cfg, metrics, policy, matcher, plan, time.perf_counter() - t0)
    if plan is not None and metrics.profit != plan.objective:
        raise AssertionError(f"oracle replay profit {metrics.profit} differs from plan objective {plan.objective}")
    if cfg.output:
        write_run_outputs(res, Path(cfg.output))
    return res


def write_run_outputs(res: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    extra = {}
    fields_out = {"policy": res.config.policy, "seed": res.config.seed, "K": res.config.K, "wall_seconds": res.wall_seconds}
    if isinstance(res.policy, FlowOptPolicy):
        extra["solver_seconds"] = [s.seconds for s in res.policy.solves]
        extra["horizon"] = [s.K for s in res.policy.solves]
        extra["f_plus"] = [s.f_plus for s in res.policy.solves]
        extra["f_minus"] = [s.f_minus for s in res.policy.solves]
        fields_out["max_solver_seconds"] = max(extra["solver_seconds"], default=0.0)
    write_steps_csv(res.metrics, out / "steps.csv", extra)
    write_metrics_json(res.metrics, out / "metrics.json", **fields_out)
    if res.plan is not None:
        res.plan.save(out / "plan.json")
    with open(out / "config.json", "w") as fh:
        json.dump(res.config.to_dict(), fh, indent=2)
        fh.write("\n")


def trend(values: Sequence[float], tol: float = 1e-12) -> str:
    diffs = np.diff(np.asarray(values, dtype=float))
    if diffs.size == 0 or (np.abs(diffs) <= tol).all():
        return "constant"
    if (diffs >= -tol).all():
        return "non-decreasing"
    if (diffs <= tol).all():
        return "non-increasing"
    return "mixed"


SWEEP_AXES = ("K", "driver_multiplier")


def sweep(cfg: RunConfig, axis: str, values: Sequence[float], seeds: Sequence[int] | None = None) -> list[dict]:
    """One metrics row per (value, seed); ``seeds`` defaults to ``[cfg.seed]``."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    cfg.validate()
    seeds = [cfg.seed] if seeds is None else list(seeds)
    base = scenario_from_config(replace(cfg, driver_multiplier=1.0))
    rows = []
    for v in values:
        for s in seeds:
            if axis == "K":
                c = replace(cfg, K=int(v), seed=s, output=None)
                scn = base if cfg.driver_multiplier == 1.0 else apply_driver_multiplier(base, cfg.driver_multiplier)
            else:
                c = replace(cfg, driver_multiplier=float(v), seed=s, output=None)
                scn = base if float(v) == 1.0 else apply_driver_multiplier(base, float(v))
            res = run(c, scn)
            row = {axis: v, "seed": s}
            row.update(res.metrics.to_dict())
            row["wall_seconds"] = res.wall_seconds
            rows.append(row)
    return rows


def sweep_summary(rows: list[dict], axis: str) -> dict:
    by: dict = {}
    for row in rows:
        by.setdefault(row[axis], []).append(row["relative_profit"])
    keys = list(by)
    means = [float(np.mean(by[k])) for k in keys]
    return {"axis": axis, "values": keys, "mean_relative_profit": means, "trend": trend(means)}


def write_sweep_csv(rows: list[dict], path) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


# validation suite -----------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


def validate_scenario(cfg: RunConfig, scenario: Scenario | None = None) -> list[Check]:
    """Invariant suite over one scenario: conservation, determinism, LP/MCMF agreement, oracle checks."""
    cfg.validate()
    scn = scenario if scenario is not None else scenario_from_config(cfg)
    checks: list[Check] = []
    runs: dict[str, Metrics] = {}
    closed = not (scn.allow_online_offline and scn.has_events())
    for name in ("prop-to-demand", "random-move", "flowopt-lp"):
        c = replace(cfg, policy=name, output=None)
        policy, matcher, _ = make_policy(name, scn, c, cross_check=(name == "flowopt-lp"))
        totals = []
        m = run_day(scn, policy, c.seed, matcher, on_step=lambda st, rep: totals.append(st.total_drivers()))
        runs[name] = m
        if closed:
            start = int(scn.initial_drivers.sum())
            ok = all(v == start for v in totals)
            checks.append(Check(f"conservation[{name}]", ok, f"{start} drivers, range {min(totals, default=start)}..{max(totals, default=start)}"))
        again = run_day(scn, make_policy(name, scn, c)[0], c.seed, matcher)
        checks.append(Check(f"determinism[{name}]", again.to_dict() == m.to_dict()))
        ok = 0 <= m.relative_income <= 1 + 1e-12
        checks.append(Check(f"relative-income-range[{name}]", ok, f"{m.relative_income:.6f}"))
        if isinstance(policy, FlowOptPolicy):
            checks.append(
                Check("lp-mcmf-equivalence", not policy.mismatches, f"{len(policy.solves)} steps, mismatches at {policy.mismatches}")
            )
    if not scn.allow_online_offline:
        plan = solve_oracle(scn)
        checks.append(Check("oracle-integrality", True, f"{len(plan.accepted)} of {plan.b.size} requests accepted"))
        pol, mat = replay_policy(plan)
        replay = run_day(scn, pol, cfg.seed, mat)
        checks.append(Check("oracle-replay", replay.profit == plan.objective, f"{replay.profit!r} vs {plan.objective!r}"))
        lp_gap = abs(plan.lp_objective - plan.objective)
        checks.append(Check("oracle-lp-objective", lp_gap <= 1e-6 * max(1.0, abs(plan.objective)), f"gap {lp_gap:.3g}"))
        for name, m in runs.items():
            checks.append(
                Check(f"oracle-dominance[{name}]", plan.objective >= m.profit - 1e-9, f"{plan.objective:.4f} >= {m.profit:.4f}")
            )
    return checks
