"""Day-long fleet simulation in three stages per step.

Stage 1 repositions idle drivers according to the policy's dispatch
matrix, stage 2 matches the drivers now in each cell to that cell's ride
requests from the most expensive down, and stage 3 returns drivers whose
rides finished and applies online/offline events.

Timing conventions:

* a request matched at step ``t`` frees its driver in ``dest`` at the start
  of step ``arrival_step(req) = max(end, start + 1)``;
* requests not served in their start step expire;
* events labelled ``step = t`` change ``d_t``; step-0 events are folded
  into the initial drivers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import HexGrid, adjacency

Policy = Callable[[np.ndarray, np.ndarray, int], np.ndarray]
# matcher(t, cell, idle, requests_in_cell, rng) -> requests to serve
Matcher = Callable[[int, int, int, list, np.random.Generator], list]


class InfeasibleDispatch(ValueError):
    """A dispatch matrix moves drivers that are not there or off the grid graph."""

    def __init__(self, message: str, cell: int | None = None, step: int | None = None):
        super().__init__(message)
        self.cell = cell
        self.step = step


@dataclass(frozen=True)
class RideRequest:
    dep: int
    dest: int
    start: int
    end: int
    price: float
    id: int = -1

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"request ends at {self.end} before it starts at {self.start}")
        if self.price < 0:
            raise ValueError(f"negative price {self.price}")


def arrival_step(req: RideRequest) -> int:
    """Step at whose start the driver of ``req`` is idle again in ``req.dest``."""
    return max(req.end, req.start + 1)


def reposition_costs(grid: HexGrid, kappa: float) -> np.ndarray:
    """``c[i, j] = kappa * hexdistance(i, j)`` on adjacent pairs, zero elsewhere."""
    c = kappa * grid.distance_matrix().astype(float)
    c[adjacency(grid) == 0] = 0.0
    return c


@dataclass
class Scenario:
    grid: HexGrid
    T: int
    requests: list[RideRequest]
    initial_drivers: np.ndarray
    kappa: float = 1.0
    online: np.ndarray | None = None  # (T, n) counts of drivers coming online
    offline: np.ndarray | None = None  # (T, n) counts going offline
    allow_online_offline: bool = False
    driver_multiplier: float = 1.0

    def __post_init__(self):
        n = self.grid.n
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        self.initial_drivers = np.asarray(self.initial_drivers, dtype=np.int64).reshape(n)
        if (self.initial_drivers < 0).any():
            raise ValueError("initial drivers must be nonnegative")
        for name in ("online", "offline"):
            arr = getattr(self, name)
            arr = np.zeros((self.T, n), dtype=np.int64) if arr is None else np.asarray(arr, dtype=np.int64)
            if arr.shape != (self.T, n) or (arr < 0).any():
                raise ValueError(f"{name} events must be a nonnegative ({self.T}, {n}) array")
            setattr(self, name, arr)
        reqs = []
        for a, q in enumerate(self.requests):
            if not (0 <= q.dep < n and 0 <= q.dest < n):
                raise ValueError(f"request {a} references a missing cell")
            if not 0 <= q.start < self.T:
                raise ValueError(f"request {a} starts at {q.start}, outside [0, {self.T})")
            reqs.append(q if q.id == a else replace(q, id=a))
        self.requests = reqs

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def max_gmv(self) -> float:
        return math.fsum(q.price for q in self.requests)

    def cost_matrix(self) -> np.ndarray:
        return reposition_costs(self.grid, self.kappa)

    def has_events(self) -> bool:
        return bool(self.online.any() or self.offline.any())

    def demand_counts(self) -> np.ndarray:
        """``r[t, i]``: number of requests leaving cell ``i`` at step ``t``."""
        r = np.zeros((self.T, self.n), dtype=np.int64)
        for q in self.requests:
            r[q.start, q.dep] += 1
        return r

    def requests_by_step(self) -> list[list[list[RideRequest]]]:
        out = [[[] for _ in range(self.n)] for _ in range(self.T)]
        for q in self.requests:
            out[q.start][q.dep].append(q)
        return out


def apply_driver_multiplier(scenario: Scenario, m: float) -> Scenario:
    """Copy of ``scenario`` with ``floor(m * d)`` initial drivers per cell."""
    if not 0 < m <= 1:
        raise ValueError(f"driver multiplier must lie in (0, 1], got {m}")
    d = np.floor(m * scenario.initial_drivers + 1e-9).astype(np.int64)
    return replace(scenario, initial_drivers=d, driver_multiplier=scenario.driver_multiplier * m)


def relative_metrics(gmv: float, cost: float, max_gmv: float) -> tuple[float, float]:
    """``((gmv - cost) / max_gmv, gmv / max_gmv)``; both are 1.0 on a day without requests."""
    if max_gmv <= 0:
        return 1.0, 1.0
    return (gmv - cost) / max_gmv, gmv / max_gmv


def match_requests(idle: int, requests: Sequence[RideRequest], rng: np.random.Generator) -> list[RideRequest]:
    """The ``min(idle, len(requests))`` most expensive requests.

    Equal prices are ordered by a random permutation drawn from ``rng``,
    which stands in for random driver assignment.
    """
    k = min(int(idle), len(requests))
    if k <= 0:
        return []
    perm = rng.permutation(len(requests))
    prices = np.array([requests[p].price for p in perm])
    order = perm[np.argsort(-prices, kind="stable")]
    return [requests[int(p)] for p in order[:k]]


def _default_matcher(t, cell, idle, requests, rng):
    return match_requests(idle, requests, rng)


@dataclass
class SimState:
    step: int
    idle: np.ndarray
    in_transit: list[tuple[int, int]] = field(default_factory=list)  # (dest, arrival)

    def total_drivers(self) -> int:
        return int(self.idle.sum()) + len(self.in_transit)


@dataclass
class StepReport:
    t: int
    idle_start: int
    moved: int
    cost: float
    demand: int
    served: int
    gmv: float
    in_transit: int
    idle_end: int
    served_ids: list[int] = field(default_factory=list)
    cost_terms: list[float] = field(default_factory=list, repr=False)
    price_terms: list[float] = field(default_factory=list, repr=False)


@dataclass
class Metrics:
    gmv: float
    reposition_cost: float
    max_gmv: float
    served_count: int
    relative_profit: float
    relative_income: float
    steps: list[StepReport] = field(default_factory=list, repr=False)

    @property
    def profit(self) -> float:
        return self.gmv - self.reposition_cost

    def to_dict(self) -> dict:
        return {
            "gmv": self.gmv,
            "reposition_cost": self.reposition_cost,
            "max_gmv": self.max_gmv,
            "served_count": self.served_count,
            "relative_profit": self.relative_profit,
            "relative_income": self.relative_income,
        }


STEP_COLUMNS = ("t", "idle_start", "moved", "cost", "demand", "served", "gmv", "in_transit", "idle_end")


def check_dispatch(grid: HexGrid, idle: np.ndarray, x: np.ndarray, t: int | None = None) -> np.ndarray:
    """Validate ``x`` against ``idle`` and return it as an integer matrix with stays on the diagonal.

    The diagonal of the input is ignored: every driver not sent elsewhere
    stays.  Raises ``InfeasibleDispatch`` naming the offending cell.
    """
    n = grid.n
    x = np.asarray(x)
    if x.shape != (n, n):
        raise InfeasibleDispatch(f"dispatch matrix has shape {x.shape}, expected ({n}, {n})", step=t)
    xi = np.rint(x).astype(np.int64)
    if not np.array_equal(xi, x):
        raise InfeasibleDispatch("dispatch matrix is not integral", step=t)
    L = adjacency(grid)
    if (xi < 0).any():
        i = int(np.argwhere(xi < 0)[0][0])
        raise InfeasibleDispatch(f"negative dispatch out of cell {i}", cell=i, step=t)
    off = (L == 0) & (xi != 0)
    if off.any():
        i, j = (int(v) for v in np.argwhere(off)[0])
        raise InfeasibleDispatch(f"cell {i} sends drivers to non-adjacent cell {j}", cell=i, step=t)
    diag = np.arange(n)
    xi[diag, diag] = 0
    moved = xi.sum(axis=1)
    over = moved > idle
    if over.any():
        i = int(np.flatnonzero(over)[0])
        raise InfeasibleDispatch(f"cell {i} sends {moved[i]} drivers but holds {idle[i]}", cell=i, step=t)
    xi[diag, diag] = idle - moved
    return xi


def initial_state(scenario: Scenario) -> SimState:
    idle = scenario.initial_drivers.copy()
    if scenario.allow_online_offline:
        idle = np.maximum(idle + scenario.online[0] - scenario.offline[0], 0)
    return SimState(0, idle, [])


def step(
    state: SimState,
    scenario: Scenario,
    x_t: np.ndarray,
    rng: np.random.Generator,
    cost: np.ndarray | None = None,
    matcher: Matcher | None = None,
    requests_t: list[list[RideRequest]] | None = None,
) -> tuple[SimState, StepReport]:
    """Advance one step: reposition by ``x_t``, match, then arrivals and events."""
    t = state.step
    grid = scenario.grid
    n = grid.n
    if cost is None:
        cost = scenario.cost_matrix()
    if matcher is None:
        matcher = _default_matcher
    if requests_t is None:
        requests_t = [[] for _ in range(n)]
        for q in scenario.requests:
            if q.start == t:
                requests_t[q.dep].append(q)
    idle_start = int(state.idle.sum())

    # stage 1: reposition
    x = check_dispatch(grid, state.idle, x_t, t)
    ii, jj = np.nonzero(x)
    cost_terms = [float(cost[i, j]) * int(x[i, j]) for i, j in zip(ii, jj) if i != j]
    moved = int(x.sum() - np.trace(x))
    present = x.sum(axis=0)

    # stage 2: matching
    in_transit = list(state.in_transit)
    served_ids = []
    price_terms = []
    demand = 0
    for i in range(n):
        reqs = requests_t[i]
        demand += len(reqs)
        if not reqs:
            continue
        chosen = matcher(t, i, int(present[i]), reqs, rng)
        if len(chosen) > present[i]:
            raise InfeasibleDispatch(f"matcher serves {len(chosen)} requests with {present[i]} drivers", i, t)
        for q in chosen:
            if q.dep != i or q.start != t:
                raise InfeasibleDispatch(f"request {q.id} matched outside its cell and step", i, t)
            in_transit.append((q.dest, arrival_step(q)))
            served_ids.append(q.id)
            price_terms.append(float(q.price))
        present[i] -= len(chosen)

    # stage 3: arrivals, then online, then offline with a clamp at zero
    idle = present.astype(np.int64)
    still = []
    for dest, arr in in_transit:
        if arr <= t + 1:
            idle[dest] += 1
        else:
            still.append((dest, arr))
    if scenario.allow_online_offline and t + 1 < scenario.T:
        idle = idle + scenario.online[t + 1]
        idle = np.maximum(idle - scenario.offline[t + 1], 0)

    report = StepReport(
        t=t,
        idle_start=idle_start,
        moved=moved,
        cost=math.fsum(cost_terms),
        demand=demand,
        served=len(served_ids),
        gmv=math.fsum(price_terms),
        in_transit=len(still),
        idle_end=int(idle.sum()),
        served_ids=served_ids,
        cost_terms=cost_terms,
        price_terms=price_terms,
    )
    return SimState(t + 1, idle, still), report


def run_day(
    scenario: Scenario,
    policy: Policy,
    seed: int = 0,
    matcher: Matcher | None = None,
    on_step: Optional[Callable[[SimState, StepReport], None]] = None,
) -> Metrics:
    """Simulate ``t = 0 .. T-1`` with ``policy(d_t, r_t, t) -> x_t``.

    The policy sees only the idle drivers and the current step's request
    counts.  An infeasible dispatch aborts with ``InfeasibleDispatch``
    carrying the step index.
    """
    rng = np.random.default_rng(seed)
    cost = scenario.cost_matrix()
    by_step = scenario.requests_by_step()
    r = scenario.demand_counts()
    state = initial_state(scenario)
    reports = []
    for t in range(scenario.T):
        x_t = policy(state.idle.copy(), r[t].copy(), t)
        try:
            state, rep = step(state, scenario, x_t, rng, cost, matcher, by_step[t])
        except InfeasibleDispatch as exc:
            raise InfeasibleDispatch(f"step {t}: {exc}", exc.cell, t) from None
        reports.append(rep)
        if on_step is not None:
            on_step(state, rep)
    gmv = math.fsum(p for rep in reports for p in rep.price_terms)
    cst = math.fsum(c for rep in reports for c in rep.cost_terms)
    max_gmv = scenario.max_gmv
    profit, income = relative_metrics(gmv, cst, max_gmv)
    return Metrics(gmv, cst, max_gmv, sum(rep.served for rep in reports), profit, income, reports)


def stay_policy(d_t: np.ndarray, r_t: np.ndarray, t: int) -> np.ndarray:
    """Nobody moves."""
    return np.diag(d_t)


# file formats ---------------------------------------------------------------

REQUEST_HEADER = ("dep", "dest", "start", "end", "price")
EVENT_HEADER = ("cell", "step", "delta")


def _fmt_price(p: float) -> str:
    return repr(float(p))


def write_requests_csv(requests: Sequence[RideRequest], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUEST_HEADER)
        for q in requests:
            w.writerow([q.dep, q.dest, q.start, q.end, _fmt_price(q.price)])


def read_requests_csv(path) -> list[RideRequest]:
    out = []
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        missing = set(REQUEST_HEADER) - set(rd.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for a, row in enumerate(rd):
            out.append(
                RideRequest(
                    int(row["dep"]), int(row["dest"]), int(row["start"]), int(row["end"]), float(row["price"]), a
                )
            )
    return out


def write_events_csv(online: np.ndarray, offline: np.ndarray, path) -> None:
    """One row per nonzero net change: positive ``delta`` is online, negative offline."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_HEADER)
        T, n = online.shape
        for t in range(T):
            for i in range(n):
                if online[t, i]:
                    w.writerow([i, t, int(online[t, i])])
                if offline[t, i]:
                    w.writerow([i, t, -int(offline[t, i])])


def read_events_csv(path, T: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    online = np.zeros((T, n), dtype=np.int64)
    offline = np.zeros((T, n), dtype=np.int64)
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        missing = set(EVENT_HEADER) - set(rd.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in rd:
            i, t, delta = int(row["cell"]), int(row["step"]), int(row["delta"])
            if not (0 <= i < n and 0 <= t < T):
                raise ValueError(f"{path}: event ({i}, {t}) out of range")
            if delta > 0:
                online[t, i] += delta
            else:
                offline[t, i] -= delta
    return online, offline


def save_scenario(scenario: Scenario, directory) -> Path:
    """Write ``scenario.json``, ``requests.csv`` and ``events.csv`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_requests_csv(scenario.requests, directory / "requests.csv")
    write_events_csv(scenario.online, scenario.offline, directory / "events.csv")
    meta = {
        "grid": scenario.grid.to_dict(),
        "T": scenario.T,
        "initial_drivers": scenario.initial_drivers.tolist(),
        "kappa": scenario.kappa,
        "allow_online_offline": scenario.allow_online_offline,
        "driver_multiplier": scenario.driver_multiplier,
        "requests": "requests.csv",
        "events": "events.csv",
    }
    path = directory / "scenario.json"
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return path


def load_scenario(path) -> Scenario:
    """Read a scenario from its directory or its ``scenario.json``."""
    path = Path(path)
    if path.is_dir():
        path = path / "scenario.json"
    with open(path) as fh:
        meta = json.load(fh)
    grid = HexGrid.from_dict(meta["grid"])
    T = int(meta["T"])
    base = path.parent
    requests = read_requests_csv(base / meta.get("requests", "requests.csv"))
    ev = base / meta.get("events", "events.csv")
    online = offline = None
    if ev.exists():
        online, offline = read_events_csv(ev, T, grid.n)
    return Scenario(
        grid,
        T,
        requests,
        np.array(meta["initial_drivers"]),
        float(meta.get("kappa", 1.0)),
        online,
        offline,
        bool(meta.get("allow_online_offline", False)),
        float(meta.get("driver_multiplier", 1.0)),
    )


def write_steps_csv(metrics: Metrics, path, extra: dict[str, Sequence] | None = None) -> None:
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(STEP_COLUMNS) + list(extra))
        for k, rep in enumerate(metrics.steps):
            row = [getattr(rep, c) for c in STEP_COLUMNS]
            row += [vals[k] for vals in extra.values()]
            w.writerow(row)


def write_metrics_json(metrics: Metrics, path, **fields) -> None:
    data = metrics.to_dict()
    data.update(fields)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
