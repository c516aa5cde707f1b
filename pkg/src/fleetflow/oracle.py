"""Full-information day planner.

The planner sees every request of the day and chooses which to serve
(``b``), how to reposition idle drivers (``x``) and how many drivers sit
idle into the next step (``s``).  The 0/1 choice of ``b`` is relaxed to
``0 <= b <= 1``; the constraint matrix is a network matrix after the
unimodular substitution ``stay = d - outflow``, so the simplex vertex is
integral and integrality is asserted rather than enforced.

Rows per cell ``i`` and step ``t``, in order:

* ``balance``: ``sum_dep b + s + out - in = d`` (``d`` observed at ``t = 0``);
* ``arrival`` (``t >= 1``): ``d = s[t-1] + sum b`` over requests arriving
  at ``(i, t)``;
* ``mass``: ``out <= d``.

Stays ``x[i, i]`` cancel in the balance row and are not variables.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lp import OPTIMAL, LinearProgram, LPBuilder, LPError, assert_integral, simplex_solve
from .simulator import RideRequest, Scenario, arrival_step


@dataclass(frozen=True)
class RequestIndexSets:
    dep: dict  # (cell, step) -> request ids leaving there
    dest: dict  # (cell, step) -> request ids whose driver is back there

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "RequestIndexSets":
        dep: dict = {}
        dest: dict = {}
        for q in scenario.requests:
            dep.setdefault((q.dep, q.start), []).append(q.id)
            arr = arrival_step(q)
            if arr < scenario.T:
                dest.setdefault((q.dest, arr), []).append(q.id)
        return cls(dep, dest)


@dataclass(frozen=True)
class OracleLPMap:
    b: np.ndarray  # (m,)
    x: dict  # (t, i, j) -> column, j != i
    s: np.ndarray  # (T, n)
    d: np.ndarray  # (T, n); row 0 is -1
    balance_rows: np.ndarray  # (T, n)
    arrival_rows: np.ndarray  # (T, n); row 0 is -1
    mass_rows: np.ndarray  # (T, n)


def build_oracle_lp(scenario: Scenario) -> tuple[LinearProgram, OracleLPMap]:
    if scenario.allow_online_offline:
        raise ValueError("the oracle does not model drivers going online or offline")
    T, n = scenario.T, scenario.n
    cost = scenario.cost_matrix()
    nbrs = scenario.grid.neighbor_lists()
    sets = RequestIndexSets.from_scenario(scenario)
    d0 = scenario.initial_drivers

    lb = LPBuilder()
    bcol = np.array(
        [lb.add_var(f"b_{q.id}", float(q.price), 1.0) for q in scenario.requests], dtype=np.int64
    )
    xcol = {}
    for t in range(T):
        for i in range(n):
            for j in nbrs[i]:
                if j != i:
                    xcol[t, i, j] = lb.add_var(f"x_{i}_{j}_{t}", -float(cost[i, j]))
    scol = np.empty((T, n), dtype=np.int64)
    dcol = np.full((T, n), -1, dtype=np.int64)
    for t in range(T):
        for i in range(n):
            scol[t, i] = lb.add_var(f"s_{i}_{t}")
    for t in range(1, T):
        for i in range(n):
            dcol[t, i] = lb.add_var(f"d_{i}_{t}")

    bal = np.empty((T, n), dtype=np.int64)
    arr = np.full((T, n), -1, dtype=np.int64)
    mass = np.empty((T, n), dtype=np.int64)
    for t in range(T):
        for i in range(n):
            row: dict[int, float] = {int(bcol[a]): 1.0 for a in sets.dep.get((i, t), ())}
            row[int(scol[t, i])] = 1.0
            out = {xcol[t, i, j]: 1.0 for j in nbrs[i] if j != i}
            row.update(out)
            for j in nbrs[i]:
                if j != i:
                    row[xcol[t, j, i]] = -1.0
            if t == 0:
                bal[t, i] = lb.add_row(row, "E", float(d0[i]), f"balance_{i}_{t}")
            else:
                row[int(dcol[t, i])] = -1.0
                bal[t, i] = lb.add_row(row, "E", 0.0, f"balance_{i}_{t}")
                a_row = {int(dcol[t, i]): 1.0, int(scol[t - 1, i]): -1.0}
                for a in sets.dest.get((i, t), ()):
                    a_row[int(bcol[a])] = -1.0
                arr[t, i] = lb.add_row(a_row, "E", 0.0, f"arrival_{i}_{t}")
            if t == 0:
                mass[t, i] = lb.add_row(out, "L", float(d0[i]), f"mass_{i}_{t}")
            else:
                m_row = dict(out)
                m_row[int(dcol[t, i])] = -1.0
                mass[t, i] = lb.add_row(m_row, "L", 0.0, f"mass_{i}_{t}")
    return lb.build(), OracleLPMap(bcol, xcol, scol, dcol, bal, arr, mass)


def oracle_crash_basis(lp: LinearProgram, vmap: OracleLPMap) -> list[int]:
    """Nobody serves or moves: ``s`` basic in balance rows, ``d`` in arrival rows."""
    basis = [lp.num_vars + r for r in range(lp.num_rows)]
    T, n = vmap.s.shape
    for t in range(T):
        for i in range(n):
            basis[vmap.balance_rows[t, i]] = int(vmap.s[t, i])
            if t >= 1:
                basis[vmap.arrival_rows[t, i]] = int(vmap.d[t, i])
    return basis


@dataclass
class OraclePlan:
    b: np.ndarray  # (m,) in {0, 1}
    x: np.ndarray  # (T, n, n) moves, zero diagonal
    s: np.ndarray  # (T, n)
    objective: float
    lp_objective: float = math.nan
    iterations: int = 0
    _accepted: frozenset = field(default=frozenset(), repr=False)

    def __post_init__(self):
        self._accepted = frozenset(int(a) for a in np.flatnonzero(self.b))

    @property
    def accepted(self) -> frozenset:
        return self._accepted

    def to_dict(self) -> dict:
        T, n, _ = self.x.shape
        trip = [[int(t), int(i), int(j), int(self.x[t, i, j])] for t, i, j in zip(*np.nonzero(self.x))]
        return {
            "T": T,
            "n": n,
            "num_requests": int(self.b.size),
            "accepted": sorted(self._accepted),
            "x": trip,
            "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OraclePlan":
        T, n = int(data["T"]), int(data["n"])
        b = np.zeros(int(data["num_requests"]), dtype=np.int64)
        b[list(data["accepted"])] = 1
        x = np.zeros((T, n, n), dtype=np.int64)
        for t, i, j, v in data["x"]:
            x[t, i, j] = v
        return cls(b, x, np.zeros((T, n), dtype=np.int64), float(data["objective"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "OraclePlan":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def plan_objective(scenario: Scenario, b: np.ndarray, x: np.ndarray) -> float:
    """``sum b * price - sum c * x`` with correctly rounded sums."""
    cost = scenario.cost_matrix()
    gmv = math.fsum(float(q.price) for q in scenario.requests if b[q.id])
    terms = [float(cost[i, j]) * int(x[t, i, j]) for t, i, j in zip(*np.nonzero(x)) if i != j]
    return gmv - math.fsum(terms)


def solve_oracle(scenario: Scenario) -> OraclePlan:
    """Optimal day plan; raises if the simplex vertex is not integral."""
    T, n = scenario.T, scenario.n
    lp, vmap = build_oracle_lp(scenario)
    if lp.num_vars == 0:
        return OraclePlan(np.zeros(0, dtype=np.int64), np.zeros((T, n, n), dtype=np.int64), np.zeros((T, n)), 0.0, 0.0)
    res = simplex_solve(lp, oracle_crash_basis(lp, vmap))
    if res.status != OPTIMAL:
        raise LPError(f"oracle LP ended {res.status}")
    v = assert_integral(res.values)
    b = v[vmap.b] if vmap.b.size else np.zeros(0, dtype=np.int64)
    if ((b < 0) | (b > 1)).any():
        raise AssertionError("oracle acceptance outside {0, 1}")
    x = np.zeros((T, n, n), dtype=np.int64)
    for (t, i, j), col in vmap.x.items():
        x[t, i, j] = v[col]
    s = v[vmap.s]
    plan = OraclePlan(b, x, s, plan_objective(scenario, b, x), res.objective_value, res.iterations)
    return plan


def replay_policy(plan: OraclePlan):
    """Policy and matcher that reproduce ``plan`` inside ``run_day``."""
    accepted = plan.accepted

    def policy(d_t, r_t, t):
        x = plan.x[t].copy()
        np.fill_diagonal(x, 0)
        x[np.arange(len(d_t)), np.arange(len(d_t))] = d_t - x.sum(axis=1)
        return x

    def matcher(t, cell, idle, requests: list[RideRequest], rng):
        return [q for q in requests if q.id in accepted]

    return policy, matcher
