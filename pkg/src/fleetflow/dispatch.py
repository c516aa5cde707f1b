"""Receding-horizon dispatch problems and their time-expanded flow networks.

A problem observed at step ``t`` has ``K`` horizon steps, indexed ``k = 0 ..
K-1`` here (``k`` stands for ``t + k``).  The time-expanded network has a
source ``S``, a sink ``T`` and two copies ``V[i, k]``, ``W[i, k]`` of every
cell per horizon step:

* ``S -> V[i, 0]``       capacity ``d[i]``, cost 0
* ``V[i, k] -> W[j, k]`` unbounded, cost ``c[k, i, j]`` where ``L[i][j] = 1``
* ``W[i, k] -> V[i, k+1]`` unbounded, cost 0, for ``k < K - 1``
* ``W[i, k] -> T``       capacity ``r[k, i]``, cost ``alpha * k``

Real costs are multiplied by ``cost_scale`` and must land on integers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .flownet import UNBOUNDED, FlowNetwork, mcmf
from .grid import HexGrid, adjacency

DEFAULT_ALPHA = 100.0
DEFAULT_COST_SCALE = 100

Forecast = Callable[[np.ndarray, int], np.ndarray]


class ConstraintViolation(ValueError):
    """A dispatch plan breaks a feasibility constraint."""


def served_count(d_i: int, inflow: int, outflow: int, r_i: int) -> int:
    """Requests served in a cell: ``min(d_i + inflow - outflow, r_i)``."""
    present = d_i + inflow - outflow
    if present < 0:
        raise ConstraintViolation(
            f"negative driver count after moves: {d_i} + {inflow} - {outflow} = {present}"
        )
    return min(present, r_i)


def hold_demand(r_t, K: int) -> np.ndarray:
    """Forecast that repeats the observed request counts for all ``K`` steps."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    r_t = np.asarray(r_t, dtype=np.int64)
    return np.tile(r_t, (K, 1))


def _to_int_scaled(values: np.ndarray, scale: int, what: str) -> np.ndarray:
    scaled = np.asarray(values, dtype=float) * scale
    rounded = np.rint(scaled)
    if np.any(np.abs(scaled - rounded) > 1e-6):
        raise ValueError(f"{what} times cost_scale={scale} is not integral")
    return rounded.astype(np.int64)


class DispatchProblem:
    """Observed state ``d`` plus request forecast ``r`` over a ``K``-step horizon.

    ``c`` may be an ``(n, n)`` matrix (time-invariant) or a ``(K, n, n)``
    tensor.  Entries outside the adjacency are ignored; diagonal entries must
    be zero.
    """

    def __init__(
        self,
        grid: HexGrid,
        d,
        r,
        c=None,
        alpha: float = DEFAULT_ALPHA,
        cost_scale: int = DEFAULT_COST_SCALE,
    ):
        n = grid.n
        d = np.asarray(d, dtype=np.int64).reshape(-1)
        r = np.asarray(r, dtype=np.int64)
        if r.ndim == 1:
            r = r.reshape(1, -1)
        if d.shape != (n,):
            raise ValueError(f"d must have {n} entries, got shape {d.shape}")
        if r.ndim != 2 or r.shape[1] != n or r.shape[0] < 1:
            raise ValueError(f"r must have shape (K, {n}), got {r.shape}")
        if (d < 0).any() or (r < 0).any():
            raise ValueError("d and r must be nonnegative")
        K = r.shape[0]
        L = adjacency(grid).astype(bool)
        if c is None:
            c = np.zeros((K, n, n))
        c = np.asarray(c, dtype=float)
        if c.shape == (n, n):
            c = np.broadcast_to(c, (K, n, n))
        if c.shape != (K, n, n):
            raise ValueError(f"c must have shape ({n}, {n}) or ({K}, {n}, {n}), got {c.shape}")
        c = np.where(L[None, :, :], c, 0.0)
        if not np.isfinite(c).all() or (c < 0).any():
            raise ValueError("reposition costs must be finite and nonnegative")
        if np.any(np.diagonal(c, axis1=1, axis2=2) != 0):
            raise ValueError("staying in place must cost nothing (c[k, i, i] = 0)")
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.grid = grid
        self.d = d
        self.r = r
        self.c = c
        self.alpha = float(alpha)
        self.cost_scale = int(cost_scale)
        for arr in (self.d, self.r, self.c):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def K(self) -> int:
        return self.r.shape[0]

    @classmethod
    def observed(
        cls,
        grid: HexGrid,
        d_t,
        r_t,
        c,
        K: int,
        alpha: float = DEFAULT_ALPHA,
        forecast: Forecast = hold_demand,
        cost_scale: int = DEFAULT_COST_SCALE,
    ) -> "DispatchProblem":
        """Problem for one MPC step: future demand comes from ``forecast(r_t, K)``."""
        return cls(grid, d_t, forecast(r_t, K), c, alpha, cost_scale)

    def scaled_costs(self) -> tuple[np.ndarray, int]:
        return (
            _to_int_scaled(self.c, self.cost_scale, "reposition cost"),
            int(_to_int_scaled(self.alpha, self.cost_scale, "alpha")),
        )

    def to_dict(self) -> dict:
        k, i, j = np.nonzero(self.c)
        return {
            "n": self.n,
            "grid": self.grid.to_dict(),
            "d": self.d.tolist(),
            "r": self.r.tolist(),
            "c": [[int(a), int(b), int(e), float(self.c[a, b, e])] for a, b, e in zip(k, i, j)],
            "K": self.K,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DispatchProblem":
        grid = HexGrid.from_dict(data["grid"])
        K, n = data["K"], data["n"]
        c = np.zeros((K, n, n))
        for k, i, j, v in data.get("c", []):
            c[k, i, j] = v
        return cls(grid, data["d"], data["r"], c, data.get("alpha", DEFAULT_ALPHA))


@dataclass
class DispatchSolution:
    """Integer plan ``x[k, i, j]`` with the drivers ``d`` and serves ``served`` it implies."""

    x: np.ndarray
    served: np.ndarray
    drivers: np.ndarray
    objective_plus: int
    objective_minus: float

    @property
    def x_first(self) -> np.ndarray:
        return self.x[0]

    def to_dict(self) -> dict:
        k, i, j = np.nonzero(self.x)
        return {
            "x": [[int(a), int(b), int(e), int(self.x[a, b, e])] for a, b, e in zip(k, i, j)],
            "served": self.served.tolist(),
            "objective_plus": int(self.objective_plus),
            "objective_minus": float(self.objective_minus),
        }


def save_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass
class TimeExpandedNetwork:
    network: FlowNetwork
    n: int
    K: int
    source_edges: np.ndarray  # (n,) edge index of S -> V[i, 0]
    sink_edges: np.ndarray  # (K, n) edge index of W[i, k] -> T
    carry_edges: np.ndarray  # (K - 1, n) edge index of W[i, k] -> V[i, k+1]
    move_edges: dict  # edge index -> (i, j, k)

    def V(self, i: int, k: int) -> int:
        return 2 + 2 * self.n * k + i

    def W(self, i: int, k: int) -> int:
        return 2 + 2 * self.n * k + self.n + i

    def vertex_label(self, v: int) -> str:
        if v == 0:
            return "S"
        if v == 1:
            return "T"
        k, rem = divmod(v - 2, 2 * self.n)
        kind, i = divmod(rem, self.n)
        return f"{'VW'[kind]}{i}_{k}"


def build_horizon_network(p: DispatchProblem) -> TimeExpandedNetwork:
    n, K = p.n, p.K
    c_int, alpha_int = p.scaled_costs()
    nbrs = p.grid.neighbor_lists()
    tmp = TimeExpandedNetwork(None, n, K, None, None, None, {})
    net = FlowNetwork(2 + 2 * n * K, 0, 1)
    source_edges = np.empty(n, dtype=np.int64)
    sink_edges = np.empty((K, n), dtype=np.int64)
    carry_edges = np.empty((max(K - 1, 0), n), dtype=np.int64)
    move_edges = {}
    for i in range(n):
        source_edges[i] = net.add_edge(0, tmp.V(i, 0), int(p.d[i]), 0)
    for k in range(K):
        for i in range(n):
            vi = tmp.V(i, k)
            for j in nbrs[i]:
                e = net.add_edge(vi, tmp.W(j, k), UNBOUNDED, int(c_int[k, i, j]))
                move_edges[e] = (i, j, k)
        for i in range(n):
            if k < K - 1:
                carry_edges[k, i] = net.add_edge(tmp.W(i, k), tmp.V(i, k + 1), UNBOUNDED, 0)
            sink_edges[k, i] = net.add_edge(tmp.W(i, k), 1, int(p.r[k, i]), alpha_int * k)
    net.labels = [tmp.vertex_label(v) for v in range(net.num_vertices)]
    return TimeExpandedNetwork(net, n, K, source_edges, sink_edges, carry_edges, move_edges)


def build_single_step_network(p: DispatchProblem) -> TimeExpandedNetwork:
    """The ``K = 1`` network: sources ``d``, moves along ``L``, sinks ``r``."""
    if p.K != 1:
        raise ValueError(f"single-step network needs K = 1, got K = {p.K}")
    return build_horizon_network(p)


def evaluate_plan(p: DispatchProblem, x: np.ndarray) -> DispatchSolution:
    """Roll a plan ``x[k, i, j]`` forward through the driver dynamics.

    Checks adjacency, sign and mass constraints at every step and raises
    ``ConstraintViolation`` naming the first offending cell.
    """
    n, K = p.n, p.K
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (K, n, n):
        raise ValueError(f"x must have shape ({K}, {n}, {n}), got {x.shape}")
    L = adjacency(p.grid).astype(bool)
    if (x < 0).any():
        raise ConstraintViolation("negative entries in x")
    if (x[:, ~L] != 0).any():
        k, i, j = np.argwhere(x * ~L[None])[0]
        raise ConstraintViolation(f"move {i}->{j} at step {k} between non-adjacent cells")
    drivers = np.zeros((K, n), dtype=np.int64)
    served = np.zeros((K, n), dtype=np.int64)
    d = p.d.copy()
    for k in range(K):
        drivers[k] = d
        out = x[k].sum(axis=1)
        bad = np.nonzero(out > d)[0]
        if bad.size:
            i = int(bad[0])
            raise ConstraintViolation(f"cell {i} sends {out[i]} drivers at step {k} but has {d[i]}")
        present = d + x[k].sum(axis=0) - out
        served[k] = np.minimum(present, p.r[k])
        d = present - served[k]
    c = p.c
    cost = float((c * x).sum())
    delay = float(p.alpha * (np.arange(K)[:, None] * served).sum())
    return DispatchSolution(x, served, drivers, int(served.sum()), cost + delay)


def solve_mcmf_dispatch(p: DispatchProblem) -> DispatchSolution:
    """Optimal dispatch from min-cost max-flow on the time-expanded network.

    Drivers the flow leaves at the source stay put for the whole horizon and
    are booked on the self-move ``x[k, i, i]``.
    """
    ten = build_horizon_network(p)
    res = mcmf(ten.network)
    flow = np.asarray(res.flow, dtype=np.int64)
    n, K = p.n, p.K
    x = np.zeros((K, n, n), dtype=np.int64)
    for e, (i, j, k) in ten.move_edges.items():
        x[k, i, j] = flow[e]
    idle = p.d - flow[ten.source_edges]
    for k in range(K):
        x[k, np.arange(n), np.arange(n)] += idle
    sol = evaluate_plan(p, x)
    z = flow[ten.sink_edges]
    if not np.array_equal(z, sol.served):
        raise AssertionError("flow-served counts disagree with the driver dynamics")
    if res.total_flow != sol.objective_plus:
        raise AssertionError("total flow disagrees with the served count")
    return sol


def first_step_served(p: DispatchProblem, sol: DispatchSolution) -> int:
    """Requests served at the current step by the plan's first move matrix."""
    x0 = sol.x[0]
    total = 0
    inflow = x0.sum(axis=0)
    outflow = x0.sum(axis=1)
    for i in range(p.n):
        total += served_count(int(p.d[i]), int(inflow[i]), int(outflow[i]), int(p.r[0, i]))
    return total
