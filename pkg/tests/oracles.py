"""Exhaustive reference solvers for tiny instances, used as test oracles."""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from fleetflow.simulator import arrival_step


def _splits(total, slots):
    """Every way of sending at most ``total`` drivers into ``slots`` destinations."""
    if slots == 0:
        yield ()
        return
    for first in range(total + 1):
        for rest in _splits(total - first, slots - 1):
            yield (first,) + rest


def _move_options(grid, d):
    """All move matrices (stays implicit) out of the per-cell counts ``d``."""
    n = grid.n
    nbrs = grid.neighbor_lists()
    per_cell = []
    for i in range(n):
        others = [j for j in nbrs[i] if j != i]
        per_cell.append([(i, others, s) for s in _splits(int(d[i]), len(others))])
    for combo in itertools.product(*per_cell):
        x = np.zeros((n, n), dtype=np.int64)
        for i, others, s in combo:
            for j, v in zip(others, s):
                x[i, j] = v
        yield x


def brute_force_dispatch(p):
    """Lexicographic optimum ``(max f_plus, min f_minus)`` over every integer plan.

    ``f_minus`` is returned in the integer units of the flow network
    (costs and alpha scaled by ``p.cost_scale``).
    """
    c_int, alpha_int = p.scaled_costs()
    K = p.K

    @lru_cache(maxsize=None)
    def best(k, d):
        if k == K:
            return (0, 0)
        d = np.array(d, dtype=np.int64)
        top = None
        for x in _move_options(p.grid, d):
            present = d + x.sum(axis=0) - x.sum(axis=1)
            g = np.minimum(present, p.r[k])
            sub = best(k + 1, tuple((present - g).tolist()))
            served = int(g.sum())
            cand = (served + sub[0], int((c_int[k] * x).sum()) + alpha_int * k * served + sub[1])
            if top is None or cand[0] > top[0] or (cand[0] == top[0] and cand[1] < top[1]):
                top = cand
        return top

    return best(0, tuple(p.d.tolist()))


def brute_force_oracle(scenario) -> float:
    """Best ``gmv - reposition cost`` over every acceptance set, each with its cheapest feasible moves."""
    T, n = scenario.T, scenario.n
    cost = scenario.cost_matrix()
    reqs = scenario.requests
    best_total = -math.inf
    for mask in itertools.product((0, 1), repeat=len(reqs)):
        need = np.zeros((T, n), dtype=np.int64)
        back = np.zeros((T + 1, n), dtype=np.int64)
        for q, b in zip(reqs, mask):
            if b:
                need[q.start, q.dep] += 1
                arr = arrival_step(q)
                if arr < T:
                    back[arr, q.dest] += 1

        @lru_cache(maxsize=None)
        def cheapest(t, idle):
            if t == T:
                return 0.0
            idle = np.array(idle, dtype=np.int64)
            out = math.inf
            for x in _move_options(scenario.grid, idle):
                present = idle + x.sum(axis=0) - x.sum(axis=1)
                if (present < need[t]).any():
                    continue
                step_cost = math.fsum(float(cost[i, j]) * int(x[i, j]) for i, j in zip(*np.nonzero(x)))
                nxt = present - need[t] + back[t + 1]
                out = min(out, step_cost + cheapest(t + 1, tuple(nxt.tolist())))
            return out

        c = cheapest(0, tuple(scenario.initial_drivers.tolist()))
        if c < math.inf:
            gmv = math.fsum(q.price for q, b in zip(reqs, mask) if b)
            best_total = max(best_total, gmv - c)
    return best_total
