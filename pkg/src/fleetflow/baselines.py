"""Rule-based dispatch: proportional-to-demand and random-move.

Both send ``floor(w[i, j] * d_i)`` drivers from cell ``i`` to each
neighbour ``j`` and leave the remainder in place, so they are feasible and
integral by construction.  Floors are taken in exact integer arithmetic.
"""

from __future__ import annotations

import numpy as np

from .grid import HexGrid


def baseline_weights(grid: HexGrid, r_t=None) -> dict[int, dict[int, float]]:
    """``w[i][j]`` over the proper neighbours ``j`` of each cell ``i``.

    With ``r_t`` the weights are ``r_j / (r_i + sum_k r_k)`` over the
    neighbourhood of ``i``; without it they are ``1 / (l + 1)`` with ``l``
    the neighbour count.  A zero denominator gives all-zero weights.
    """
    out = {}
    for i, nb in enumerate(grid.neighbor_lists()):
        others = [j for j in nb if j != i]
        if r_t is None:
            out[i] = {j: 1.0 / (len(others) + 1) for j in others}
            continue
        denom = float(r_t[i] + sum(r_t[j] for j in others))
        out[i] = {j: (float(r_t[j]) / denom if denom > 0 else 0.0) for j in others}
    return out


def _send(grid: HexGrid, d_t, share) -> np.ndarray:
    n = grid.n
    d_t = np.asarray(d_t, dtype=np.int64)
    x = np.zeros((n, n), dtype=np.int64)
    for i, nb in enumerate(grid.neighbor_lists()):
        sent = 0
        for j in nb:
            if j != i:
                x[i, j] = share(i, j, int(d_t[i]), nb)
                sent += x[i, j]
        x[i, i] = d_t[i] - sent
    return x


def proportional_to_demand(d_t, r_t, grid: HexGrid) -> np.ndarray:
    """Send drivers to neighbours in proportion to their current request counts."""
    r_t = np.asarray(r_t, dtype=np.int64)

    def share(i, j, d_i, nb):
        denom = int(sum(r_t[k] for k in nb))  # r_i plus every neighbour
        if denom == 0:
            return 0
        return (int(r_t[j]) * d_i) // denom

    return _send(grid, d_t, share)


def random_move(d_t, grid: HexGrid) -> np.ndarray:
    """Spread ``floor(d_i / (l + 1))`` drivers to each of the ``l`` neighbours.

    Deterministic despite the name: this is the equal-weight rule.
    """

    def share(i, j, d_i, nb):
        return d_i // len(nb)

    return _send(grid, d_t, share)


def make_proportional_policy(grid: HexGrid):
    def policy(d_t, r_t, t):
        return proportional_to_demand(d_t, r_t, grid)

    return policy


def make_random_move_policy(grid: HexGrid):
    def policy(d_t, r_t, t):
        return random_move(d_t, grid)

    return policy
