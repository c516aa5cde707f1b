"""Wall-clock of one dispatch solve, MCMF vs the bundled simplex, as the horizon grows.

    python demos/solver_timing.py [radius]
"""

import sys
import time

import numpy as np

from fleetflow.dispatch import DispatchProblem, solve_mcmf_dispatch
from fleetflow.grid import adjacency, build_hex_grid
from fleetflow.lp import solve_lp_dispatch_detailed

radius = int(sys.argv[1]) if len(sys.argv) > 1 else 4
g = build_hex_grid(radius)
rng = np.random.default_rng(16)
c = 0.5 * (adjacency(g) - np.eye(g.n))
d, r = rng.integers(0, 6, g.n), rng.integers(0, 6, g.n)


def best(fn, repeats=3):
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        res = fn()
        out.append(time.perf_counter() - t0)
    return min(out), res


print(f"n = {g.n} cells")
print(f"{'K':>3}{'mcmf s':>9}{'lp s':>9}{'lp/mcmf':>9}{'pivots':>8}")
for K in (1, 2, 4, 8, 16):
    p = DispatchProblem.observed(g, d, r, c, K)
    t_m, sol_m = best(lambda: solve_mcmf_dispatch(p))
    t_l, (sol_l, _, basic, _) = best(lambda: solve_lp_dispatch_detailed(p))
    assert sol_m.objective_plus == sol_l.objective_plus
    print(f"{K:>3}{t_m:>9.3f}{t_l:>9.3f}{t_l / t_m:>9.2f}{basic.iterations:>8}")
