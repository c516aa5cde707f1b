"""One synthetic day under every policy, printed as a small table.

    python demos/compare_policies.py [seed]
"""

import sys

from fleetflow.baselines import make_proportional_policy, make_random_move_policy
from fleetflow.experiment import FlowOptPolicy
from fleetflow.oracle import replay_policy, solve_oracle
from fleetflow.scenarios import Hotspot, ScenarioGenSpec, generate_scenario
from fleetflow.simulator import run_day

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
spec = ScenarioGenSpec(
    radius=3,
    T=48,
    base_rate=0.08,
    profile="commute",
    hotspots=[Hotspot(2, -1, 5.0, 1), Hotspot(-2, 2, 3.0, 1)],
    max_trip=3,
    num_drivers=60,
    kappa=0.1,
)
scn = generate_scenario(spec, seed)
print(f"{scn.n} cells, {scn.T} steps, {len(scn.requests)} requests, {int(scn.initial_drivers.sum())} drivers")

plan = solve_oracle(scn)
oracle_policy, oracle_matcher = replay_policy(plan)
runs = {
    "oracle": (oracle_policy, oracle_matcher),
    "flowopt (K=8)": (FlowOptPolicy(scn, 8, solver="mcmf"), None),
    "prop-to-demand": (make_proportional_policy(scn.grid), None),
    "random-move": (make_random_move_policy(scn.grid), None),
}
print(f"{'policy':<16}{'served':>8}{'gmv':>10}{'cost':>9}{'rel. profit':>13}")
for name, (policy, matcher) in runs.items():
    m = run_day(scn, policy, seed, matcher)
    print(f"{name:<16}{m.served_count:>8}{m.gmv:>10.1f}{m.reposition_cost:>9.1f}{m.relative_profit:>13.4f}")
