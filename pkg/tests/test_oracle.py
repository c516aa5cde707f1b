import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetflow.baselines import make_proportional_policy, make_random_move_policy
from fleetflow.experiment import FlowOptPolicy
from fleetflow.grid import HexGrid, build_hex_grid
from fleetflow.oracle import (
    OraclePlan,
    RequestIndexSets,
    build_oracle_lp,
    plan_objective,
    replay_policy,
    solve_oracle,
)
from fleetflow.simulator import RideRequest, Scenario, arrival_step, run_day, stay_policy

from oracles import brute_force_oracle

SINGLE = build_hex_grid(0)
LINE = HexGrid([(0, 0), (1, 0)])
TINY_GRIDS = [SINGLE, LINE, HexGrid([(0, 0), (1, 0), (0, 1)]), HexGrid([(0, 0), (1, 0), (2, 0)])]


def replay(scn, plan, seed=0):
    pol, mat = replay_policy(plan)
    return run_day(scn, pol, seed, mat)


def test_empty_scenario():
    scn = Scenario(build_hex_grid(1), 4, [], [1] * 7)
    plan = solve_oracle(scn)
    assert plan.b.size == 0 and plan.objective == 0 and len(plan.accepted) == 0
    assert replay(scn, plan).profit == 0
    assert solve_oracle(Scenario(SINGLE, 2, [], [0])).objective == 0


def test_overlapping_requests_pick_expensive():
    scn = Scenario(SINGLE, 2, [RideRequest(0, 0, 0, 1, 5.0), RideRequest(0, 0, 0, 1, 3.0)], [1])
    plan = solve_oracle(scn)
    assert plan.b.tolist() == [1, 0] and plan.objective == 5.0


def test_cheap_ride_positions_driver_for_expensive_one():
    # 0 -> 1 for 1.0, then 1 -> 1 for 10.0 one step later.
    reqs = [RideRequest(0, 1, 0, 1, 1.0), RideRequest(1, 1, 1, 2, 10.0)]
    scn = Scenario(LINE, 3, reqs, [1, 0], kappa=2.0)
    plan = solve_oracle(scn)
    assert plan.b.tolist() == [1, 1] and plan.objective == 11.0
    assert brute_force_oracle(scn) == 11.0
    # A policy that never moves and a driver in the wrong place misses the late ride.
    late = Scenario(LINE, 3, [RideRequest(1, 1, 1, 2, 10.0)], [1, 0], kappa=2.0)
    assert solve_oracle(late).objective == 8.0
    assert run_day(late, stay_policy).gmv == 0


def test_rejects_online_offline():
    scn = Scenario(SINGLE, 2, [], [1], allow_online_offline=True)
    with pytest.raises(ValueError, match="online or offline"):
        build_oracle_lp(scn)


def test_index_sets():
    reqs = [RideRequest(0, 1, 0, 2, 1.0), RideRequest(1, 0, 1, 1, 1.0), RideRequest(0, 0, 2, 9, 1.0)]
    scn = Scenario(LINE, 3, reqs, [1, 1])
    sets = RequestIndexSets.from_scenario(scn)
    assert sets.dep == {(0, 0): [0], (1, 1): [1], (0, 2): [2]}
    assert sets.dest == {(1, 2): [0], (0, 2): [1]}  # request 2 comes back after the day ends
    r = scn.demand_counts()
    for (i, t), ids in sets.dep.items():
        assert len(ids) == r[t, i]


def test_lp_rows_shape():
    reqs = [RideRequest(0, 1, 0, 1, 2.0)]
    lp, vmap = build_oracle_lp(Scenario(LINE, 2, reqs, [1, 0]))
    assert vmap.b.tolist() == [0]
    assert len(vmap.x) == 2 * 2  # both directions, both steps
    assert lp.num_rows == 2 * 2 + 2 + 2 * 2  # balance, arrival (t = 1), mass


def test_plan_roundtrip(tmp_path):
    rs = np.random.default_rng(2)
    g = build_hex_grid(1)
    reqs = [RideRequest(int(rs.integers(7)), int(rs.integers(7)), t % 6, t % 6 + 1, float(rs.integers(1, 9))) for t in range(12)]
    scn = Scenario(g, 6, reqs, [1, 0, 0, 2, 0, 0, 0], 0.5)
    plan = solve_oracle(scn)
    plan.save(tmp_path / "plan.json")
    back = OraclePlan.load(tmp_path / "plan.json")
    assert back.accepted == plan.accepted and np.array_equal(back.x, plan.x)
    assert back.objective == plan.objective
    assert replay(scn, back).profit == plan.objective


@st.composite
def tiny_scenarios(draw, max_requests=5, max_T=3):
    g = draw(st.sampled_from(TINY_GRIDS))
    n = g.n
    T = draw(st.integers(1, max_T))
    reqs = []
    for _ in range(draw(st.integers(0, max_requests))):
        start = draw(st.integers(0, T - 1))
        reqs.append(
            RideRequest(
                draw(st.integers(0, n - 1)),
                draw(st.integers(0, n - 1)),
                start,
                start + draw(st.integers(0, 2)),
                float(draw(st.integers(0, 12))),
            )
        )
    drivers = draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    return Scenario(g, T, reqs, drivers, draw(st.sampled_from([0.0, 1.0, 2.5])))


def check_plan(scn, plan):
    assert set(np.unique(plan.b)) <= {0, 1}
    assert (plan.x >= 0).all() and (plan.s >= 0).all()
    assert plan.objective == pytest.approx(plan.lp_objective, abs=1e-9)
    assert plan.objective == plan_objective(scn, plan.b, plan.x)
    m = replay(scn, plan)
    assert m.profit == plan.objective
    assert sorted(i for rep in m.steps for i in rep.served_ids) == sorted(plan.accepted)


@settings(max_examples=150, deadline=None)
@given(tiny_scenarios())
def test_matches_exhaustive_search(scn):
    plan = solve_oracle(scn)
    check_plan(scn, plan)
    assert plan.objective == pytest.approx(brute_force_oracle(scn), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(tiny_scenarios(max_requests=12, max_T=6), st.integers(0, 100))
def test_dominates_every_policy(scn, seed):
    plan = solve_oracle(scn)
    check_plan(scn, plan)
    policies = [
        stay_policy,
        make_random_move_policy(scn.grid),
        make_proportional_policy(scn.grid),
        FlowOptPolicy(scn, 3, solver="mcmf"),
    ]
    for pol in policies:
        assert plan.objective >= run_day(scn, pol, seed).profit - 1e-9


@settings(max_examples=60, deadline=None)
@given(tiny_scenarios(max_requests=6), st.data())
def test_extra_driver_never_lowers_gmv(scn, data):
    cell = data.draw(st.integers(0, scn.n - 1))
    more = scn.initial_drivers.copy()
    more[cell] += 1
    bigger = Scenario(scn.grid, scn.T, scn.requests, more, scn.kappa)
    assert solve_oracle(bigger).objective >= solve_oracle(scn).objective - 1e-9


def test_arrival_rows_use_arrival_step():
    # A zero-duration ride still takes its driver away for one step.
    reqs = [RideRequest(0, 0, 0, 0, 4.0), RideRequest(0, 0, 1, 1, 4.0)]
    scn = Scenario(SINGLE, 2, reqs, [1])
    assert arrival_step(reqs[0]) == 1
    assert solve_oracle(scn).objective == 8.0
