import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fleetflow.dispatch import (
    ConstraintViolation,
    DispatchProblem,
    build_horizon_network,
    build_single_step_network,
    evaluate_plan,
    first_step_served,
    hold_demand,
    served_count,
    solve_mcmf_dispatch,
)
from fleetflow.flownet import UNBOUNDED, mcmf
from fleetflow.grid import AXIAL_DIRECTIONS, HexGrid, adjacency, build_hex_grid

from oracles import brute_force_dispatch

LINE = HexGrid([(0, 0), (1, 0)])
SINGLE = build_hex_grid(0)


def fig2_grid():
    return HexGrid(list(AXIAL_DIRECTIONS) + [(0, 0)])


# served_count and hold_demand ---------------------------------------------------


@pytest.mark.parametrize("args,want", [((5, 0, 0, 3), 3), ((2, 1, 0, 9), 3), ((0, 0, 0, 0), 0)])
def test_served_count_examples(args, want):
    assert served_count(*args) == want


def test_served_count_negative_supply():
    with pytest.raises(ConstraintViolation):
        served_count(1, 0, 2, 5)


def test_hold_demand_examples():
    assert hold_demand([1, 2], 1).tolist() == [[1, 2]]
    assert hold_demand([1, 2], 3).tolist() == [[1, 2]] * 3
    assert hold_demand([0, 0, 0], 5).tolist() == [[0, 0, 0]] * 5
    with pytest.raises(ValueError):
        hold_demand([1], 0)


# network construction -----------------------------------------------------------


def test_fig2_single_step_network_layout():
    g = fig2_grid()
    L = adjacency(g)
    p = DispatchProblem(g, [1] * 7, [1] * 7)
    ten = build_single_step_network(p)
    net = ten.network
    assert net.num_vertices == 16
    assert sorted(net.labels) == sorted(["S", "T"] + [f"V{i}_0" for i in range(7)] + [f"W{i}_0" for i in range(7)])
    pairs = {(i, j) for (i, j, k) in ten.move_edges.values()}
    assert pairs == {(i, j) for i in range(7) for j in range(7) if L[i, j]}
    assert len(pairs) == 31
    for e in ten.move_edges:
        assert net.edges[e].capacity is UNBOUNDED
    for i in range(7):
        src = net.edges[ten.source_edges[i]]
        snk = net.edges[ten.sink_edges[0, i]]
        assert (src.u, src.v, src.capacity, src.cost) == (0, ten.V(i, 0), 1, 0)
        assert (snk.u, snk.v, snk.capacity, snk.cost) == (ten.W(i, 0), 1, 1, 0)


def test_single_step_requires_k1():
    p = DispatchProblem(SINGLE, [1], [[1], [1]])
    with pytest.raises(ValueError, match="K = 1"):
        build_single_step_network(p)


def test_horizon_network_edges():
    g = build_hex_grid(1)
    p = DispatchProblem(g, [1] * 7, hold_demand([2] * 7, 3), alpha=100)
    ten = build_horizon_network(p)
    net = ten.network
    assert net.num_vertices == 2 + 2 * 7 * 3
    assert ten.carry_edges.shape == (2, 7)
    for k in range(3):
        for i in range(7):
            e = net.edges[ten.sink_edges[k, i]]
            assert e.cost == 100 * 100 * k and e.capacity == 2
    for k in range(2):
        for i in range(7):
            e = net.edges[ten.carry_edges[k, i]]
            assert (e.u, e.v, e.cost) == (ten.W(i, k), ten.V(i, k + 1), 0)
    ids = [ten.V(i, k) for i in range(7) for k in range(3)] + [ten.W(i, k) for i in range(7) for k in range(3)]
    assert sorted(ids) == list(range(2, net.num_vertices))


def test_k1_horizon_equals_single_step():
    g = build_hex_grid(1)
    rng = np.random.default_rng(3)
    c = rng.integers(0, 4, (7, 7)) * adjacency(g)
    np.fill_diagonal(c, 0)
    p = DispatchProblem(g, rng.integers(0, 4, 7), rng.integers(0, 4, (1, 7)), c)
    a = mcmf(build_horizon_network(p).network)
    b = mcmf(build_single_step_network(p).network)
    assert (a.total_flow, a.total_cost) == (b.total_flow, b.total_cost)


# solve examples -------------------------------------------------------------------


def test_single_cell_single_request():
    sol = solve_mcmf_dispatch(DispatchProblem(SINGLE, [2], [1]))
    assert sol.objective_plus == 1


def test_line_moves_drivers_to_demand():
    sol = solve_mcmf_dispatch(DispatchProblem(LINE, [3, 0], [0, 2]))
    assert sol.objective_plus == 2
    assert sol.x_first[0, 1] == 2
    assert sol.x_first[0, 0] == 1  # the unused driver stays


def test_horizon_serves_early():
    p = DispatchProblem(SINGLE, [1], hold_demand([1], 2))
    sol = solve_mcmf_dispatch(p)
    assert sol.served.tolist() == [[1], [0]]
    assert sol.objective_minus == 0


def test_horizon_moves_to_serve_now():
    c = np.array([[0, 2.5], [2.5, 0]])
    p = DispatchProblem(LINE, [1, 0], hold_demand([0, 1], 2), c, alpha=100)
    sol = solve_mcmf_dispatch(p)
    assert sol.x[0, 0, 1] == 1
    assert sol.served.tolist() == [[0, 1], [0, 0]]
    assert sol.objective_minus == pytest.approx(2.5)
    assert (sol.objective_plus, round(sol.objective_minus * 100)) == brute_force_dispatch(p)


def test_no_drivers():
    g = build_hex_grid(1)
    sol = solve_mcmf_dispatch(DispatchProblem(g, [0] * 7, [3] * 7))
    assert not sol.x.any() and not sol.served.any()


def test_single_cell_demand_limited():
    sol = solve_mcmf_dispatch(DispatchProblem(SINGLE, [3], [2]))
    assert sol.served.sum() == 2


def test_first_step_served_examples():
    g = build_hex_grid(1)
    p0 = DispatchProblem(g, [2] * 7, [0] * 7)
    assert first_step_served(p0, solve_mcmf_dispatch(p0)) == 0
    p1 = DispatchProblem(g, [2, 0, 0, 1, 0, 0, 0], [0, 1, 1, 0, 0, 3, 1])
    sol = solve_mcmf_dispatch(p1)
    assert first_step_served(p1, sol) == sol.objective_plus == 3


# validation and serialization ---------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs,msg",
    [
        (dict(d=[1, 2, 3], r=[0, 0]), "d must"),
        (dict(d=[1, 1], r=[[0, 0, 0]]), "r must"),
        (dict(d=[-1, 1], r=[0, 0]), "nonnegative"),
        (dict(d=[1, 1], r=[0, -2]), "nonnegative"),
        (dict(d=[1, 1], r=[0, 0], c=[[0, -1], [1, 0]]), "finite and nonnegative"),
        (dict(d=[1, 1], r=[0, 0], c=[[0, np.inf], [1, 0]]), "finite and nonnegative"),
        (dict(d=[1, 1], r=[0, 0], c=[[1, 1], [1, 0]]), "staying"),
        (dict(d=[1, 1], r=[0, 0], alpha=0), "alpha"),
        (dict(d=[1, 1], r=[0, 0], c=np.zeros((3, 3))), "c must"),
    ],
)
def test_problem_validation(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        DispatchProblem(LINE, **kwargs)


def test_costs_off_adjacency_ignored():
    g = HexGrid([(0, 0), (5, 0)])
    p = DispatchProblem(g, [1, 0], [0, 1], [[0, 7.0], [7.0, 0]])
    assert not p.c.any()
    assert solve_mcmf_dispatch(p).objective_plus == 0


def test_fractional_cost_cannot_scale():
    p = DispatchProblem(LINE, [1, 0], [0, 1], [[0, 0.125], [0.125, 0]])
    with pytest.raises(ValueError, match="integral"):
        p.scaled_costs()


def test_problem_json_roundtrip():
    g = build_hex_grid(1)
    c = adjacency(g) * 1.5
    np.fill_diagonal(c, 0)
    p = DispatchProblem(g, [1, 2, 0, 0, 3, 0, 1], hold_demand([0, 1, 2, 0, 0, 1, 0], 2), c, alpha=50)
    q = DispatchProblem.from_dict(json.loads(json.dumps(p.to_dict())))
    assert np.array_equal(p.d, q.d) and np.array_equal(p.r, q.r) and np.array_equal(p.c, q.c)
    assert q.alpha == 50 and q.K == 2
    out = json.loads(json.dumps(solve_mcmf_dispatch(p).to_dict()))
    assert set(out) == {"x", "served", "objective_plus", "objective_minus"}


def test_evaluate_plan_rejects_bad_plans():
    g = HexGrid([(0, 0), (1, 0), (3, 0)])
    p = DispatchProblem(g, [1, 0, 0], [0, 0, 0])
    x = np.zeros((1, 3, 3), dtype=int)
    x[0, 0, 2] = 1
    with pytest.raises(ConstraintViolation, match="non-adjacent"):
        evaluate_plan(p, x)
    x = np.zeros((1, 3, 3), dtype=int)
    x[0, 0, 1] = 2
    with pytest.raises(ConstraintViolation, match="cell 0"):
        evaluate_plan(p, x)
    with pytest.raises(ConstraintViolation):
        evaluate_plan(p, -np.eye(3, dtype=int)[None])


# properties ------------------------------------------------------------------------------


def tiny_grids():
    return st.sampled_from(
        [SINGLE, LINE, HexGrid([(0, 0), (1, 0), (0, 1)]), HexGrid([(0, 0), (1, 0), (2, 0)])]
    )


@st.composite
def tiny_problems(draw):
    g = draw(tiny_grids())
    n = g.n
    K = draw(st.integers(1, 2))
    d = draw(st.lists(st.integers(0, 2), min_size=n, max_size=n))
    r = draw(st.lists(st.lists(st.integers(0, 2), min_size=n, max_size=n), min_size=K, max_size=K))
    cvals = draw(st.lists(st.integers(0, 6), min_size=n * n, max_size=n * n))
    c = np.array(cvals, dtype=float).reshape(n, n) * 0.5
    np.fill_diagonal(c, 0)
    alpha = draw(st.sampled_from([0.5, 3, 100]))
    return DispatchProblem(g, d, r, c, alpha)


@st.composite
def random_problems(draw, max_n=9, max_k=4, max_entry=5, zero_cost=False):
    R = draw(st.integers(0, 1))
    g = build_hex_grid(R)
    coords = draw(st.lists(st.sampled_from(g.coords), unique=True, min_size=1, max_size=min(max_n, g.n)))
    g = HexGrid(coords)
    n = g.n
    K = draw(st.integers(1, max_k))
    ints = lambda size: st.lists(st.integers(0, max_entry), min_size=size, max_size=size)
    d = draw(ints(n))
    r_t = draw(ints(n))
    if zero_cost:
        c = None
    else:
        c = np.array(draw(ints(n * n)), dtype=float).reshape(n, n)
        np.fill_diagonal(c, 0)
    return DispatchProblem.observed(g, d, r_t, c, K, alpha=draw(st.sampled_from([1, 100])))


def check_solution(p, sol):
    assert sol.x.dtype.kind == "i" and (sol.x >= 0).all()
    L = adjacency(p.grid).astype(bool)
    assert not sol.x[:, ~L].any()
    again = evaluate_plan(p, sol.x)
    assert np.array_equal(again.served, sol.served)
    assert np.array_equal(sol.x.sum(axis=2), sol.drivers)  # stays make outflow equal supply
    assert sol.objective_plus == int(sol.served.sum())


@settings(max_examples=200, deadline=None)
@given(tiny_problems())
def test_matches_brute_force(p):
    sol = solve_mcmf_dispatch(p)
    check_solution(p, sol)
    assert (sol.objective_plus, round(sol.objective_minus * p.cost_scale)) == brute_force_dispatch(p)


@settings(max_examples=200, deadline=None)
@given(random_problems(zero_cost=True))
def test_time_greedy_with_free_moves(p):
    sol = solve_mcmf_dispatch(p)
    one = solve_mcmf_dispatch(DispatchProblem(p.grid, p.d, p.r[:1], None, p.alpha))
    assert first_step_served(p, sol) == one.objective_plus


@settings(max_examples=100, deadline=None)
@given(random_problems())
def test_solution_feasible_and_mass_balanced(p):
    ten = build_horizon_network(p)
    res = mcmf(ten.network)
    sol = solve_mcmf_dispatch(p)
    check_solution(p, sol)
    sink_flow = sum(res.flow[e] for e in ten.sink_edges.ravel())
    assert sink_flow == res.total_flow == sol.served.sum()


@settings(max_examples=60, deadline=None)
@given(random_problems(max_k=1))
def test_k1_objective_equals_first_step(p):
    sol = solve_mcmf_dispatch(p)
    assert first_step_served(p, sol) == sol.objective_plus
