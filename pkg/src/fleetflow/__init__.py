"""Receding-horizon fleet dispatch by min-cost max-flow and an equivalent LP."""

from .dispatch import DispatchProblem, DispatchSolution, solve_mcmf_dispatch
from .grid import HexGrid, adjacency, build_hex_grid, graph_diameter, neighbors
from .lp import gamma_bound, simplex_solve, solve_lp_dispatch
from .oracle import solve_oracle
from .simulator import RideRequest, Scenario, run_day

__all__ = [
    "DispatchProblem",
    "DispatchSolution",
    "HexGrid",
    "RideRequest",
    "Scenario",
    "adjacency",
    "build_hex_grid",
    "gamma_bound",
    "graph_diameter",
    "neighbors",
    "run_day",
    "simplex_solve",
    "solve_lp_dispatch",
    "solve_mcmf_dispatch",
    "solve_oracle",
]
