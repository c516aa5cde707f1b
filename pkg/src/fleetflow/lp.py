"""Linear programs, a bounded primal simplex, and the scalarized dispatch LP.

The solver is a revised primal simplex over ``A x (<=, =) b``,
``0 <= x <= u``.  The basis is held as a sparse LU factorization
(``scipy.sparse.linalg.splu``) plus a product-form eta file that is folded
back in every ``refactor_every`` pivots.  Pricing is Dantzig's largest
reduced cost; after a run of degenerate pivots the solver switches to
Bland's smallest-index rule until the objective moves again, which rules
out cycling.  Every answer is a basic (vertex) solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .dispatch import DispatchProblem, DispatchSolution, evaluate_plan

PIVOT_TOL = 1e-9
INTEGRALITY_TOL = 1e-7
DEFAULT_GAMMA = 1e-5

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LPError(RuntimeError):
    """Numerical failure inside the simplex (singular basis, iteration cap)."""


class NonIntegralSolution(AssertionError):
    """A network-structured LP produced a fractional vertex."""


@dataclass(frozen=True)
class LinearProgram:
    """``maximize c @ x`` subject to ``A x (sense) b`` and ``0 <= x <= upper``.

    ``sense[i]`` is ``"L"`` (<=), ``"E"`` (=) or ``"G"`` (>=).
    """

    c: np.ndarray
    A: sp.csr_matrix
    sense: tuple[str, ...]
    b: np.ndarray
    upper: np.ndarray
    var_names: tuple[str, ...] | None = None
    row_names: tuple[str, ...] | None = None

    def __post_init__(self):
        m, n = self.A.shape
        if self.c.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("objective/upper-bound length does not match A")
        if self.b.shape != (m,) or len(self.sense) != m:
            raise ValueError("rhs/sense length does not match A")
        if not np.isfinite(self.b).all():
            raise ValueError("right-hand sides must be finite")
        if set(self.sense) - {"L", "E", "G"}:
            raise ValueError(f"unknown row sense in {set(self.sense)}")

    @property
    def num_vars(self) -> int:
        return self.A.shape[1]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def objective(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float))

    def is_feasible(self, x, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        if (x < -tol).any() or (x > self.upper + tol).any():
            return False
        ax = self.A @ x
        s = np.array(self.sense)
        ok_l = ax <= self.b + tol
        ok_g = ax >= self.b - tol
        return bool(np.all(np.where(s == "L", ok_l, np.where(s == "G", ok_g, ok_l & ok_g))))

    def write_mps(self, fh: IO[str], name: str = "LP") -> None:
        """Free-format MPS with an ``OBJSENSE MAX`` section."""
        vn = self.var_names or tuple(f"X{j}" for j in range(self.num_vars))
        rn = self.row_names or tuple(f"R{i}" for i in range(self.num_rows))
        fh.write(f"NAME {name}\nOBJSENSE\n    MAX\nROWS\n N OBJ\n")
        for s, r in zip(self.sense, rn):
            fh.write(f" {s} {r}\n")
        fh.write("COLUMNS\n")
        A = self.A.tocsc()
        for j in range(self.num_vars):
            if self.c[j] != 0:
                fh.write(f"    {vn[j]} OBJ {float(self.c[j])!r}\n")
            for p in range(A.indptr[j], A.indptr[j + 1]):
                fh.write(f"    {vn[j]} {rn[A.indices[p]]} {float(A.data[p])!r}\n")
        fh.write("RHS\n")
        for i, v in enumerate(self.b):
            if v != 0:
                fh.write(f"    RHS {rn[i]} {float(v)!r}\n")
        fh.write("BOUNDS\n")
        for j, u in enumerate(self.upper):
            if np.isfinite(u):
                fh.write(f" UP BND {vn[j]} {float(u)!r}\n")
        fh.write("ENDATA\n")


class LPBuilder:
    """Accumulates named variables and sparse rows, then freezes a ``LinearProgram``."""

    def __init__(self):
        self._c: list[float] = []
        self._upper: list[float] = []
        self._names: list[str] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._sense: list[str] = []
        self._b: list[float] = []
        self._row_names: list[str] = []

    def add_var(self, name: str, obj: float = 0.0, upper: float = math.inf) -> int:
        self._c.append(float(obj))
        self._upper.append(float(upper))
        self._names.append(name)
        return len(self._c) - 1

    def add_row(self, coeffs: dict[int, float], sense: str, rhs: float, name: str = "") -> int:
        i = len(self._b)
        for j, v in coeffs.items():
            if v != 0:
                self._rows.append(i)
                self._cols.append(j)
                self._vals.append(float(v))
        self._sense.append(sense)
        self._b.append(float(rhs))
        self._row_names.append(name or f"R{i}")
        return i

    def build(self) -> LinearProgram:
        m, n = len(self._b), len(self._c)
        A = sp.csr_matrix((self._vals, (self._rows, self._cols)), shape=(m, n))
        A.sum_duplicates()
        return LinearProgram(
            np.array(self._c, dtype=float),
            A,
            tuple(self._sense),
            np.array(self._b, dtype=float),
            np.array(self._upper, dtype=float),
            tuple(self._names),
            tuple(self._row_names),
        )


@dataclass
class BasicSolution:
    status: str
    values: np.ndarray
    objective_value: float
    basis: frozenset = field(default_factory=frozenset)
    iterations: int = 0


class _Factor:
    """LU of the basis matrix plus a product-form eta file."""

    def __init__(self, B: sp.csc_matrix):
        try:
            self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:
            raise LPError(f"singular basis matrix during refactorization: {exc}") from None
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        v = self.lu.solve(a)
        for r, w in self.etas:
            vr = v[r] / w[r]
            v -= w * vr
            v[r] = vr
        return v

    def btran(self, c: np.ndarray) -> np.ndarray:
        u = c.copy()
        for r, w in reversed(self.etas):
            u[r] = u[r] - (w @ u - u[r]) / w[r]
        return self.lu.solve(u, trans="T")

    def push(self, r: int, w: np.ndarray) -> None:
        self.etas.append((r, w))


def _presolve(lp: LinearProgram):
    """Drop variables forced to zero by ``x <= 0`` singleton rows or ``upper == 0``.

    Returns ``(kept_cols, kept_rows)`` or raises ``_Infeasible``.
    """
    A = lp.A.tocsr()
    m, n = A.shape
    fixed = lp.upper <= 0
    row_live = np.ones(m, dtype=bool)
    changed = True
    while changed:
        changed = False
        keep = np.flatnonzero(~fixed)
        Ak = A[:, keep]
        nnz = np.diff(Ak.indptr)
        for i in np.flatnonzero(row_live & (nnz == 1) & (lp.b == 0)):
            s = lp.sense[i]
            start = Ak.indptr[i]
            coef = Ak.data[start]
            if (s == "L" and coef > 0) or (s == "G" and coef < 0) or s == "E":
                col = keep[Ak.indices[start]]
                fixed[col] = True
                row_live[i] = False
                changed = True
        if changed:
            continue
        for i in np.flatnonzero(row_live & (nnz == 0)):
            s, bi = lp.sense[i], lp.b[i]
            if (s == "L" and bi < -1e-12) or (s == "G" and bi > 1e-12) or (s == "E" and abs(bi) > 1e-12):
                raise _Infeasible
            row_live[i] = False
    return np.flatnonzero(~fixed), np.flatnonzero(row_live)


class _Infeasible(Exception):
    pass


def simplex_solve(
    lp: LinearProgram,
    basis: Sequence[int] | None = None,
    *,
    pivot_tol: float = PIVOT_TOL,
    opt_tol: float = 1e-9,
    refactor_every: int = 48,
    degenerate_limit: int = 50,
    max_iter: int | None = None,
    presolve: bool = True,
) -> BasicSolution:
    """Optimal basic feasible solution of ``lp`` or an infeasible/unbounded status.

    ``basis`` optionally names a starting basis: one index per row, where
    ``j < num_vars`` is a structural variable and ``num_vars + i`` is the
    slack of row ``i``.  A starting basis that is singular or infeasible is
    discarded in favour of the slack basis with a phase-one restart, and so
    is one that presolve cannot carry over (a removed variable basic in a
    kept row).
    """
    n0, m0 = lp.num_vars, lp.num_rows
    if presolve:
        try:
            cols, rows = _presolve(lp)
        except _Infeasible:
            return BasicSolution(INFEASIBLE, np.full(n0, np.nan), math.nan)
        A = lp.A[rows][:, cols].tocsc()
        b = lp.b[rows]
        sense = [lp.sense[i] for i in rows]
        c = lp.c[cols]
        upper = lp.upper[cols]
    else:
        cols, rows = np.arange(n0), np.arange(m0)
        A, b, sense, c, upper = lp.A.tocsc(), lp.b, list(lp.sense), lp.c, lp.upper

    flip = np.array([s == "G" for s in sense], dtype=bool)
    if flip.any():
        D = sp.diags(np.where(flip, -1.0, 1.0))
        A = (D @ A).tocsc()
        b = np.where(flip, -b, b)
    m, n = A.shape
    slack_upper = np.array([0.0 if s == "E" else math.inf for s in sense])
    core = _Simplex(
        sp.hstack([A, sp.identity(m, format="csc")], format="csc"),
        b.astype(float),
        np.concatenate([c, np.zeros(m)]),
        np.concatenate([upper, slack_upper]),
        pivot_tol,
        opt_tol,
        refactor_every,
        degenerate_limit,
        max_iter if max_iter is not None else 50 * (m + n) + 1000,
    )
    start = None
    if basis is not None and len(basis) == m0:
        col_pos = np.full(n0, -1, dtype=np.int64)
        col_pos[cols] = np.arange(cols.size)
        row_pos = np.full(m0, -1, dtype=np.int64)
        row_pos[rows] = np.arange(rows.size)
        start = []
        for r in rows:
            j = int(basis[r])
            pos = col_pos[j] if j < n0 else (n + row_pos[j - n0] if row_pos[j - n0] >= 0 else -1)
            if pos < 0:
                start = None
                break
            start.append(pos)
        if start is not None:
            start = np.array(start, dtype=np.int64)
            if len(set(start.tolist())) != m:
                start = None
    status = core.run(start)

    values = np.zeros(n0)
    if status == OPTIMAL:
        values[cols] = core.x[:n]
        obj = float(lp.c @ values)
        bset = set(cols[j] for j in core.basis if j < n)
        bset.update(n0 + rows[j - n] for j in core.basis if n <= j < n + m)
        bset.update(n0 + i for i in np.setdiff1d(np.arange(m0), rows))
        return BasicSolution(OPTIMAL, values, obj, frozenset(int(v) for v in bset), core.iterations)
    return BasicSolution(status, np.full(n0, np.nan), math.nan, frozenset(), core.iterations)


class _Simplex:
    def __init__(self, A, b, cost, upper, pivot_tol, opt_tol, refactor_every, degenerate_limit, max_iter):
        self.A = A  # csc, m x N, last m columns are slacks
        self.AT = A.T.tocsr()
        self.b = b
        self.cost = cost
        self.upper = upper
        self.m, self.N = A.shape
        self.pivot_tol = pivot_tol
        self.opt_tol = opt_tol
        self.refactor_every = refactor_every
        self.degenerate_limit = degenerate_limit
        self.max_iter = max_iter
        self.iterations = 0
        self.degenerate_pivots = 0
        self.bound_flips = 0

    # basis bookkeeping -------------------------------------------------

    def _column(self, j: int) -> np.ndarray:
        a = np.zeros(self.m)
        A = self.A
        lo, hi = A.indptr[j], A.indptr[j + 1]
        a[A.indices[lo:hi]] = A.data[lo:hi]
        return a

    def _refactor(self) -> None:
        self.factor = _Factor(self.A[:, self.basis].tocsc())
        rhs = self.b - self.A @ np.where(self.at_upper, self.upper_finite, 0.0)
        xb = self.factor.ftran(rhs)
        self.x[self.basis] = xb

    def _setup(self, basis: np.ndarray) -> None:
        self.basis = basis.astype(np.int64)
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(self.N, dtype=bool)
        self.upper_finite = np.where(np.isfinite(self.upper), self.upper, 0.0)
        self.x = np.zeros(self.N)
        self._refactor()

    def _primal_feasible(self, tol=1e-9) -> bool:
        xb = self.x[self.basis]
        return bool((xb >= -tol).all() and (xb <= self.upper[self.basis] + tol).all())

    # main loop ----------------------------------------------------------

    def run(self, start) -> str:
        m = self.m
        slack_basis = np.arange(self.N - m, self.N)
        if start is not None:
            try:
                self._setup(start)
                if not self._primal_feasible():
                    start = None
            except LPError:
                start = None
        if start is None:
            self._setup(slack_basis)
        if not self._primal_feasible():
            status = self._phase_one()
            if status != OPTIMAL:
                return status
        return self._iterate(self.cost)

    def _phase_one(self) -> str:
        m, n_all = self.m, self.N
        xb = self.x[self.basis]
        bad = np.flatnonzero((xb < -1e-9) | (xb > self.upper[self.basis] + 1e-9))
        # slack basis here: row i's slack is basis[i]; its value is b[i]
        sign = np.where(self.b[bad] >= 0, 1.0, -1.0)
        art = sp.csc_matrix((sign, (bad, np.arange(bad.size))), shape=(m, bad.size))
        self.A = sp.hstack([self.A, art], format="csc")
        self.AT = self.A.T.tocsr()
        self.N = n_all + bad.size
        self.cost = np.concatenate([self.cost, np.zeros(bad.size)])
        self.upper = np.concatenate([self.upper, np.full(bad.size, math.inf)])
        basis = self.basis.copy()
        basis[bad] = np.arange(n_all, self.N)
        self._setup(basis)
        phase_cost = np.zeros(self.N)
        phase_cost[n_all:] = -1.0
        status = self._iterate(phase_cost)
        if status != OPTIMAL:
            raise LPError(f"phase one ended with status {status}")
        infeas = float(self.x[n_all:].sum())
        if infeas > 1e-7:
            return INFEASIBLE
        self.upper[n_all:] = 0.0
        self.upper_finite[n_all:] = 0.0
        self.x[n_all:] = 0.0
        return OPTIMAL

    def _reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        y = self.factor.btran(cost[self.basis])
        dj = cost - self.AT @ y
        dj[self.basis] = 0.0
        return dj

    def _iterate(self, cost: np.ndarray) -> str:
        # Dantzig pricing; reduced costs are updated from the pivot row and
        # recomputed from scratch at every refactorization.
        tol = self.opt_tol
        ptol = self.pivot_tol
        upper = self.upper
        movable = upper > 0
        degenerate = 0
        bland = False
        m = self.m
        dj = self._reduced_costs(cost)
        e_r = np.zeros(m)
        while True:
            if self.iterations >= self.max_iter:
                raise LPError(f"simplex iteration limit {self.max_iter} reached")
            nonbasic = ~self.is_basic
            cand_up = nonbasic & ~self.at_upper & movable & (dj > tol)
            cand_dn = nonbasic & self.at_upper & (dj < -tol)
            cand = cand_up | cand_dn
            if not cand.any():
                self._refactor()
                dj = self._reduced_costs(cost)
                cand_up = nonbasic & ~self.at_upper & movable & (dj > tol)
                cand_dn = nonbasic & self.at_upper & (dj < -tol)
                cand = cand_up | cand_dn
                if not cand.any():
                    return OPTIMAL
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                q = int(np.argmax(np.where(cand, np.abs(dj), 0.0)))
            sigma = 1.0 if cand_up[q] else -1.0
            w = self.factor.ftran(self._column(q))
            basis = self.basis
            xb = self.x[basis]
            sw = sigma * w
            ub = upper[basis]
            ratios = np.full(m, math.inf)
            dec = sw > ptol
            inc = (sw < -ptol) & np.isfinite(ub)
            ratios[dec] = np.maximum(xb[dec], 0.0) / sw[dec]
            ratios[inc] = np.maximum(ub[inc] - xb[inc], 0.0) / (-sw[inc])
            theta_flip = upper[q]
            theta = ratios.min() if m else math.inf
            if theta_flip <= theta:
                if not math.isfinite(theta_flip):
                    return UNBOUNDED
                self.x[basis] = xb - theta_flip * sw
                self.x[q] = upper[q] if sigma > 0 else 0.0
                self.at_upper[q] = sigma > 0
                self.iterations += 1
                self.bound_flips += 1
                degenerate = 0
                bland = False
                continue
            ties = np.flatnonzero(ratios <= theta + 1e-12)
            if bland:
                r = int(ties[np.argmin(basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(w[ties]))])
            leaving = int(basis[r])
            leave_to_upper = bool(inc[r])
            alpha_r = w[r]

            e_r[r] = 1.0
            rho = self.factor.btran(e_r)
            e_r[r] = 0.0
            row = self.AT @ rho
            dj -= (dj[q] / alpha_r) * row

            self.x[basis] = xb - theta * sw
            entering_value = (0.0 if sigma > 0 else upper[q]) + sigma * theta
            self.x[leaving] = self.upper_finite[leaving] if leave_to_upper else 0.0
            self.at_upper[leaving] = leave_to_upper
            self.is_basic[leaving] = False
            basis[r] = q
            self.is_basic[q] = True
            self.at_upper[q] = False
            self.x[q] = entering_value
            dj[q] = 0.0
            self.iterations += 1
            if theta <= 1e-12:
                self.degenerate_pivots += 1
                degenerate += 1
                if degenerate > self.degenerate_limit:
                    bland = True
            else:
                degenerate = 0
                bland = False
            if len(self.factor.etas) + 1 >= self.refactor_every:
                self._refactor()
                dj = self._reduced_costs(cost)
            else:
                self.factor.push(r, w)


# dispatch LP --------------------------------------------------------------


@dataclass(frozen=True)
class GammaBound:
    """Admissible range ``0 < gamma < upper`` for the scalarization weight."""

    upper: float
    chosen: float
    cost_term: float
    horizon_term: float


def gamma_bound(p: DispatchProblem, preferred: float = DEFAULT_GAMMA) -> GammaBound:
    """Upper limit on ``gamma`` and the weight actually used.

    The cost term is ``1 / sup f_minus``, with the supremum over-estimated by
    ``sum_k max_ij c[k] * D + alpha * (K - 1) * min(D, sum r)`` where ``D`` is
    the fleet size: a cell can send at most its drivers per step and every
    driver serves at most once in the horizon.  The horizon term is
    ``1 / (alpha * (K - 1))`` and infinite for ``K = 1``.
    """
    D = float(p.d.sum())
    K = p.K
    f_sup = float(p.c.reshape(K, -1).max(axis=1).sum()) * D
    f_sup += p.alpha * (K - 1) * min(D, float(p.r.sum()))
    cost_term = 1.0 / f_sup if f_sup > 0 else math.inf
    horizon_term = 1.0 / (p.alpha * (K - 1)) if K > 1 else math.inf
    upper = min(cost_term, horizon_term)
    chosen = min(preferred, upper / 2)
    return GammaBound(upper, chosen, cost_term, horizon_term)


@dataclass(frozen=True)
class DispatchLPMap:
    """Column indices of each family of variables in the dispatch LP."""

    x: dict  # (k, i, j) -> column
    z: np.ndarray  # (K, n)
    d: np.ndarray  # (K, n); row 0 is -1 (observed, not a variable)
    gamma: float


def build_dispatch_lp(p: DispatchProblem, gamma: float) -> tuple[LinearProgram, DispatchLPMap]:
    """Scalarized horizon LP with serve variables ``z`` and future drivers ``d``.

    Rows per cell and step, in order: ``z <= r``; the driver balance
    ``d[k+1] <= d[k] + inflow - outflow - z`` (with ``d[K] = 0``); and the
    mass limit ``outflow <= d[k]``.
    """
    bound = gamma_bound(p)
    if not 0 < gamma < bound.upper:
        raise ValueError(f"gamma={gamma} outside (0, {bound.upper:.6g})")
    n, K = p.n, p.K
    nbrs = p.grid.neighbor_lists()
    into = [[] for _ in range(n)]
    for i in range(n):
        for j in nbrs[i]:
            into[j].append(i)
    lb = LPBuilder()
    xcol = {}
    for k in range(K):
        for i in range(n):
            for j in nbrs[i]:
                xcol[k, i, j] = lb.add_var(f"x_{i}_{j}_{k}", -gamma * float(p.c[k, i, j]))
    zcol = np.empty((K, n), dtype=np.int64)
    for k in range(K):
        for i in range(n):
            zcol[k, i] = lb.add_var(f"z_{i}_{k}", 1.0 - gamma * p.alpha * k)
    dcol = np.full((K, n), -1, dtype=np.int64)
    for k in range(1, K):
        for i in range(n):
            dcol[k, i] = lb.add_var(f"d_{i}_{k}")
    for k in range(K):
        for i in range(n):
            lb.add_row({int(zcol[k, i]): 1.0}, "L", float(p.r[k, i]), f"ride_{i}_{k}")
            coeffs: dict[int, float] = {}
            if k + 1 < K:
                coeffs[int(dcol[k + 1, i])] = 1.0
            for j in into[i]:
                coeffs[xcol[k, j, i]] = coeffs.get(xcol[k, j, i], 0.0) - 1.0
            for j in nbrs[i]:
                coeffs[xcol[k, i, j]] = coeffs.get(xcol[k, i, j], 0.0) + 1.0
            coeffs[int(zcol[k, i])] = 1.0
            if k == 0:
                lb.add_row(coeffs, "L", float(p.d[i]), f"flow_{i}_{k}")
            else:
                coeffs[int(dcol[k, i])] = -1.0
                lb.add_row(coeffs, "L", 0.0, f"flow_{i}_{k}")
            mass = {xcol[k, i, j]: 1.0 for j in nbrs[i]}
            if k == 0:
                lb.add_row(mass, "L", float(p.d[i]), f"mass_{i}_{k}")
            else:
                mass[int(dcol[k, i])] = -1.0
                lb.add_row(mass, "L", 0.0, f"mass_{i}_{k}")
    return lb.build(), DispatchLPMap(xcol, zcol, dcol, gamma)


def assert_integral(values: np.ndarray, tol: float = INTEGRALITY_TOL) -> np.ndarray:
    """Round ``values`` to integers, raising if any entry is further than ``tol`` away."""
    rounded = np.rint(values)
    gap = np.abs(values - rounded)
    if gap.size and gap.max() > tol:
        j = int(np.argmax(gap))
        raise NonIntegralSolution(f"basic solution entry {j} = {float(values[j])!r} is not integral")
    return rounded.astype(np.int64)


def normalize_stays(p: DispatchProblem, x: np.ndarray) -> np.ndarray:
    """Set ``x[k, i, i]`` so every cell accounts for all of its drivers each step."""
    x = x.copy()
    n = p.n
    diag = np.arange(n)
    d = p.d.astype(np.int64).copy()
    for k in range(p.K):
        x[k, diag, diag] = 0
        moved = x[k].sum(axis=1)
        if (moved > d).any():
            i = int(np.flatnonzero(moved > d)[0])
            raise AssertionError(f"LP plan moves {moved[i]} drivers out of cell {i} holding {d[i]}")
        x[k, diag, diag] = d - moved
        present = x[k].sum(axis=0)
        d = present - np.minimum(present, p.r[k])
    return x


def dispatch_crash_basis(lp: LinearProgram, vmap: DispatchLPMap) -> list[int]:
    """Feasible starting basis in which every driver stays put for the whole horizon.

    ``d[k+1, i]`` is basic in the balance row of cell ``i`` at step ``k``;
    every other row keeps its slack.  The basis matrix is triangular.
    """
    K, n = vmap.z.shape
    basis = []
    for row in range(lp.num_rows):
        rem, kind = divmod(row, 3)
        k, i = divmod(rem, n)
        if kind == 1 and k + 1 < K:
            basis.append(int(vmap.d[k + 1, i]))
        else:
            basis.append(lp.num_vars + row)
    return basis


def solve_lp_dispatch_detailed(p: DispatchProblem, gamma: float | None = None, crash: bool = True):
    """Like ``solve_lp_dispatch`` but also returns the LP, its basic solution and map."""
    if gamma is None:
        gamma = gamma_bound(p).chosen
    lp, vmap = build_dispatch_lp(p, gamma)
    res = simplex_solve(lp, dispatch_crash_basis(lp, vmap) if crash else None)
    if res.status != OPTIMAL:
        raise LPError(f"dispatch LP ended {res.status}")
    v = assert_integral(res.values)
    n, K = p.n, p.K
    x = np.zeros((K, n, n), dtype=np.int64)
    for (k, i, j), col in vmap.x.items():
        x[k, i, j] = v[col]
    z = v[vmap.z]
    sol = evaluate_plan(p, normalize_stays(p, x))
    if not np.array_equal(sol.served, z):
        raise AssertionError("LP serve variables disagree with the driver dynamics")
    return sol, lp, res, vmap


def solve_lp_dispatch(p: DispatchProblem, gamma: float | None = None) -> DispatchSolution:
    """Optimal dispatch from the scalarized LP, read off an integral vertex."""
    return solve_lp_dispatch_detailed(p, gamma)[0]
