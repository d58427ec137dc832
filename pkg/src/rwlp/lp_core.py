"""Vertex-optimal LP solving over :class:`LinearConstraintSystem`.

Float mode hands the problem to the HiGHS dual simplex, which returns a
basic (vertex) solution.  Exact mode runs a dense tableau simplex over
``fractions.Fraction`` with Bland's rule, for small systems where the sign
of an optimum matters more than speed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .errors import ParameterError, SolverError
from .polytope import LinearConstraintSystem

FEASIBILITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6
EXACT_MAX_VARS = 40
EXACT_MAX_PIVOTS = 50_000


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    point: np.ndarray | None
    objective_value: float
    is_integral: bool
    iterations: int
    exact_point: tuple[Fraction, ...] | None = None
    exact_objective: Fraction | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def integrality_check(point, tol: float = INTEGRALITY_TOL) -> tuple[bool, np.ndarray | None]:
    """Return (integral?, rounded 0/1 word or None)."""
    if not 0 < tol < 0.5:
        raise ParameterError("integrality tolerance must lie in (0, 0.5)")
    x = np.asarray(point, dtype=float)
    dist = np.minimum(np.abs(x), np.abs(1.0 - x))
    if x.size and dist.max() > tol:
        return False, None
    return True, (x > 0.5).astype(np.int8)


def solve(system: LinearConstraintSystem, objective, exact: bool = False) -> LpSolution:
    """Minimize ``objective . x`` over ``system``."""
    if len(objective) != system.num_vars:
        raise ParameterError(f"objective has length {len(objective)}, system has {system.num_vars} vars")
    if exact:
        return _solve_exact(system, objective)
    return _solve_highs(system, np.asarray(objective, dtype=float))


def _solve_highs(system: LinearConstraintSystem, c: np.ndarray) -> LpSolution:
    # positive rescaling leaves the simplex path unchanged and keeps HiGHS
    # from seeing differently scaled copies of the same problem
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    c_scaled = c / scale if scale > 0 else c
    kwargs = {}
    if system.A_ub.shape[0]:
        kwargs.update(A_ub=system.A_ub, b_ub=system.b_ub)
    if system.A_eq.shape[0]:
        kwargs.update(A_eq=system.A_eq, b_eq=system.b_eq)
    bounds = np.column_stack([system.lower, np.where(np.isinf(system.upper), np.nan, system.upper)])
    bounds = [(lo, None if np.isnan(hi) else hi) for lo, hi in bounds]
    res = linprog(c_scaled, bounds=bounds, method="highs-ds", **kwargs)
    nit = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, None, float("nan"), False, nit)
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, None, float("-inf"), False, nit)
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}", {"status": int(res.status), "iterations": nit})
    x = np.asarray(res.x, dtype=float)
    # clip bound noise so downstream sums see exact box values
    x = np.clip(x, system.lower, system.upper)
    x[np.abs(x) < 1e-12] = 0.0
    viol = system.violation(x)
    if viol > FEASIBILITY_TOL:
        raise SolverError(f"solution violates constraints by {viol:.3e}", {"iterations": nit})
    integral, _ = integrality_check(x) if system.num_vars else (True, None)
    return LpSolution(LpStatus.OPTIMAL, x, float(c @ x), integral, nit)


# --------------------------------------------------------------------------
# exact rational simplex


def _to_fraction(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _solve_exact(system: LinearConstraintSystem, objective) -> LpSolution:
    n = system.num_vars
    if n > EXACT_MAX_VARS:
        raise ParameterError(f"exact mode supports at most {EXACT_MAX_VARS} variables, got {n}")
    cost = [_to_fraction(v) for v in objective]
    lower = [_to_fraction(v) for v in system.lower]
    if any(not np.isfinite(float(v)) for v in system.lower):
        raise ParameterError("exact mode needs finite lower bounds")

    # shift x = lower + y, y >= 0; collect rows as (coeffs, kind, rhs)
    rows: list[tuple[dict[int, Fraction], str, Fraction]] = []
    for coeffs, rel, b in system.constraints():
        fc = {k: _to_fraction(v) for k, v in coeffs.items()}
        rhs = _to_fraction(b) - sum(fc[k] * lower[k] for k in fc)
        rows.append((fc, rel, rhs))
    for k in range(n):
        if np.isfinite(system.upper[k]):
            width = _to_fraction(system.upper[k]) - lower[k]
            if width < 0:
                return LpSolution(LpStatus.INFEASIBLE, None, float("nan"), False, 0)
            rows.append(({k: Fraction(1)}, "=" if width == 0 else "<=", width))

    tab = _Tableau(n, rows)
    it1 = tab.phase_one()
    if tab.infeasible:
        return LpSolution(LpStatus.INFEASIBLE, None, float("nan"), False, it1)
    it2, unbounded = tab.phase_two(cost)
    iters = it1 + it2
    if unbounded:
        return LpSolution(LpStatus.UNBOUNDED, None, float("-inf"), False, iters)
    y = tab.primal(n)
    xs = tuple(lower[k] + y[k] for k in range(n))
    obj = sum((cost[k] * xs[k] for k in range(n)), Fraction(0))
    point = np.array([float(v) for v in xs])
    integral = all(v in (0, 1) for v in xs)
    return LpSolution(LpStatus.OPTIMAL, point, float(obj), integral, iters, xs, obj)


class _Tableau:
    """Dense Fraction tableau in equality form with slacks and artificials.

    Columns: structural y (n), one slack per inequality row, one artificial
    per row.  Bland's rule (lowest-index entering column, lowest-index
    leaving basic variable among ratio ties) guarantees termination.
    """

    def __init__(self, n: int, rows):
        self.n = n
        n_slack = sum(1 for _, rel, _ in rows if rel == "<=")
        m = len(rows)
        self.m = m
        self.art0 = n + n_slack
        self.ncols = n + n_slack + m
        self.T: list[dict[int, Fraction]] = []
        self.rhs: list[Fraction] = []
        slack = n
        for r, (coeffs, rel, b) in enumerate(rows):
            row = {k: v for k, v in coeffs.items() if v != 0}
            if rel == "<=":
                row[slack] = Fraction(1)
                slack += 1
            if b < 0:
                row = {k: -v for k, v in row.items()}
                b = -b
            row[self.art0 + r] = Fraction(1)
            self.T.append(row)
            self.rhs.append(b)
        self.basis = [self.art0 + r for r in range(m)]
        self.infeasible = False
        self.allowed = self.ncols

    def _pivot(self, r: int, col: int) -> None:
        prow = self.T[r]
        piv = prow[col]
        if piv != 1:
            prow = {k: v / piv for k, v in prow.items()}
            self.T[r] = prow
            self.rhs[r] /= piv
        prhs = self.rhs[r]
        for rr in range(self.m):
            if rr == r:
                continue
            f = self.T[rr].get(col)
            if not f:
                continue
            row = self.T[rr]
            for k, v in prow.items():
                nv = row.get(k, 0) - f * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            self.rhs[rr] -= f * prhs
        self.basis[r] = col

    def _run(self, cost: dict[int, Fraction]) -> tuple[int, bool]:
        iters = 0
        while True:
            # reduced costs d_k = c_k - sum_r c_B(r) T[r][k]
            red: dict[int, Fraction] = {}
            for k, v in cost.items():
                if k < self.allowed:
                    red[k] = v
            for r, b in enumerate(self.basis):
                cb = cost.get(b, 0)
                if cb:
                    for k, v in self.T[r].items():
                        if k < self.allowed:
                            red[k] = red.get(k, 0) - cb * v
            basic = set(self.basis)
            entering = next((k for k in sorted(red) if red[k] < 0 and k not in basic), None)
            if entering is None:
                return iters, False
            best = None
            for r in range(self.m):
                a = self.T[r].get(entering, 0)
                if a > 0:
                    ratio = self.rhs[r] / a
                    key = (ratio, self.basis[r])
                    if best is None or key < best[0]:
                        best = (key, r)
            if best is None:
                return iters, True
            self._pivot(best[1], entering)
            iters += 1
            if iters > EXACT_MAX_PIVOTS:
                raise SolverError("exact simplex pivot cap exceeded", {"iterations": iters})

    def phase_one(self) -> int:
        cost = {self.art0 + r: Fraction(1) for r in range(self.m)}
        iters, _ = self._run(cost)
        if any(self.rhs[r] != 0 for r in range(self.m) if self.basis[r] >= self.art0):
            self.infeasible = True
            return iters
        # drive zero-level artificials out of the basis, dropping redundant rows
        for r in reversed(range(self.m)):
            if self.basis[r] < self.art0:
                continue
            col = next((k for k in sorted(self.T[r]) if k < self.art0), None)
            if col is None:
                del self.T[r], self.rhs[r], self.basis[r]
                self.m -= 1
            else:
                self._pivot(r, col)
        self.allowed = self.art0
        for row in self.T:
            for k in [k for k in row if k >= self.art0]:
                del row[k]
        return iters

    def phase_two(self, cost: list[Fraction]) -> tuple[int, bool]:
        return self._run({k: v for k, v in enumerate(cost) if v != 0})

    def primal(self, n: int) -> list[Fraction]:
        y = [Fraction(0)] * n
        for r, b in enumerate(self.basis):
            if b < n:
                y[b] = self.rhs[r]
        return y
