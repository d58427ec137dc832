"""Constraint systems for the Feldman relaxation and the fundamental cone."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy import sparse

from .code_model import Code
from .errors import ParameterError, TooLargeError

MAX_CHECK_DEGREE = 24

LE, GE, EQ = "<=", ">=", "="


@dataclass(frozen=True)
class LinearConstraintSystem:
    """``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lower <= x <= upper``.

    Rows of either matrix are stored in emission order; ``>=`` constraints
    are negated into ``<=`` rows when the system is assembled.
    """

    num_vars: int
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        for A in (self.A_ub, self.A_eq):
            if A.shape[1] != self.num_vars:
                raise ParameterError("constraint matrix width differs from num_vars")
            if A.shape[0] and (np.diff(A.indptr) == 0).any():
                raise ParameterError("constraint with empty support")

    @classmethod
    def from_constraints(cls, num_vars: int, constraints, lower, upper) -> "LinearConstraintSystem":
        """Build from ``(coeffs: dict[int, float], relation, bound)`` triples."""
        ub_rows, ub_b, eq_rows, eq_b = [], [], [], []
        for coeffs, rel, b in constraints:
            coeffs = {int(k): float(v) for k, v in coeffs.items() if v != 0}
            if not coeffs:
                raise ParameterError("constraint with empty support")
            if max(coeffs) >= num_vars or min(coeffs) < 0:
                raise ParameterError("coefficient index out of range")
            if rel == LE:
                ub_rows.append(coeffs)
                ub_b.append(b)
            elif rel == GE:
                ub_rows.append({k: -v for k, v in coeffs.items()})
                ub_b.append(-b)
            elif rel == EQ:
                eq_rows.append(coeffs)
                eq_b.append(b)
            else:
                raise ParameterError(f"unknown relation {rel!r}")
        return cls(
            num_vars=num_vars,
            A_ub=_rows_to_csr(ub_rows, num_vars),
            b_ub=np.asarray(ub_b, dtype=float),
            A_eq=_rows_to_csr(eq_rows, num_vars),
            b_eq=np.asarray(eq_b, dtype=float),
            lower=np.broadcast_to(np.asarray(lower, dtype=float), (num_vars,)).copy(),
            upper=np.broadcast_to(np.asarray(upper, dtype=float), (num_vars,)).copy(),
        )

    @property
    def num_constraints(self) -> int:
        return self.A_ub.shape[0] + self.A_eq.shape[0]

    def constraints(self) -> Iterator[tuple[dict[int, float], str, float]]:
        """Row view: ``(coeffs, relation, bound)`` for every non-bound constraint."""
        for A, b, rel in ((self.A_ub, self.b_ub, LE), (self.A_eq, self.b_eq, EQ)):
            for r in range(A.shape[0]):
                lo, hi = A.indptr[r], A.indptr[r + 1]
                yield dict(zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist())), rel, float(b[r])

    def with_equality(self, coeffs: dict[int, float], bound: float) -> "LinearConstraintSystem":
        row = _rows_to_csr([coeffs], self.num_vars)
        return replace(
            self,
            A_eq=sparse.vstack([self.A_eq, row], format="csr"),
            b_eq=np.append(self.b_eq, bound),
        )

    def with_fixed(self, fixings: dict[int, float]) -> "LinearConstraintSystem":
        """Pin variables to values by collapsing their bounds."""
        lower, upper = self.lower.copy(), self.upper.copy()
        for i, v in fixings.items():
            lower[i] = upper[i] = v
        return replace(self, lower=lower, upper=upper)

    def violation(self, x) -> float:
        """Largest constraint or bound violation at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.A_ub.shape[0]:
            worst = max(worst, float(np.max(self.A_ub @ x - self.b_ub)))
        if self.A_eq.shape[0]:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        worst = max(worst, float(np.max(self.lower - x)), float(np.max(x - self.upper)))
        return max(worst, 0.0)

    def contains(self, x, tol: float = 1e-7) -> bool:
        return self.violation(x) <= tol

    def to_lp_text(self, objective=None, name: str = "system") -> str:
        """CPLEX LP format, one constraint per line."""
        obj = np.zeros(self.num_vars) if objective is None else np.asarray(objective, dtype=float)

        def expr(coeffs) -> str:
            terms = [f"{'+' if v >= 0 else '-'} {abs(v):.17g} x{k}" for k, v in sorted(coeffs.items())]
            return " ".join(terms) if terms else "0 x0"

        out = [f"\\ {name}", "Minimize", " obj: " + expr({k: v for k, v in enumerate(obj) if v})]
        out.append("Subject To")
        for r, (coeffs, rel, b) in enumerate(self.constraints()):
            out.append(f" c{r}: {expr(coeffs)} {rel} {b:.17g}")
        out.append("Bounds")
        for k in range(self.num_vars):
            hi = "+inf" if np.isinf(self.upper[k]) else f"{self.upper[k]:.17g}"
            out.append(f" {self.lower[k]:.17g} <= x{k} <= {hi}")
        out.append("End")
        return "\n".join(out) + "\n"


def _rows_to_csr(rows: list[dict[int, float]], num_vars: int) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for coeffs in rows:
        for k in sorted(coeffs):
            indices.append(k)
            data.append(coeffs[k])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(rows), num_vars),
    )


@lru_cache(maxsize=64)
def build_feldman_polytope(code: Code) -> LinearConstraintSystem:
    """Forbidden-set description of the intersection of the local codeword hulls.

    For each check and each odd-size subset V of its support:
    sum_{V} x - sum_{supp \\ V} x <= |V| - 1, plus the box 0 <= x <= 1.
    """
    big = [j for j, r in enumerate(code.row_supports) if len(r) > MAX_CHECK_DEGREE]
    if big:
        raise TooLargeError(f"check {big[0]} has degree > {MAX_CHECK_DEGREE}; refusing 2^(d-1) blow-up")
    rows: list[dict[int, float]] = []
    b: list[float] = []
    for support in code.row_supports:
        d = len(support)
        for size in range(1, d + 1, 2):
            for V in itertools.combinations(support, size):
                inside = set(V)
                rows.append({i: (1.0 if i in inside else -1.0) for i in support})
                b.append(size - 1)
    n = code.n
    return LinearConstraintSystem(
        num_vars=n,
        A_ub=_rows_to_csr(rows, n),
        b_ub=np.asarray(b, dtype=float),
        A_eq=_rows_to_csr([], n),
        b_eq=np.zeros(0),
        lower=np.zeros(n),
        upper=np.ones(n),
    )


@lru_cache(maxsize=64)
def build_fundamental_cone(code: Code) -> LinearConstraintSystem:
    """omega >= 0 and, for each check j and i in its support,
    omega_i <= sum of omega over the rest of the support."""
    rows = []
    for support in code.row_supports:
        for i in support:
            rows.append({k: (1.0 if k == i else -1.0) for k in support})
    n = code.n
    return LinearConstraintSystem(
        num_vars=n,
        A_ub=_rows_to_csr(rows, n),
        b_ub=np.zeros(len(rows)),
        A_eq=_rows_to_csr([], n),
        b_eq=np.zeros(0),
        lower=np.zeros(n),
        upper=np.full(n, np.inf),
    )


def normalized_cone(code: Code, support: list[int] | None = None) -> LinearConstraintSystem:
    """The cone cut by ``sum_{support} omega = 1`` (all coordinates by default)."""
    cone = build_fundamental_cone(code)
    idx = range(code.n) if support is None else support
    return cone.with_equality({i: 1.0 for i in idx}, 1.0)
