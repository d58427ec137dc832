"""Success and robustness certificates for LP decoding.

The central object is the fundamental-cone property FCP(S, C): every
nonzero cone vector w has C * ||w_S||_1 < ||w_{S^c}||_1.  Because the cone
is closed under scaling, it suffices to minimize the linear form
``sum_{S^c} w - C sum_S w`` over the slice ``sum w = 1``; FCP holds exactly
when that minimum (the *margin*) is positive.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

import networkx as nx
import numpy as np

from .code_model import Code, as_word, girth
from .decoders import OutcomeKind, lp_decode
from .errors import ParameterError, RwlpError, StructuralError, TooLargeError
from .lp_core import LpStatus, solve
from .polytope import normalized_cone

STRICT_TOL_FLOAT = 1e-7
STRICT_TOL_EXACT = 1e-9
SKINNY_TREE_BUDGET = 1_000_000

DualLabeling = dict  # (variable, check) -> float


@dataclass(frozen=True)
class FcpQuery:
    S: tuple[int, ...]
    C: float

    def __post_init__(self):
        if self.C < 1:
            raise ParameterError(f"FCP factor C={self.C} must be >= 1")


@dataclass(frozen=True)
class FcpCertificate:
    query: FcpQuery
    margin: float
    holds: bool
    mode: str
    iterations: int
    exact_margin: Fraction | None = field(default=None, compare=False)

    def to_record(self) -> str:
        """One-line JSON record for archival next to simulation output."""
        rec = {
            "type": "fcp",
            "S": list(self.query.S),
            "C": self.query.C,
            "margin": self.margin,
            "holds": self.holds,
            "mode": self.mode,
            "iterations": self.iterations,
        }
        if self.exact_margin is not None:
            rec["exact_margin"] = str(self.exact_margin)
        return json.dumps(rec, sort_keys=True)


def _check_set(code: Code, S: Iterable[int]) -> tuple[int, ...]:
    S = tuple(sorted(set(int(i) for i in S)))
    if S and (S[0] < 0 or S[-1] >= code.n):
        raise ParameterError("index set outside 0..n-1")
    return S


def _cone_minimum(code: Code, objective, exact: bool, normalize_on=None):
    sol = solve(normalized_cone(code, normalize_on), objective, exact=exact)
    if sol.status is not LpStatus.OPTIMAL:
        raise RwlpError(f"normalized cone LP reported {sol.status.value}; it always contains 1/n")
    return sol


def fcp_margin(code: Code, S, C, exact: bool = False) -> tuple[float, Fraction | None, int]:
    """Minimum of sum_{S^c} w - C sum_S w over the cone slice sum w = 1.

    Accepts any real C (including values below 1, used when checking
    matching-derived factors).  Returns (margin, exact margin or None, iterations).
    """
    S = set(_check_set(code, S))
    if exact:
        Cf = C if isinstance(C, Fraction) else Fraction(C)
        obj = [-Cf if i in S else Fraction(1) for i in range(code.n)]
    else:
        obj = [-float(C) if i in S else 1.0 for i in range(code.n)]
    sol = _cone_minimum(code, obj, exact)
    return sol.objective_value, sol.exact_objective, sol.iterations


def fcp_certify(code: Code, S, C, exact: bool = False) -> FcpCertificate:
    query = FcpQuery(_check_set(code, S), float(C))
    margin, exact_margin, iters = fcp_margin(code, query.S, C, exact)
    tol = STRICT_TOL_EXACT if exact else STRICT_TOL_FLOAT
    if exact:
        holds = exact_margin > Fraction(tol)
    else:
        holds = margin > tol
    return FcpCertificate(query, margin, bool(holds), "rational" if exact else "float", iters, exact_margin)


def max_fcp_factor(code: Code, S, exact: bool = False) -> float:
    """Supremum C* with FCP(S, C) for all C < C*: min ||w_{S^c}||_1 over cone
    vectors with ||w_S||_1 = 1 (``inf`` for empty S)."""
    S = _check_set(code, S)
    if not S:
        return math.inf
    Sset = set(S)
    obj = [0.0 if i in Sset else 1.0 for i in range(code.n)]
    sol = _cone_minimum(code, obj, exact, normalize_on=list(S))
    return sol.objective_value


def verify_robustness_bound(x_c, x_r, x_p, S, C: float) -> bool:
    """Check ||x_p - x_c||_1 < 2 (C+1)/(C-1) ||(x_r - x_c)_{S^c}||_1.

    When the right side is zero (all errors inside S) the certified outcome
    is exact recovery; that case returns True iff x_p equals x_c.
    """
    if C <= 1:
        raise ParameterError("robustness bound needs C > 1")
    x_c = np.asarray(x_c, dtype=float)
    x_r = np.asarray(x_r, dtype=float)
    x_p = np.asarray(x_p, dtype=float)
    mask = np.ones(x_c.size, dtype=bool)
    mask[list(S)] = False
    lhs = float(np.abs(x_p - x_c).sum())
    rhs = 2 * (C + 1) / (C - 1) * float(np.abs(x_r - x_c)[mask].sum())
    if rhs == 0:
        return lhs <= STRICT_TOL_FLOAT
    return lhs < rhs


# --------------------------------------------------------------------------
# dual witnesses


def _check_domain(code: Code, tau: DualLabeling) -> None:
    if set(tau) != set(code.edges):
        raise StructuralError("dual labeling must be defined exactly on the factor-graph edges")


def check_dual_feasible(code: Code, tau: DualLabeling, gamma, tol: float = 1e-9) -> bool:
    """(i) tau_ij + tau_i'j >= 0 for distinct neighbors of every check;
    (ii) sum_j tau_ij <= gamma_i for every variable."""
    _check_domain(code, tau)
    gamma = np.asarray(gamma, dtype=float)
    for j, support in enumerate(code.row_supports):
        vals = sorted(tau[(i, j)] for i in support)
        if vals[0] + vals[1] < -tol:
            return False
    for i, checks in enumerate(code.col_supports):
        if sum(tau[(i, j)] for j in checks) > gamma[i] + tol:
            return False
    return True


def dual_implies_positive(code: Code, tau: DualLabeling, gamma, exact: bool = False) -> bool:
    """Operational form of the dual-witness argument: min gamma . w over the
    cone slice is positive."""
    _check_domain(code, tau)
    gamma = [Fraction(g) for g in gamma] if exact else np.asarray(gamma, dtype=float)
    sol = _cone_minimum(code, gamma, exact)
    if exact:
        return sol.exact_objective > 0
    return sol.objective_value > STRICT_TOL_FLOAT


# --------------------------------------------------------------------------
# matchings


@dataclass(frozen=True)
class MatchingWitness:
    kind: str  # "pq" or "delta_lambda"
    assignment: dict[int, frozenset[int]]
    params: tuple
    demands: dict[int, int] = field(default_factory=dict)

    def edges(self) -> list[tuple[int, int]]:
        return sorted((i, j) for i, cs in self.assignment.items() for j in cs)

    def is_valid(self, code: Code) -> bool:
        used: set[int] = set()
        for i, checks in self.assignment.items():
            if not checks <= set(code.col_supports[i]):
                return False
            if used & checks:
                return False
            used |= checks
        return all(len(self.assignment.get(i, ())) >= d for i, d in self.demands.items())


def _regular_dv(code: Code) -> int:
    d_v = code.d_v or code.variable_degree()
    if d_v is None:
        raise ParameterError("matching certificates need a variable-regular code")
    return d_v


def _flow_assignment(code: Code, demands: dict[int, int], allowed_checks: set[int]):
    """Decide a b-matching: variable i gets demands[i] distinct allowed
    checks, each check serving at most one variable."""
    G = nx.DiGraph()
    G.add_node("s")
    G.add_node("t")
    for i in sorted(demands):
        if demands[i] <= 0:
            continue
        G.add_edge("s", ("v", i), capacity=demands[i])
        for j in code.col_supports[i]:
            if j in allowed_checks:
                G.add_edge(("v", i), ("c", j), capacity=1)
    for j in sorted(allowed_checks):
        if G.has_node(("c", j)):
            G.add_edge(("c", j), "t", capacity=1)
    need = sum(d for d in demands.values() if d > 0)
    if need == 0:
        return {}
    value, flow = nx.maximum_flow(G, "s", "t")
    if value < need:
        return None
    assignment = {}
    for i in sorted(demands):
        if demands[i] <= 0:
            continue
        assignment[i] = frozenset(j for (tag, j), f in flow[("v", i)].items() if f > 0)
    return assignment


def pq_demands(code: Code, F, p: int, q: int) -> dict[int, int]:
    """Demand p on F and X_i = max(q - d_v + |N(i) & N(F)|, 0) elsewhere."""
    d_v = _regular_dv(code)
    F = set(F)
    NF = code.neighborhood(F)
    demands = {i: p for i in F}
    for i in range(code.n):
        if i not in F:
            Z = len(set(code.col_supports[i]) & NF)
            demands[i] = max(q - d_v + Z, 0)
    return demands


def find_pq_matching(code: Code, F, p: int, q: int) -> MatchingWitness | None:
    """(p,q)-matching on F, decided by max-flow; all assigned checks are
    distinct and lie in N(F)."""
    d_v = _regular_dv(code)
    if p < 0 or q < 0 or p > d_v or q > d_v:
        raise ParameterError(f"need 0 <= p, q <= d_v={d_v}")
    F = _check_set(code, F)
    demands = pq_demands(code, F, p, q)
    assignment = _flow_assignment(code, demands, code.neighborhood(F))
    if assignment is None:
        return None
    return MatchingWitness("pq", assignment, (p, q), {i: d for i, d in demands.items() if d > 0})


def matching_fcp_factor(d_v: int, p: int, q: int) -> float:
    """FCP factor (2p - d_v)/(d_v - q) implied by a (p,q)-matching."""
    if q >= d_v:
        raise ParameterError("q must be smaller than d_v")
    return (2 * p - d_v) / (d_v - q)


def _ceil(x: float) -> int:
    return math.ceil(x - 1e-9)


def delta_lambda_sets(code: Code, S, lam: float) -> list[int]:
    """S': variables outside S with at least (1 - lam) * d_v checks in N(S)."""
    d_v = _regular_dv(code)
    S = set(S)
    NS = code.neighborhood(S)
    return [i for i in range(code.n) if i not in S
            and len(set(code.col_supports[i]) & NS) >= (1 - lam) * d_v - 1e-9]


def find_delta_lambda_matching(code: Code, S, delta: float, lam: float) -> MatchingWitness | None:
    """Edge set M, at most one edge per check, giving each S-variable
    ceil(delta d_v) edges and each S'-variable ceil(lam d_v) edges.

    Edges are restricted to checks in N(S); this keeps every variable
    outside S and S' adjacent to fewer than (1 - lam) d_v matched checks.
    """
    if not (0 < delta <= 1 and 0 < lam <= 1):
        raise ParameterError("need 0 < delta, lambda <= 1")
    d_v = _regular_dv(code)
    S = _check_set(code, S)
    S_prime = delta_lambda_sets(code, S, lam)
    demands = {i: _ceil(delta * d_v) for i in S}
    demands.update({i: _ceil(lam * d_v) for i in S_prime})
    assignment = _flow_assignment(code, demands, code.neighborhood(S))
    if assignment is None:
        return None
    return MatchingWitness("delta_lambda", assignment, (delta, lam), demands)


def build_dual_from_matching(code: Code, M: MatchingWitness, delta: float, lam: float) -> DualLabeling:
    """Matched edge -x, its siblings at the same check +x, other edges 0,
    with x = 1 / ((1 - lam) d_v)."""
    if lam >= 1:
        raise ParameterError("lambda = 1 makes x = 1/((1-lambda) d_v) undefined")
    d_v = _regular_dv(code)
    x = 1.0 / ((1 - lam) * d_v)
    tau = {e: 0.0 for e in code.edges}
    for i, checks in M.assignment.items():
        for j in checks:
            for k in code.row_supports[j]:
                tau[(k, j)] = -x if k == i else x
    return tau


def strong_fcp_params(d_v: int, delta: float, alpha: float) -> tuple[float, float]:
    """(t, C) for a (alpha n, delta d_v) expander with delta > 2/3 + 1/d_v."""
    if not delta > 2 / 3 + 1 / d_v:
        raise ParameterError(f"delta={delta} must exceed 2/3 + 1/d_v = {2 / 3 + 1 / d_v:.6g}")
    if delta > 1:
        raise ParameterError("delta cannot exceed 1")
    t = (3 * delta - 2) / (2 * delta - 1) * alpha
    C = (2 * delta - 1) / (2 * delta - 1 - 1 / d_v)
    return t, C


# --------------------------------------------------------------------------
# skinny subtrees


def count_skinny_trees(code: Code, T: int) -> int:
    """Number of skinny subtrees with T variable layers over all roots
    (before discarding trees that revisit a vertex)."""
    memo: dict[tuple[int, int, int], int] = {}

    def count(u: int, parent_check: int, h: int) -> int:
        if h == T - 1:
            return 1
        key = (u, parent_check, h)
        if key not in memo:
            total = 1
            for c in code.col_supports[u]:
                if c != parent_check:
                    total *= sum(count(v, c, h + 1) for v in code.row_supports[c] if v != u)
            memo[key] = total
        return memo[key]

    return sum(count(v, -1, 0) for v in range(code.n))


def enumerate_skinny_trees(code: Code, root: int, T: int) -> Iterator[list[tuple[int, int]]]:
    """Skinny subtrees rooted at ``root``: every check below a tree variable
    (other than its parent) is present with exactly one further variable.

    Yields ``(variable, height)`` pairs, root included at height 0, where
    height is half the distance to the root and runs over 0..T-1.
    """

    def below(u: int, parent_check: int, h: int) -> list[tuple[tuple[int, int], ...]]:
        if h == T - 1:
            return [()]
        per_check = []
        for c in code.col_supports[u]:
            if c == parent_check:
                continue
            opts = []
            for v in code.row_supports[c]:
                if v == u:
                    continue
                for rest in below(v, c, h + 1):
                    opts.append(((v, h + 1),) + rest)
            per_check.append(opts)
        return [sum(combo, ()) for combo in itertools.product(*per_check)]

    for tree in below(root, -1, 0):
        verts = [root] + [v for v, _ in tree]
        if len(set(verts)) != len(verts):
            continue
        yield [(root, 0)] + list(tree)


def skinny_tree_certify(code: Code, S, C: float, T: int, w, budget: int = SKINNY_TREE_BUDGET) -> bool:
    """True iff f(beta) = sum_{S^c} beta - C sum_S beta >= 0 for every minimal
    T-local deviation beta (beta_i = w[h(i)] on the tree variables).

    Requires 4T <= girth, the regime in which these deviations span the cone.
    """
    w = np.asarray(w, dtype=float)
    if T < 1 or w.shape != (T,):
        raise ParameterError("need T >= 1 and a weight vector of length T")
    if (w < 0).any() or (w > 1).any():
        raise ParameterError("weights must lie in [0, 1]")
    if 4 * T > girth(code):
        raise ParameterError(f"T={T} exceeds girth/4 for this code")
    total = count_skinny_trees(code, T)
    if total > budget:
        raise TooLargeError(f"{total} skinny subtrees exceed the enumeration budget {budget}")
    S = set(_check_set(code, S))
    coef = np.array([-C if i in S else 1.0 for i in range(code.n)])
    for root in range(code.n):
        for tree in enumerate_skinny_trees(code, root, T):
            f = sum(coef[v] * w[h] for v, h in tree)
            if f < -1e-12:
                return False
    return True


# --------------------------------------------------------------------------
# implications


def mismatch_decode_test(code: Code, received, delta_gamma, S, g: float = 1.0) -> bool:
    """Decode with gamma + delta_gamma (gamma = +-g from ``received``) and
    report whether received XOR 1_S, the transmitted word, comes back."""
    r = as_word(received, code.n)
    dg = np.asarray(delta_gamma, dtype=float)
    delta = float(np.max(np.abs(dg))) if dg.size else 0.0
    if not delta < g:
        raise ParameterError(f"mismatch delta={delta} must be below g={g}")
    transmitted = r.copy()
    transmitted[list(S)] ^= 1
    gamma = g * (1.0 - 2.0 * r) + dg
    out = lp_decode(code, gamma)
    return out.kind is OutcomeKind.INTEGRAL and bool(np.array_equal(out.word, transmitted))


def her_bound(C: float, epsilon: float) -> float:
    if C <= 1:
        raise ParameterError("HER bound needs C > 1")
    return 1 - 2 * (C + 1) / (C - 1) * epsilon


def her_overlap_check(K, L, C: float, epsilon: float) -> bool:
    """|K & L| / |L| >= 1 - 2 (C+1)/(C-1) epsilon."""
    bound = her_bound(C, epsilon)
    L = set(L)
    if not L:
        raise ParameterError("L must be nonempty")
    return len(set(K) & L) / len(L) >= bound - 1e-12


def compute_w_capacity(x, lam: float) -> int:
    """Largest number of nonzero entries of x whose l1 norm is at most lam
    (greedy over ascending magnitudes, which is optimal)."""
    if lam < 0:
        raise ParameterError("lambda must be >= 0")
    mags = np.sort(np.abs(np.asarray(x, dtype=float)))
    mags = mags[mags > 0]
    return int(np.searchsorted(np.cumsum(mags), lam * (1 + 1e-12) + 1e-15, side="right"))
