"""Laplace-transform evaluation of the high-girth robustness recursion.

Leaves carry eta in {-C w.p. p, 1 w.p. 1-p}.  Going up the tree,

    X_i = min of (d_c - 1) i.i.d. copies of Y_i
    Y_0 = eta,   Y_i = 2^i eta + sum of (d_v - 1) i.i.d. copies of X_{i-1}

and the contraction ``c = gamma^(1/(d_v-2)) * min_t E exp(-t X_j)`` with
``gamma = (d_c-1) (C+1)/C (1-p) (C p/(1-p))^(1/(C+1))`` certifies the
robustness factor C whenever c < 1.

Derivation note: gamma equals (d_c - 1) * min_s E exp(-s eta); the
optimizing s is ln((1-p)/(C p)) / (C+1).  Levels above j carry a common
weight rho, and since rho is free, t*rho can sit at that optimum whatever t
is.  The joint (rho, t) search therefore collapses to the closed form for
gamma times a one-dimensional search over t for E exp(-t X_j).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, TooLargeError

MAX_EXACT_ATOMS = 1_000_000
T_BRACKET = (1e-4, 50.0)
C_BRACKET = (1.0, 64.0)
C_RESOLUTION = 1e-3
CURVE_COLUMNS = ("p", "C_max", "j", "t_star", "gamma", "c", "mode")


@dataclass(frozen=True)
class DiscreteDistribution:
    values: np.ndarray
    probs: np.ndarray
    samples: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.values.shape != self.probs.shape:
            raise ParameterError("values and probabilities differ in shape")
        if (self.probs < 0).any():
            raise ParameterError("negative probability")
        if abs(self.probs.sum() - 1) > 1e-12:
            raise ParameterError(f"probabilities sum to {self.probs.sum()!r}")

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def mean(self) -> float:
        return float(self.values @ self.probs)

    def prob_of(self, value: float, tol: float = 1e-9) -> float:
        return float(self.probs[np.abs(self.values - value) <= tol].sum())


@dataclass(frozen=True)
class RecursionSpec:
    d_v: int
    d_c: int
    C: float
    p: float
    j: int = 1
    weights: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if self.d_v < 3 or self.d_c < 3:
            raise ParameterError("recursion needs d_v >= 3 and d_c >= 3")
        if self.C < 1:
            raise ParameterError("C must be >= 1")
        if not 0 < self.p < 0.5:
            raise ParameterError("p must lie in (0, 0.5)")
        if self.j < 0:
            raise ParameterError("depth j must be >= 0")
        if self.weights is not None and len(self.weights) != self.j + 1:
            raise ParameterError("need one weight per level 0..j")

    def level_weight(self, i: int) -> float:
        return float(self.weights[i]) if self.weights is not None else float(2 ** i)


@dataclass(frozen=True)
class ThresholdPoint:
    p: float
    C_max: float | None
    j: int
    t_star: float
    gamma_factor: float
    c: float
    ceiling_hit: bool = False
    mode: str = "exact"


def eta_distribution(p: float, C: float) -> DiscreteDistribution:
    if not 0 < p < 1:
        raise ParameterError("p must lie in (0, 1)")
    return DiscreteDistribution(np.array([-float(C), 1.0]), np.array([p, 1 - p]))


# Exact laws are kept as {(a, b): prob} meaning value a - b*C with integer
# a and b, so atoms merge exactly regardless of C.


def _sum_law(x: dict, y: dict) -> dict:
    out: dict = {}
    for (a1, b1), p1 in x.items():
        for (a2, b2), p2 in y.items():
            key = (a1 + a2, b1 + b2)
            out[key] = out.get(key, 0.0) + p1 * p2
    if len(out) > MAX_EXACT_ATOMS:
        raise TooLargeError("exact law exceeds atom budget; use Monte-Carlo mode")
    return out


def _min_law(x: dict, copies: int, C: float) -> dict:
    """Law of the minimum of ``copies`` i.i.d. draws.

    Atoms are sorted by value (ties broken by key); with survival
    S_k = P(atom index >= k) the minimum lands on atom k w.p. S_k^c - S_{k+1}^c.
    """
    items = sorted(x.items(), key=lambda kv: (kv[0][0] - kv[0][1] * C, kv[0]))
    probs = np.array([pr for _, pr in items])
    surv = np.append(np.cumsum(probs[::-1])[::-1], 0.0)
    surv = np.minimum(surv, 1.0)
    mass = surv[:-1] ** copies - surv[1:] ** copies
    return {key: float(m) for (key, _), m in zip(items, mass) if m > 0}


def _scaled_eta(p: float, w: float) -> dict:
    # eta scaled by an integer weight
    wi = int(w)
    if wi != w:
        raise ParameterError("exact mode needs integer level weights")
    return {(wi, 0): 1 - p, (0, wi): p}


def evolve_recursion(spec: RecursionSpec, mode: str = "exact", samples: int = 10**6,
                     seed: int = 0) -> DiscreteDistribution:
    """Law of X_j, exactly or as an empirical Monte-Carlo distribution."""
    if mode == "montecarlo":
        return _evolve_montecarlo(spec, samples, seed)
    if mode != "exact":
        raise ParameterError("mode must be 'exact' or 'montecarlo'")
    C, p = spec.C, spec.p
    X = _min_law(_scaled_eta(p, spec.level_weight(0)), spec.d_c - 1, C)
    for i in range(1, spec.j + 1):
        Y = _scaled_eta(p, spec.level_weight(i))
        for _ in range(spec.d_v - 1):
            Y = _sum_law(Y, X)
        X = _min_law(Y, spec.d_c - 1, C)
    return _to_distribution(X, C)


def _to_distribution(law: dict, C: float) -> DiscreteDistribution:
    # merge atoms that coincide numerically so the output is a clean law
    merged: dict[float, float] = {}
    for (a, b), pr in law.items():
        v = a - b * C
        merged[v] = merged.get(v, 0.0) + pr
    vals = np.array(sorted(merged))
    probs = np.array([merged[v] for v in vals])
    probs = probs / probs.sum()
    return DiscreteDistribution(vals, probs)


def sample_recursion(spec: RecursionSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Independent draws of X_j, simulating the full tree below each draw."""

    def eta(shape):
        return np.where(rng.random(shape) < spec.p, -spec.C, 1.0)

    def X(i, shape):
        return Y(i, shape + (spec.d_c - 1,)).min(axis=-1)

    def Y(i, shape):
        out = spec.level_weight(i) * eta(shape)
        if i > 0:
            out = out + X(i - 1, shape + (spec.d_v - 1,)).sum(axis=-1)
        return out

    return X(spec.j, (size,))


def _evolve_montecarlo(spec: RecursionSpec, samples: int, seed: int, chunk: int = 200_000) -> DiscreteDistribution:
    rng = np.random.default_rng(seed)
    counts: dict[float, int] = {}
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        draws = np.round(sample_recursion(spec, m, rng), 9)
        vals, cnt = np.unique(draws, return_counts=True)
        for v, c in zip(vals.tolist(), cnt.tolist()):
            counts[v] = counts.get(v, 0) + c
        done += m
    vals = np.array(sorted(counts))
    probs = np.array([counts[v] for v in vals], dtype=float) / samples
    return DiscreteDistribution(vals, probs, samples=samples, seed=seed)


def laplace_bound(dist: DiscreteDistribution, t: float) -> float:
    """E exp(-t X); +inf when the transform overflows."""
    if t < 0:
        raise ParameterError("t must be >= 0")
    expo = -t * dist.values
    top = float(expo.max())
    if top > 700:
        return math.inf
    return float(dist.probs @ np.exp(expo))


def gamma_factor(d_c: int, C: float, p: float) -> float:
    if not 0 < p < 1:
        raise ParameterError("p must lie in (0, 1)")
    if C < 1:
        raise ParameterError("C must be >= 1")
    return (d_c - 1) * (C + 1) / C * (1 - p) * (C * p / (1 - p)) ** (1 / (C + 1))


def minimize_laplace(dist: DiscreteDistribution, bracket=T_BRACKET, rel_tol: float = 1e-6,
                     grid: int = 64) -> tuple[float, float]:
    """min over t in the bracket of E exp(-tX): coarse log-spaced grid,
    then golden-section refinement in log t.  Returns (value, t*)."""
    lo, hi = math.log(bracket[0]), math.log(bracket[1])

    def f(s: float) -> float:
        return laplace_bound(dist, math.exp(s))

    ss = np.linspace(lo, hi, grid)
    vals = [f(s) for s in ss]
    k = int(np.argmin(vals))
    a, b = ss[max(k - 1, 0)], ss[min(k + 1, grid - 1)]
    invphi = (math.sqrt(5) - 1) / 2
    x1, x2 = b - invphi * (b - a), a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    # width in log t is the relative width in t
    while b - a > rel_tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    cands = [(f1, x1), (f2, x2), (vals[k], ss[k])]
    best_val, best_s = min(cands)
    return best_val, math.exp(best_s)


def contraction(spec: RecursionSpec, dist: DiscreteDistribution | None = None) -> tuple[float, float]:
    """(c, t*) with c = gamma^(1/(d_v-2)) * min_t E exp(-t X_j)."""
    if dist is None:
        dist = evolve_recursion(spec)
    value, t_star = minimize_laplace(dist)
    gam = gamma_factor(spec.d_c, spec.C, spec.p)
    return gam ** (1 / (spec.d_v - 2)) * value, t_star


def robustness_point(d_v: int, d_c: int, p: float, j: int = 1) -> ThresholdPoint:
    """Largest C in [1, 64] with contraction < 1, by bisection to 1e-3."""

    def c_at(C: float) -> tuple[float, float]:
        return contraction(RecursionSpec(d_v, d_c, C, p, j))

    c1, t1 = c_at(C_BRACKET[0])
    if c1 >= 1:
        return ThresholdPoint(p, None, j, t1, gamma_factor(d_c, 1.0, p), c1)
    c_hi, t_hi = c_at(C_BRACKET[1])
    if c_hi < 1:
        return ThresholdPoint(p, C_BRACKET[1], j, t_hi, gamma_factor(d_c, C_BRACKET[1], p), c_hi, True)
    lo, hi = C_BRACKET
    while hi - lo > C_RESOLUTION:
        mid = 0.5 * (lo + hi)
        if c_at(mid)[0] < 1:
            lo = mid
        else:
            hi = mid
    c_lo, t_lo = c_at(lo)
    return ThresholdPoint(p, lo, j, t_lo, gamma_factor(d_c, lo, p), c_lo)


def robustness_curve(d_v: int, d_c: int, p_grid, j: int = 1) -> list[ThresholdPoint]:
    if d_v < 3:
        raise ParameterError("curve needs d_v >= 3")
    grid = sorted(float(p) for p in p_grid)
    if not grid or any(not 0 < p < 0.5 for p in grid):
        raise ParameterError("grid probabilities must lie in (0, 0.5)")
    return [robustness_point(d_v, d_c, p, j) for p in grid]


def curve_is_monotone(points: list[ThresholdPoint]) -> bool:
    """C_max nonincreasing in p; an absent C_max counts as below every present one."""
    vals = [pt.C_max if pt.C_max is not None else -math.inf for pt in sorted(points, key=lambda q: q.p)]
    return all(a >= b for a, b in zip(vals, vals[1:]))


def curve_to_csv(points: list[ThresholdPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for pt in points:
        w.writerow([
            repr(pt.p),
            "" if pt.C_max is None else repr(pt.C_max),
            pt.j,
            repr(pt.t_star),
            repr(pt.gamma_factor),
            repr(pt.c),
            pt.mode,
        ])
    return buf.getvalue()


def curve_from_csv(text: str) -> list[ThresholdPoint]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        ThresholdPoint(
            float(r["p"]),
            float(r["C_max"]) if r["C_max"] else None,
            int(r["j"]),
            float(r["t_star"]),
            float(r["gamma"]),
            float(r["c"]),
            mode=r["mode"],
        )
        for r in rows
    ]
