"""LP decoding pipelines for binary codes.

Every decoder takes the received hard-decision word and returns a
:class:`DecodeOutcome`.  The post-processing decoders (reweighted, mixed
integer, facet guessing) all start from the same first-pass LP, which a
caller may pass in via ``first_pass`` to avoid solving it twice.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .code_model import Code, as_word
from .errors import ParameterError, RwlpError, SolverError
from .lp_core import INTEGRALITY_TOL, LpStatus, integrality_check, solve
from .polytope import build_feldman_polytope

MAX_MIXED_INTEGER_BITS = 20


class OutcomeKind(str, enum.Enum):
    INTEGRAL = "integral"
    FRACTIONAL = "fractional"
    SOLVER_ERROR = "solver_error"


@dataclass(frozen=True)
class DecodeOutcome:
    kind: OutcomeKind
    point: np.ndarray | None
    objective: float
    stage: str
    word: np.ndarray | None = None
    lp_solves: int = 1
    iterations: int = 0
    message: str = ""

    @property
    def ml_certified(self) -> bool:
        return self.kind is OutcomeKind.INTEGRAL

    @property
    def pseudocodeword(self) -> np.ndarray | None:
        return self.point if self.kind is OutcomeKind.FRACTIONAL else None

    def hard_decision(self) -> np.ndarray | None:
        """The decoded word, or the rounding of a fractional point (ties to 0)."""
        if self.word is not None:
            return self.word
        if self.point is None:
            return None
        return (self.point > 0.5).astype(np.int8)


@dataclass(frozen=True)
class ReweightParams:
    """Second-pass weights: ``lambda1`` on the high-error-rate set L,
    ``lambda2`` elsewhere.

    ``her_fraction`` sizes L as round(her_fraction * n); ``None`` falls back
    to round(||x_r - x_p||_1).  ``orientation="smallest"`` takes the least
    deviating coordinates instead of the most deviating ones.
    """

    lambda1: float = -1.0
    lambda2: float = 1.0
    her_fraction: float | None = None
    orientation: str = "largest"

    def __post_init__(self):
        if not self.lambda1 < 0 < self.lambda2:
            raise ParameterError("need lambda1 < 0 < lambda2")
        if self.her_fraction is not None and not 0 < self.her_fraction < 1:
            raise ParameterError("her_fraction must lie in (0, 1)")
        if self.orientation not in ("largest", "smallest"):
            raise ParameterError("orientation must be 'largest' or 'smallest'")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def bsc_llr(received, p: float) -> np.ndarray:
    """Log-likelihood ratios ln P(y|0)/P(y|1) for a BSC with flip probability p."""
    if not 0 < p < 0.5:
        raise ParameterError(f"flip probability {p} outside (0, 0.5)")
    g = math.log((1 - p) / p)
    r = np.asarray(received)
    return np.where(r == 0, g, -g).astype(float)


def _outcome_from_solution(code: Code, sol, stage: str, objective: float, lp_solves: int) -> DecodeOutcome:
    if sol.status is not LpStatus.OPTIMAL:
        return DecodeOutcome(
            OutcomeKind.SOLVER_ERROR, None, float("nan"), stage,
            lp_solves=lp_solves, iterations=sol.iterations, message=sol.status.value,
        )
    integral, word = integrality_check(sol.point, INTEGRALITY_TOL)
    if integral:
        if not code.is_codeword(word):
            raise RwlpError(f"integral LP vertex is not a codeword (stage {stage})")
        return DecodeOutcome(OutcomeKind.INTEGRAL, sol.point, objective, stage, word, lp_solves, sol.iterations)
    return DecodeOutcome(OutcomeKind.FRACTIONAL, sol.point, objective, stage, None, lp_solves, sol.iterations)


def _solve_weighted(code: Code, received: np.ndarray, weights: np.ndarray, stage: str, fixings=None, exact=False):
    """min sum_i w_i |x_i - r_i| over the polytope (optionally with pinned bits).

    On [0,1], |x_i - r_i| = x_i when r_i = 0 and 1 - x_i when r_i = 1.
    """
    sign = 1.0 - 2.0 * received
    system = build_feldman_polytope(code)
    if fixings:
        system = system.with_fixed(fixings)
    sol = solve(system, weights * sign, exact=exact)
    obj = float(weights @ np.abs(sol.point - received)) if sol.point is not None else float("nan")
    return sol, obj


def lp_decode(code: Code, gamma, exact: bool = False) -> DecodeOutcome:
    """Minimize gamma . x over the Feldman polytope."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (code.n,):
        raise ParameterError("LLR vector length differs from n")
    if not np.isfinite(gamma).all():
        raise ParameterError("LLR vector has non-finite entries")
    sol = solve(build_feldman_polytope(code), gamma, exact=exact)
    obj = float(gamma @ sol.point) if sol.point is not None else float("nan")
    return _outcome_from_solution(code, sol, "lp", obj, 1)


def bsc_lp_decode(code: Code, received, exact: bool = False) -> DecodeOutcome:
    """Closest polytope point to the received word in l1 distance."""
    r = as_word(received, code.n).astype(float)
    sol, obj = _solve_weighted(code, r, np.ones(code.n), "first-pass", exact=exact)
    return _outcome_from_solution(code, sol, "first-pass", obj, 1)


def weighted_lp_decode(code: Code, received, L, lambda1: float, lambda2: float, exact: bool = False) -> DecodeOutcome:
    """min lambda1 ||(x - y)_L||_1 + lambda2 ||(x - y)_{L^c}||_1 over the polytope."""
    r = as_word(received, code.n).astype(float)
    w = np.full(code.n, float(lambda2))
    L = list(L)
    if L and (min(L) < 0 or max(L) >= code.n):
        raise ParameterError("index set L out of range")
    w[L] = lambda1
    sol, obj = _solve_weighted(code, r, w, "weighted", exact=exact)
    return _outcome_from_solution(code, sol, "weighted", obj, 1)


def extract_her_set(received, pseudocodeword, k: int, orientation: str = "largest") -> list[int]:
    """Indices of the k largest |x_r - x_p| entries, ties to the lower index."""
    r = np.asarray(received, dtype=float)
    # round away solver noise so equal deviations tie and fall to the lower index
    dev = np.round(np.abs(r - np.asarray(pseudocodeword, dtype=float)), 9)
    if not 1 <= k <= dev.size:
        raise ParameterError(f"k={k} outside 1..{dev.size}")
    idx = np.arange(dev.size)
    key = -dev if orientation == "largest" else dev
    order = np.lexsort((idx, key))
    return sorted(order[:k].tolist())


def _first_pass(code: Code, r: np.ndarray, first_pass: DecodeOutcome | None) -> DecodeOutcome:
    return first_pass if first_pass is not None else bsc_lp_decode(code, r)


def reweighted_lp_decode(code: Code, received, params: ReweightParams,
                         first_pass: DecodeOutcome | None = None) -> DecodeOutcome:
    """Two-pass decoder: plain LP, then a reweighted LP if the first pass is fractional."""
    r = as_word(received, code.n)
    first = _first_pass(code, r, first_pass)
    if first.kind is not OutcomeKind.FRACTIONAL:
        return first
    deviation = r - first.point
    if params.her_fraction is not None:
        k = round_half_up(params.her_fraction * code.n)
    else:
        k = round_half_up(float(np.abs(deviation).sum()))
    k = min(max(k, 1), code.n)
    L = extract_her_set(r, first.point, k, params.orientation)
    second = weighted_lp_decode(code, r, L, params.lambda1, params.lambda2)
    return _restage(second, "reweighted", first.lp_solves + 1, first.iterations)


def _restage(out: DecodeOutcome, stage: str, lp_solves: int, extra_iters: int = 0) -> DecodeOutcome:
    return DecodeOutcome(out.kind, out.point, out.objective, stage, out.word, lp_solves,
                         out.iterations + extra_iters, out.message)


def _best_integral(code: Code, r: np.ndarray, fixing_list) -> tuple[DecodeOutcome | None, int, int]:
    best = None
    iters = 0
    for fixings in fixing_list:
        sol, obj = _solve_weighted(code, r.astype(float), np.ones(code.n), "fixing", fixings)
        iters += sol.iterations
        if sol.status is not LpStatus.OPTIMAL:
            continue
        out = _outcome_from_solution(code, sol, "fixing", obj, 1)
        if out.kind is OutcomeKind.INTEGRAL and (best is None or out.objective < best.objective - 1e-9):
            best = out
    return best, len(fixing_list), iters


def least_certain_bits(pseudocodeword, M: int) -> list[int]:
    x = np.asarray(pseudocodeword, dtype=float)
    order = np.lexsort((np.arange(x.size), np.abs(x - 0.5)))
    return order[:M].tolist()


def mixed_integer_decode(code: Code, received, M: int = 5,
                         first_pass: DecodeOutcome | None = None) -> DecodeOutcome:
    """Re-solve with the M least certain bits pinned to every 0/1 pattern."""
    if not 0 <= M <= MAX_MIXED_INTEGER_BITS:
        raise ParameterError(f"M={M} outside 0..{MAX_MIXED_INTEGER_BITS}")
    r = as_word(received, code.n)
    first = _first_pass(code, r, first_pass)
    if first.kind is not OutcomeKind.FRACTIONAL:
        return first
    bits = least_certain_bits(first.point, min(M, code.n))
    patterns = [dict(zip(bits, map(float, vals))) for vals in itertools.product((0, 1), repeat=len(bits))]
    best, solves, iters = _best_integral(code, r, patterns)
    total = first.lp_solves + solves
    if best is None:
        return _restage(first, "mixed-integer", total, iters)
    return _restage(best, "mixed-integer", total, first.iterations + iters)


def facet_guessing_decode(code: Code, received, iterations: int = 20, seed: int = 0,
                          first_pass: DecodeOutcome | None = None) -> DecodeOutcome:
    """Re-solve on randomly chosen box facets x_i = b not containing the pseudocodeword.

    Candidate facets are those of fractional coordinates; they are drawn as
    a seeded random permutation, reshuffled when exhausted, so
    ``iterations = 2 * (#fractional coordinates)`` covers every facet once.
    """
    if iterations < 1:
        raise ParameterError("iterations must be >= 1")
    r = as_word(received, code.n)
    first = _first_pass(code, r, first_pass)
    if first.kind is not OutcomeKind.FRACTIONAL:
        return first
    x = first.point
    frac = np.flatnonzero(np.minimum(np.abs(x), np.abs(1 - x)) > INTEGRALITY_TOL)
    if frac.size == 0:
        raise RwlpError("fractional outcome without fractional coordinates")
    facets = [(int(i), b) for i in frac for b in (0.0, 1.0)]
    rng = np.random.default_rng(seed)
    chosen: list[dict[int, float]] = []
    while len(chosen) < iterations:
        for k in rng.permutation(len(facets)):
            if len(chosen) == iterations:
                break
            i, b = facets[k]
            chosen.append({i: b})
    best, solves, iters = _best_integral(code, r, chosen)
    total = first.lp_solves + solves
    if best is None:
        return _restage(first, "facet-guessing", total, iters)
    return _restage(best, "facet-guessing", total, first.iterations + iters)


@dataclass(frozen=True)
class DecoderConfig:
    """Named decoder with its parameters, as used by campaigns and the CLI."""

    id: str
    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("lp", "reweighted", "mixed_integer", "facet_guessing")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ParameterError(f"unknown decoder kind {self.kind!r}; choose from {self.KINDS}")
        p = self.params
        if self.kind == "reweighted":
            hf = p.get("her_fraction", "channel")
            ReweightParams(p.get("lambda1", -1.0), p.get("lambda2", 1.0),
                           None if hf in ("channel", "estimate", None) else hf,
                           p.get("orientation", "largest"))
        if self.kind == "mixed_integer" and not 0 <= p.get("M", 5) <= MAX_MIXED_INTEGER_BITS:
            raise ParameterError(f"M must be <= {MAX_MIXED_INTEGER_BITS}")
        if self.kind == "facet_guessing" and p.get("iterations", 20) < 1:
            raise ParameterError("facet iterations must be >= 1")

    def run(self, code: Code, received, seed: int, channel_p: float | None = None,
            first_pass: DecodeOutcome | None = None) -> DecodeOutcome:
        p = self.params
        if self.kind == "lp":
            return first_pass if first_pass is not None else bsc_lp_decode(code, received)
        if self.kind == "reweighted":
            hf = p.get("her_fraction", "channel")
            if hf == "channel":
                # degenerate channels (k = 0 or k = n flips) have no usable rate
                hf = channel_p if channel_p is not None and 0 < channel_p < 1 else None
            elif hf == "estimate":
                hf = None
            params = ReweightParams(p.get("lambda1", -1.0), p.get("lambda2", 1.0), hf,
                                    p.get("orientation", "largest"))
            return reweighted_lp_decode(code, received, params, first_pass)
        if self.kind == "mixed_integer":
            return mixed_integer_decode(code, received, p.get("M", 5), first_pass)
        return facet_guessing_decode(code, received, p.get("iterations", 20), seed, first_pass)


def safe_run(config: DecoderConfig, *args, **kwargs) -> DecodeOutcome:
    """Run a decoder, converting solver failures into a SOLVER_ERROR outcome."""
    try:
        return config.run(*args, **kwargs)
    except SolverError as exc:
        return DecodeOutcome(OutcomeKind.SOLVER_ERROR, None, float("nan"), config.kind, message=str(exc))
