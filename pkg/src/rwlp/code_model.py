"""Binary linear codes given by sparse parity-check matrices.

Indices are 0-based everywhere in the API; the alist format is 1-based on
disk and converted at the boundary.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import AlistParseError, GenerationError, ParameterError, TooLargeError

# exact expansion check refuses beyond these limits
EXPANSION_MAX_N = 64
EXPANSION_MAX_SUBSET = 20
EXPANSION_MAX_SUBSETS = 10_000_000


@dataclass(frozen=True, eq=True)
class Code:
    """Parity-check description of a binary linear code.

    ``row_supports[j]`` lists the variables checked by row ``j``;
    ``col_supports[i]`` lists the checks touching variable ``i``.
    ``check_ratio`` is m/n (the quantity sometimes called the rate R with m = Rn).
    """

    n: int
    row_supports: tuple[tuple[int, ...], ...]
    d_v: int | None = None
    d_c: int | None = None
    col_supports: tuple[tuple[int, ...], ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        rows = tuple(tuple(sorted(int(i) for i in r)) for r in self.row_supports)
        object.__setattr__(self, "row_supports", rows)
        if self.n < 1:
            raise ParameterError("code length must be positive")
        cols: list[list[int]] = [[] for _ in range(self.n)]
        for j, r in enumerate(rows):
            if len(r) < 2:
                raise ParameterError(f"check {j} has degree {len(r)}; every check needs degree >= 2")
            if len(set(r)) != len(r):
                raise ParameterError(f"check {j} repeats a variable")
            for i in r:
                if not 0 <= i < self.n:
                    raise ParameterError(f"check {j} references variable {i} outside [0, {self.n})")
                cols[i].append(j)
        object.__setattr__(self, "col_supports", tuple(tuple(c) for c in cols))
        if self.d_v is not None and any(len(c) != self.d_v for c in cols):
            raise ParameterError(f"declared d_v={self.d_v} but column degrees differ")
        if self.d_c is not None and any(len(r) != self.d_c for r in rows):
            raise ParameterError(f"declared d_c={self.d_c} but row degrees differ")
        if self.d_v is not None and self.d_c is not None and self.n * self.d_v != self.m * self.d_c:
            raise ParameterError("n*d_v must equal m*d_c")

    @classmethod
    def from_matrix(cls, H) -> "Code":
        H = np.asarray(H) % 2
        rows = [tuple(np.flatnonzero(h)) for h in H]
        return cls(n=H.shape[1], row_supports=tuple(rows))

    @property
    def m(self) -> int:
        return len(self.row_supports)

    @property
    def num_edges(self) -> int:
        return sum(len(r) for r in self.row_supports)

    @property
    def check_ratio(self) -> float:
        return self.m / self.n

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Factor-graph edges as (variable, check) pairs, check-major order."""
        return [(i, j) for j, r in enumerate(self.row_supports) for i in r]

    @cached_property
    def H(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        for j, r in enumerate(self.row_supports):
            H[j, list(r)] = 1
        return H

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(save_alist(self).encode()).hexdigest()

    def variable_degree(self) -> int | None:
        """Common column degree, or None if the code is not variable-regular."""
        degs = {len(c) for c in self.col_supports}
        return degs.pop() if len(degs) == 1 else None

    def syndrome(self, word) -> np.ndarray:
        word = np.asarray(word, dtype=np.int64)
        if word.shape != (self.n,):
            raise ParameterError(f"word length {word.shape} does not match n={self.n}")
        return (self.H.astype(np.int64) @ word) % 2

    def is_codeword(self, word) -> bool:
        return not self.syndrome(word).any()

    def neighborhood(self, variables: Iterable[int]) -> set[int]:
        """Checks adjacent to at least one of ``variables``."""
        out: set[int] = set()
        for i in variables:
            out.update(self.col_supports[i])
        return out

    def codewords(self, limit: int = 1 << 16) -> np.ndarray:
        """All codewords by enumeration of 2^n words (small codes only)."""
        if (1 << self.n) > limit:
            raise TooLargeError(f"2^{self.n} words exceed enumeration limit {limit}")
        words = ((np.arange(1 << self.n)[:, None] >> np.arange(self.n)) & 1).astype(np.int64)
        ok = ~((words @ self.H.T.astype(np.int64)) % 2).any(axis=1)
        return words[ok]


def as_word(bits, n: int) -> np.ndarray:
    """Validate a 0/1 vector of length n and return it as int8."""
    w = np.asarray(bits)
    if w.shape != (n,):
        raise ParameterError(f"word has shape {w.shape}, expected ({n},)")
    if not np.isin(w, (0, 1)).all():
        raise ParameterError("word entries must be 0 or 1")
    return w.astype(np.int8)


def generate_regular_ldpc(n: int, d_v: int, d_c: int, seed: int, max_attempts: int = 1_000) -> Code:
    """Random (d_v, d_c)-regular code by socket permutation.

    The variable sockets are shuffled and dealt to checks in blocks of d_c.
    Repeated variables inside a check are removed by swapping sockets with
    random other checks; an attempt whose repair stalls is redrawn.
    """
    if n < 1 or d_v < 2 or d_c < 2:
        raise ParameterError("need n >= 1, d_v >= 2, d_c >= 2")
    if (n * d_v) % d_c:
        raise ParameterError(f"d_c={d_c} does not divide n*d_v={n * d_v}")
    if d_c > n:
        raise ParameterError(f"d_c={d_c} exceeds n={n}; a check cannot touch distinct variables")
    m = n * d_v // d_c
    rng = np.random.default_rng(seed)
    sockets = np.repeat(np.arange(n), d_v)
    for _ in range(max_attempts):
        rows = rng.permutation(sockets).reshape(m, d_c)
        if _repair_rows(rows, rng, swaps=50 * m * d_c):
            srt = np.sort(rows, axis=1)
            return Code(n=n, row_supports=tuple(map(tuple, srt.tolist())), d_v=d_v, d_c=d_c)
    raise GenerationError(
        f"no simple ({d_v},{d_c}) graph with n={n} after {max_attempts} attempts (seed={seed})"
    )


def _repair_rows(rows: np.ndarray, rng: np.random.Generator, swaps: int) -> bool:
    """Swap sockets in place until no row repeats a variable; False if out of swaps."""
    m = rows.shape[0]
    for _ in range(swaps):
        srt = np.sort(rows, axis=1)
        bad = np.flatnonzero((srt[:, 1:] == srt[:, :-1]).any(axis=1))
        if not bad.size:
            return True
        r = int(bad[0])
        vals, counts = np.unique(rows[r], return_counts=True)
        a = int(np.flatnonzero(rows[r] == vals[counts > 1][0])[0])
        s = int(rng.integers(m))
        b = int(rng.integers(rows.shape[1]))
        u, v = rows[r, a], rows[s, b]
        if s == r or v in rows[r] or u in rows[s]:
            continue
        rows[r, a], rows[s, b] = v, u
    return False


def girth(code: Code) -> float:
    """Length of the shortest cycle in the factor graph (math.inf for forests)."""
    # nodes: variables 0..n-1, checks n..n+m-1
    n = code.n
    adj = [[n + j for j in c] for c in code.col_supports] + [list(r) for r in code.row_supports]
    best = math.inf
    for root in range(n):
        dist = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            if 2 * dist[u] + 1 >= best:
                break
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    queue.append(v)
                elif parent[u] != v:
                    best = min(best, dist[u] + dist[v] + 1)
    return best


def check_expansion(code: Code, alpha: float, delta: float) -> bool:
    """Exhaustively decide whether every variable set F with |F| <= alpha*n
    has |N(F)| >= delta * d_v * |F|."""
    if not (0 < alpha <= 1 and 0 < delta <= 1):
        raise ParameterError("alpha and delta must lie in (0, 1]")
    d_v = code.d_v or code.variable_degree()
    if d_v is None:
        raise ParameterError("expansion check needs a variable-regular code")
    kmax = math.floor(alpha * code.n + 1e-12)
    if kmax < 1:
        return True
    total = sum(math.comb(code.n, k) for k in range(1, kmax + 1))
    if code.n > EXPANSION_MAX_N or kmax > EXPANSION_MAX_SUBSET or total > EXPANSION_MAX_SUBSETS:
        raise TooLargeError(
            f"exact expansion check refused: n={code.n}, max subset {kmax}, {total} subsets"
        )
    masks = [sum(1 << j for j in c) for c in code.col_supports]
    need = delta * d_v

    # depth-first over increasing index tuples, carrying the neighbor union
    def extend(start: int, size: int, union: int) -> bool:
        for i in range(start, code.n):
            u = union | masks[i]
            if bin(u).count("1") < need * (size + 1) - 1e-12:
                return False
            if size + 1 < kmax and not extend(i + 1, size + 1, u):
                return False
        return True

    return extend(0, 0, 0)


# --------------------------------------------------------------------------
# alist I/O


def save_alist(code: Code) -> str:
    cols, rows = code.col_supports, code.row_supports
    max_col = max((len(c) for c in cols), default=0)
    max_row = max(len(r) for r in rows)

    def padded(items: Sequence[int], width: int) -> str:
        vals = [i + 1 for i in items] + [0] * (width - len(items))
        return " ".join(map(str, vals))

    lines = [
        f"{code.n} {code.m}",
        f"{max_col} {max_row}",
        " ".join(str(len(c)) for c in cols),
        " ".join(str(len(r)) for r in rows),
    ]
    lines += [padded(c, max_col) for c in cols]
    lines += [padded(r, max_row) for r in rows]
    return "\n".join(lines) + "\n"


def load_alist(text: str) -> Code:
    lines = [ln for ln in text.splitlines()]
    # keep original numbering for messages; skip blank lines
    numbered = [(k + 1, ln.split()) for k, ln in enumerate(lines) if ln.strip()]
    pos = 0

    def take(what: str, count: int | None = None) -> tuple[int, list[int]]:
        nonlocal pos
        if pos >= len(numbered):
            last = numbered[-1][0] if numbered else 0
            raise AlistParseError(last + 1, f"unexpected end of file, expected {what}")
        line_no, toks = numbered[pos]
        pos += 1
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise AlistParseError(line_no, f"non-integer token in {what}") from None
        if count is not None and len(vals) != count:
            raise AlistParseError(line_no, f"{what}: expected {count} entries, found {len(vals)}")
        return line_no, vals

    ln, (n, m) = take("header 'n m'", 2)
    if n < 1 or m < 0:
        raise AlistParseError(ln, "n must be positive and m non-negative")
    ln_max, (max_col, max_row) = take("max degrees", 2)
    ln_cd, col_deg = take("column degree list", n)
    ln_rd, row_deg = take("row degree list", m)
    if max(col_deg, default=0) > max_col or max(row_deg, default=0) > max_row:
        raise AlistParseError(ln_max, "a degree exceeds the declared maximum")

    def adjacency(count: int, degs: list[int], bound: int, what: str) -> list[list[int]]:
        out = []
        for k in range(count):
            line_no, vals = take(f"{what} adjacency {k + 1}")
            nz = [v for v in vals if v != 0]
            if len(nz) != degs[k]:
                raise AlistParseError(line_no, f"{what} {k + 1}: degree {degs[k]} but {len(nz)} entries")
            if any(not 1 <= v <= bound for v in nz):
                raise AlistParseError(line_no, f"{what} {k + 1}: index out of range 1..{bound}")
            out.append([v - 1 for v in nz])
        return out

    col_adj = adjacency(n, col_deg, m, "column")
    first_row_line = numbered[pos][0] if pos < len(numbered) else None
    row_adj = adjacency(m, row_deg, n, "row")
    from_cols = {(i, j) for i, c in enumerate(col_adj) for j in c}
    from_rows = {(i, j) for j, r in enumerate(row_adj) for i in r}
    if from_cols != from_rows:
        raise AlistParseError(first_row_line or ln, "row and column adjacency lists disagree")
    if pos != len(numbered):
        raise AlistParseError(numbered[pos][0], "trailing content after row adjacency lists")
    try:
        return Code(n=n, row_supports=tuple(tuple(r) for r in row_adj))
    except ParameterError as exc:
        raise AlistParseError(first_row_line or ln, str(exc)) from None


def regular_degrees(code: Code) -> tuple[int | None, int | None]:
    dv = code.variable_degree()
    dcs = {len(r) for r in code.row_supports}
    return dv, (dcs.pop() if len(dcs) == 1 else None)


def random_small_code(rng: np.random.Generator, n: int, m: int, max_row_deg: int | None = None) -> Code:
    """Random code with m checks of degree >= 2 (test and oracle helper)."""
    max_row_deg = min(max_row_deg or n, n)
    rows = []
    for _ in range(m):
        d = int(rng.integers(2, max_row_deg + 1))
        rows.append(tuple(sorted(rng.choice(n, size=d, replace=False).tolist())))
    return Code(n=n, row_supports=tuple(rows))


def words_of_weight(n: int, w: int) -> Iterable[tuple[int, ...]]:
    return itertools.combinations(range(n), w)
