"""Arithmetic analysis of frequency vectors.

Everything the scheme needs to know about the frequency vector omega0 =
(1, varpi) is derived from the function

    psi(Q) = sup { 1/|k . omega0| : k integer, 0 < |k|_1 <= Q },

its companion delta(Q) = Q * psi(Q), the generalized inverse deltaStar, the
Bruno-Russmann tail integral, and unimodular bases of rational approximations
with controlled denominators.

All suprema over lattice vectors are exact maxima over the finite candidate
set; enumeration budgets are explicit and overruns raise BudgetError instead
of silently truncating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import (
    BasisSearchError,
    BudgetError,
    ConditionUnsatisfiableError,
    DomainError,
    NeedsLargerTableError,
    ResonanceError,
)

__all__ = [
    "FrequencyVector",
    "RationalVector",
    "RationalBasis",
    "ArithmeticProfile",
    "EnumerationBudget",
    "preset_frequency",
    "psi",
    "psi_argmin",
    "build_profile",
    "rational_basis",
]

_PRESETS = {
    "golden": lambda: (1.0, (math.sqrt(5.0) - 1.0) / 2.0),
    "sqrt2": lambda: (1.0, math.sqrt(2.0) - 1.0),
    "cubic-root": lambda: (1.0, 2.0 ** (1.0 / 3.0) - 1.0, 2.0 ** (2.0 / 3.0) - 1.0),
}


def preset_frequency(name: str) -> "FrequencyVector":
    try:
        values = _PRESETS[name]()
    except KeyError:
        raise DomainError(
            f"unknown frequency preset {name!r}; available: {sorted(_PRESETS)}"
        ) from None
    return FrequencyVector(values)


@dataclass(frozen=True)
class FrequencyVector:
    """Frequency vector omega0 = (1, varpi) with |varpi_j| <= 1."""

    values: tuple

    def __init__(self, values):
        vals = tuple(float(v) for v in values)
        if len(vals) < 2:
            raise DomainError("frequency vector needs dimension n >= 2")
        if vals[0] != 1.0:
            raise DomainError("first frequency component must be exactly 1")
        if any(abs(v) > 1.0 for v in vals[1:]):
            raise DomainError("remaining frequency components must lie in [-1, 1]")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class EnumerationBudget:
    """Caps for lattice enumeration and basis search."""

    kmax: int = 200
    max_points: int = 100_000_000
    basis_top_k: int = 128
    basis_max_dets: int = 500_000
    completion_window: int = 64


# ---------------------------------------------------------------------------
# psi by exact enumeration
# ---------------------------------------------------------------------------

def _canonical_sign(k: tuple) -> tuple:
    for x in k:
        if x != 0:
            return k if x > 0 else tuple(-y for y in k)
    return k


def _enumerate_divisors(omega: FrequencyVector, Q: int, budget: EnumerationBudget):
    """Yield (|k.omega|, k) for all 0 < |k|_1 <= Q, k canonical up to sign.

    Returns arrays (divisors, l1norms, kvecs). Chunked so memory stays flat.
    """
    n = omega.n
    if n > 4:
        raise BudgetError(f"lattice enumeration capped at n <= 4, got n = {n}")
    if Q > budget.kmax:
        raise BudgetError(
            f"lattice enumeration capped at |k|_1 <= {budget.kmax}, got Q = {Q}"
        )
    total = (2 * Q + 1) ** n
    if total > budget.max_points:
        raise BudgetError(
            f"enumeration of {total} lattice points exceeds budget {budget.max_points}"
        )
    axes = [np.arange(-Q, Q + 1, dtype=np.int64)] * n
    grid = np.meshgrid(*axes, indexing="ij")
    K = np.stack([g.ravel() for g in grid], axis=1)
    l1 = np.abs(K).sum(axis=1)
    mask = (l1 > 0) & (l1 <= Q)
    # canonical half-lattice: first nonzero component positive
    first_nz = np.zeros(len(K), dtype=np.int64)
    undecided = np.ones(len(K), dtype=bool)
    for j in range(n):
        col = K[:, j]
        newly = undecided & (col != 0)
        first_nz[newly] = col[newly]
        undecided &= col == 0
    mask &= first_nz > 0
    K = K[mask]
    l1 = l1[mask]
    div = np.abs(K @ omega.as_array())
    return div, l1, K


def psi_argmin(omega: FrequencyVector, Q: int,
               budget: EnumerationBudget | None = None):
    """Exact psi(Q) together with its canonical minimizing k.

    Returns (value, k) where value = 1/min|k.omega| (math.inf when an exact
    integer relation exists, with k the resonant witness).  Ties are broken
    by smaller |k|_1, then lexicographically, on sign-canonical vectors.
    """
    budget = budget or EnumerationBudget()
    if Q < 1:
        raise DomainError(f"psi requires Q >= 1, got {Q}")
    div, l1, K = _enumerate_divisors(omega, int(Q), budget)
    dmin = div.min()
    where = np.flatnonzero(div == dmin)
    cands = sorted((int(l1[i]), tuple(int(x) for x in K[i])) for i in where)
    k_best = cands[0][1]
    if dmin == 0.0:
        return math.inf, k_best
    return 1.0 / float(dmin), k_best


def psi(omega: FrequencyVector, Q: int,
        budget: EnumerationBudget | None = None) -> float:
    """psi(Q) = sup of 1/|k.omega| over 0 < |k|_1 <= Q (math.inf on resonance)."""
    return psi_argmin(omega, Q, budget)[0]


# ---------------------------------------------------------------------------
# bulk psi tables
# ---------------------------------------------------------------------------

def _psi_table_n2(omega: FrequencyVector, qmax: int) -> np.ndarray:
    """Exact psi on 1..qmax for n = 2 via nearest-integer candidates.

    For k = (k1, k2), |k1 + k2*w| with w the second component: for each m =
    |k2| the two closest integers -floor(m w), -ceil(m w) dominate every other
    k1 (any other choice has divisor >= 1 and is dominated by k = (1, 0)).
    """
    w = omega.values[1]
    m = np.arange(1, qmax + 1, dtype=np.int64)
    mw = m * w
    lo = np.floor(mw)
    hi = lo + 1.0
    cand_cost = np.concatenate([
        np.array([1], dtype=np.int64),              # k = (1, 0)
        m + np.abs(lo).astype(np.int64),
        m + np.abs(hi).astype(np.int64),
    ])
    cand_div = np.concatenate([
        np.array([1.0]),
        np.abs(mw - lo),
        np.abs(hi - mw),
    ])
    keep = cand_cost <= qmax
    cost = cand_cost[keep]
    div = cand_div[keep]
    order = np.argsort(cost, kind="stable")
    cost, div = cost[order], div[order]
    best = np.full(qmax + 1, np.inf)
    np.minimum.at(best, cost, div)
    run = np.minimum.accumulate(best[1:])
    table = np.empty(qmax + 1)
    table[0] = np.nan
    with np.errstate(divide="ignore"):
        table[1:] = 1.0 / run
    return table


def _psi_table_generic(omega: FrequencyVector, qmax: int,
                       budget: EnumerationBudget) -> np.ndarray:
    div, l1, _ = _enumerate_divisors(omega, qmax, budget)
    best = np.full(qmax + 1, np.inf)
    np.minimum.at(best, l1, div)
    run = np.minimum.accumulate(best[1:])
    table = np.empty(qmax + 1)
    table[0] = np.nan
    with np.errstate(divide="ignore"):
        table[1:] = 1.0 / run
    return table


# ---------------------------------------------------------------------------
# arithmetic profile
# ---------------------------------------------------------------------------

@dataclass
class ArithmeticProfile:
    """Sampled psi/delta tables for one frequency vector.

    psi_samples[Q] and delta_samples[Q] are valid for 1 <= Q <= qmax
    (index 0 is a NaN placeholder).  delta is strictly increasing, which
    makes deltaStar a table lookup.
    """

    omega: FrequencyVector
    qmax: int
    psi_samples: np.ndarray
    delta_samples: np.ndarray
    tail_grid_per_decade: int = 256
    _tail_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.omega.n

    def psi_at(self, Q: int) -> float:
        self._check_range(Q)
        return float(self.psi_samples[Q])

    def delta_at(self, Q: int) -> float:
        self._check_range(Q)
        return float(self.delta_samples[Q])

    def _check_range(self, Q) -> None:
        if not 1 <= Q <= self.qmax:
            raise NeedsLargerTableError(
                f"Q = {Q} outside sampled range 1..{self.qmax}"
            )

    def delta_star(self, x: float) -> int:
        """Largest sampled Q with delta(Q) <= x."""
        d1 = self.delta_samples[1]
        if x < d1:
            raise DomainError(f"deltaStar undefined for x = {x} < delta(1) = {d1}")
        if x >= self.delta_samples[self.qmax]:
            if x == self.delta_samples[self.qmax]:
                return self.qmax
            raise NeedsLargerTableError(
                f"deltaStar({x}) beyond sampled delta({self.qmax}) = "
                f"{self.delta_samples[self.qmax]}"
            )
        # delta strictly increasing on 1..qmax
        idx = int(np.searchsorted(self.delta_samples[1:self.qmax + 1], x, "right"))
        return idx

    def br_tail(self, Q0: int, xcut: float | None = None,
                grid_per_decade: int | None = None) -> float:
        """Tail integral of 1/(x deltaStar(x)) from delta(Q0) to xcut.

        Composite trapezoid on a log-spaced grid.  xcut defaults to the
        largest sampled delta; the part beyond xcut is not integrated and is
        reported separately by `tail_term`.
        """
        self._check_range(Q0)
        a = float(self.delta_samples[Q0])
        b = float(self.delta_samples[self.qmax]) if xcut is None else float(xcut)
        if b < a:
            raise DomainError(f"integration cutoff {b} below delta(Q0) = {a}")
        if b == a:
            return 0.0
        gpd = grid_per_decade or self.tail_grid_per_decade
        decades = math.log10(b / a)
        npts = max(8, int(math.ceil(decades * gpd)) + 1)
        key = (Q0, b, npts)
        if key in self._tail_cache:
            return self._tail_cache[key]
        x = np.logspace(math.log10(a), math.log10(b), npts)
        x[0], x[-1] = a, b
        qs = np.searchsorted(self.delta_samples[1:self.qmax + 1], x, "right")
        qs = np.clip(qs, 1, self.qmax)
        f = 1.0 / (x * qs)
        val = float(np.trapezoid(f, x))
        self._tail_cache[key] = val
        return val

    def tail_term(self, Q0: int, xcut: float | None = None) -> float:
        """Full Q0-admissibility functional: 1/Q0 + (1/ln 2) * br_tail(Q0)."""
        return 1.0 / Q0 + self.br_tail(Q0, xcut) / math.log(2.0)

    def choose_q0(self, s: float, C: float) -> int:
        """Smallest sampled Q0 whose tail term is <= s / (2 C).

        The tail term is decreasing in Q0, so a binary search applies.  The
        integral is truncated at the sampled range; the result is therefore a
        within-table certificate (documented heuristic for the full tail).
        """
        if not (s > 0 and C > 0):
            raise DomainError("choose_q0 needs s > 0 and C > 0")
        thresh = s / (2.0 * C)
        lo, hi = 1, self.qmax
        if self.tail_term(hi) > thresh:
            raise ConditionUnsatisfiableError(
                f"no sampled Q0 <= {self.qmax} achieves tail <= {thresh:.3e}"
                f" (tail({self.qmax}) = {self.tail_term(hi):.3e})"
            )
        while lo < hi:
            mid = (lo + hi) // 2
            if self.tail_term(mid) <= thresh:
                hi = mid
            else:
                lo = mid + 1
        return lo


def build_profile(omega: FrequencyVector, qmax: int,
                  budget: EnumerationBudget | None = None) -> ArithmeticProfile:
    """Build the psi/delta tables on 1..qmax.

    n = 2 uses the exact nearest-integer reduction (no |k| cap); other
    dimensions enumerate the lattice within the configured budget.
    """
    budget = budget or EnumerationBudget()
    if qmax < 1:
        raise DomainError(f"profile needs qmax >= 1, got {qmax}")
    if omega.n == 2:
        psi_tab = _psi_table_n2(omega, qmax)
    else:
        psi_tab = _psi_table_generic(omega, qmax, budget)
    if not np.all(np.isfinite(psi_tab[1:])):
        Qbad = int(np.flatnonzero(~np.isfinite(psi_tab[1:]))[0]) + 1
        _, k = psi_argmin(omega, min(Qbad, budget.kmax), budget) \
            if Qbad <= budget.kmax else (math.inf, None)
        raise ResonanceError(
            f"frequency vector is resonant within |k|_1 <= {Qbad}"
            + (f", witness k = {k}" if k else "")
        )
    delta_tab = psi_tab * np.arange(qmax + 1, dtype=float)
    psi_ok = np.all(np.diff(psi_tab[1:]) >= 0.0)
    delta_ok = np.all(np.diff(delta_tab[1:]) > 0.0)
    if not (psi_ok and delta_ok):
        raise DomainError("profile tables violate monotonicity invariants")
    return ArithmeticProfile(omega=omega, qmax=qmax,
                             psi_samples=psi_tab, delta_samples=delta_tab)


# ---------------------------------------------------------------------------
# rational approximations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalVector:
    """Rational direction v = numerators / q with v[0] = 1 (so numerators[0] = q)."""

    numerators: tuple
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise DomainError(f"denominator must be >= 1, got {self.q}")
        if self.numerators[0] != self.q:
            raise DomainError("first component of q*v must equal q (v[0] = 1)")

    @property
    def n(self) -> int:
        return len(self.numerators)

    def as_floats(self) -> np.ndarray:
        return np.asarray(self.numerators, dtype=float) / float(self.q)

    def as_fractions(self) -> tuple:
        return tuple(Fraction(p, self.q) for p in self.numerators)

    def sup_error(self, omega: FrequencyVector) -> float:
        v = self.as_floats()
        return float(np.max(np.abs(omega.as_array() - v)))


@dataclass(frozen=True)
class RationalBasis:
    """n rational directions whose integer columns q_j v_j form a Z-basis."""

    omega: FrequencyVector
    Q: int
    vectors: tuple          # tuple[RationalVector], sorted by q ascending
    determinant: int
    errors: tuple           # recomputed sup-norm |omega - v_j|
    scores: tuple           # q_j * Q * error_j

    @property
    def n(self) -> int:
        return self.omega.n

    def columns(self) -> list:
        """Integer matrix columns q_j v_j."""
        return [list(v.numerators) for v in self.vectors]

    def max_score(self) -> float:
        return max(self.scores)


def _int_det(cols: list) -> int:
    """Exact determinant of an integer matrix given as a list of columns."""
    n = len(cols)
    m = [[cols[j][i] for j in range(n)] for i in range(n)]
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    det = 0
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        det += (-1) ** j * m[0][j] * _int_det(
            [[minor[i][c] for i in range(n - 1)] for c in range(n - 1)]
        )
    return det


def _extend_to_unimodular(c: list) -> list:
    """Columns of a unimodular matrix whose first column is the primitive c.

    Gcd elimination on a working copy of c, tracking the inverse operations
    on an identity matrix; the invariant M @ v = c holds throughout, and at
    the end v = +-e_i so M (up to sign/swap fixes) has first column c.
    """
    n = len(c)
    if math.gcd(*[abs(x) for x in c]) != 1:
        raise BasisSearchError(f"cannot complete non-primitive column {c}")
    v = list(c)
    M = [[1 if i == j else 0 for j in range(n)] for i in range(n)]

    def col_add(dst, src, t):
        for i in range(n):
            M[i][dst] += t * M[i][src]

    while sum(1 for x in v if x != 0) > 1:
        nz = [i for i in range(n) if v[i] != 0]
        i0 = min(nz, key=lambda i: abs(v[i]))
        for j in nz:
            if j == i0:
                continue
            t = v[j] // v[i0]
            if t != 0:
                v[j] -= t * v[i0]
                col_add(i0, j, t)
    pos = next(i for i in range(n) if v[i] != 0)
    if v[pos] == -1:
        for i in range(n):
            M[i][pos] = -M[i][pos]
    elif v[pos] != 1:
        raise BasisSearchError("gcd elimination did not reach a unit")
    cols = [[M[i][j] for i in range(n)] for j in range(n)]
    cols[0], cols[pos] = cols[pos], cols[0]
    return cols


def _candidate_table(omega: FrequencyVector, qcap: int):
    """Nearest-integer approximations for q = 1..qcap.

    Returns (qs, numerators, errors); numerators[q-1] is the integer vector
    q*v with first entry q.
    """
    n = omega.n
    w = omega.as_array()[1:]
    qs = np.arange(1, qcap + 1, dtype=np.int64)
    prods = qs[:, None] * w[None, :]
    nums = np.rint(prods).astype(np.int64)
    errs = np.max(np.abs(w[None, :] - nums / qs[:, None].astype(float)), axis=1) \
        if n > 1 else np.zeros(qcap)
    return qs, nums, errs


def rational_basis(omega: FrequencyVector, Q: int,
                   profile: ArithmeticProfile | None = None,
                   c_den: float = 1.0,
                   budget: EnumerationBudget | None = None) -> RationalBasis:
    """Best unimodular system of rational approximations at scale Q.

    Candidates are nearest-integer vectors round(q*omega)/q for q up to
    c_den * psi(Q); ranked by the certificate score q * Q * |omega - v|, the
    best-ranked unimodular subset wins.  If no ranked subset is unimodular, a
    gcd-elimination completion of the best primitive candidate is used and
    its auxiliary columns are score-reduced by shifts along the first column.
    """
    budget = budget or EnumerationBudget()
    if Q < 1:
        raise DomainError(f"rational_basis needs Q >= 1, got {Q}")
    n = omega.n
    if profile is not None and Q <= profile.qmax:
        psi_val = profile.psi_at(Q)
    else:
        psi_val, _ = psi_argmin(omega, Q, budget)
    if math.isinf(psi_val):
        _, k = psi_argmin(omega, min(Q, budget.kmax), budget)
        raise ResonanceError(
            f"frequency vector is resonant within |k|_1 <= {Q}, witness k = {k}"
        )
    qcap = max(n, int(math.ceil(c_den * psi_val)))
    qs, nums, errs = _candidate_table(omega, qcap)
    if np.any(errs == 0.0):
        qres = int(qs[np.flatnonzero(errs == 0.0)[0]])
        raise ResonanceError(
            f"omega is rational with denominator {qres}: exact approximation at q = {qres}"
        )
    scores = qs.astype(float) * float(Q) * errs
    order = np.lexsort((qs, scores))

    def column(idx: int) -> list:
        return [int(qs[idx])] + [int(x) for x in nums[idx]]

    # ranked subset search, widening the pool geometrically
    checked = 0
    pool_sizes = [k for k in (8, 16, 32, 64, budget.basis_top_k) if k >= n]
    seen = 0
    for pool in pool_sizes:
        pool = min(pool, len(order))
        for last in range(max(n - 1, seen), pool):
            for rest in combinations(range(last), n - 1):
                idxs = [order[i] for i in (*rest, last)]
                cols = [column(i) for i in idxs]
                checked += 1
                if checked > budget.basis_max_dets:
                    raise BasisSearchError(
                        f"unimodular subset search exceeded {budget.basis_max_dets} "
                        "determinant evaluations"
                    )
                if abs(_int_det(cols)) == 1:
                    return _assemble(omega, Q, cols)
        seen = pool
        if pool == len(order):
            break

    # completion fallback from the best primitive candidate
    for i in order:
        col = column(int(i))
        if math.gcd(*[abs(x) for x in col]) == 1:
            cols = _extend_to_unimodular(col)
            cols = _reduce_completion(omega, Q, cols, budget.completion_window)
            return _assemble(omega, Q, cols)
    raise BasisSearchError("no primitive rational candidate available")


def _reduce_completion(omega: FrequencyVector, Q: int, cols: list,
                       window: int) -> list:
    """Improve auxiliary columns by integer shifts along the first column."""
    w = omega.as_array()
    c0 = cols[0]
    out = [c0]
    for c in cols[1:]:
        best = None
        for m in range(-window, window + 1):
            cand = [c[i] + m * c0[i] for i in range(len(c))]
            if cand[0] < 1:
                continue
            err = float(np.max(np.abs(w - np.asarray(cand, float) / cand[0])))
            key = (cand[0] * Q * err, cand[0], abs(m))
            if best is None or key < best[0]:
                best = (key, cand)
        if best is None:
            # force positive first entry with larger shifts
            m = (1 - c[0] + c0[0] - 1) // c0[0]
            cand = [c[i] + m * c0[i] for i in range(len(c))]
            best = (None, cand)
        out.append(best[1])
    return out


def _assemble(omega: FrequencyVector, Q: int, cols: list) -> RationalBasis:
    det = _int_det(cols)
    if abs(det) != 1:
        raise BasisSearchError(f"assembled basis has determinant {det}")
    fixed = []
    for c in cols:
        if c[0] < 0:
            c = [-x for x in c]
        if c[0] == 0:
            raise BasisSearchError("basis column has zero first component")
        fixed.append(c)
    fixed.sort(key=lambda c: (c[0], c))
    det = _int_det(fixed)
    if abs(det) != 1:
        raise BasisSearchError(f"sign/sort normalization broke unimodularity ({det})")
    vectors = tuple(
        RationalVector(numerators=tuple(c), q=int(c[0])) for c in fixed
    )
    errors = tuple(v.sup_error(omega) for v in vectors)
    scores = tuple(v.q * Q * e for v, e in zip(vectors, errors))
    return RationalBasis(omega=omega, Q=int(Q), vectors=vectors,
                         determinant=int(det), errors=errors, scores=scores)
