"""Sparse Fourier-Taylor series and the operations the scheme needs.

A term is  c * e^{2 pi i k.theta} * I^alpha * x^beta  with k in Z^n,
alpha, beta in N^n, and x = omega - omega0 the frequency-parameter offset.
Keys are flat tuples (k_1..k_n, alpha_1..alpha_n, beta_1..beta_n).

Design rules:
  * objects are immutable; every operation returns a new series;
  * arithmetic is exact on the stored terms -- truncation is always an
    explicit, separately returned remainder, so discarded mass can be
    charged to an error ledger;
  * norms are coefficient majorants
        sum |c| e^{2 pi s |k|_1} r^{|alpha|_1} h^{|beta|_1},
    which dominate the sup on the corresponding analyticity domain and are
    submultiplicative, so every estimate used by the step holds termwise;
  * mode filters (averages along rational directions) are exact integer
    tests on k . (q v), never floating-point comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diophantine import FrequencyVector, RationalVector
from .errors import DomainError, HomologicalError, RealityError, TruncationBudgetError
from .parampoly import ParamPoly, ParamVector

__all__ = [
    "DomainParams",
    "SeriesCaps",
    "FourierTaylor",
    "DiscardLedger",
    "ParamHamiltonian",
    "parampoly_to_series",
    "series_to_parampoly",
    "normal_form_series",
    "action_linear_series",
]

_CHUNK_PAIRS = 2_000_000


@dataclass(frozen=True)
class DomainParams:
    """Analyticity domain: angle strip s, action radius r, parameter radius h."""

    s: float
    r: float
    h: float

    def __post_init__(self):
        if not (self.s > 0 and self.r > 0 and self.h > 0):
            raise DomainError(f"domain radii must be positive: {self}")

    def shrink(self, *, ds: float = 0.0, r_factor: float = 1.0,
               h_factor: float = 1.0) -> "DomainParams":
        return DomainParams(self.s - ds, self.r * r_factor, self.h * h_factor)


@dataclass(frozen=True)
class SeriesCaps:
    """Truncation caps: |k|_1 <= cutoffK, |alpha|_1 <= degI, |beta|_1 <= degW."""

    cutoffK: int
    degI: int
    degW: int

    def __post_init__(self):
        if self.cutoffK < 0 or self.degI < 0 or self.degW < 0:
            raise DomainError(f"caps must be nonnegative: {self}")


def _pack_rows(keys: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """Row -> sum_j keys[:, j] * mult[j], computed column-wise (int64)."""
    packed = keys[:, 0] * mult[0]
    for j in range(1, keys.shape[1]):
        packed = packed + keys[:, j] * mult[j]
    return packed


def _pack_mult(keys: np.ndarray, extra: int = 0):
    """Base multipliers packing rows of `keys` (entries widened by `extra`)
    into single int64 values, or None if they would overflow.

    With |entry| <= m the map row -> sum_j entry_j * (2m+1)^(ncols-1-j) is
    injective and preserves lexicographic row order, so one integer sort
    replaces a multi-key lexsort.
    """
    ncols = keys.shape[1]
    m = (int(np.abs(keys).max()) if keys.size else 0) + extra
    span = 2 * m + 1
    if span ** ncols >= 2 ** 62:
        return None
    return span ** np.arange(ncols - 1, -1, -1, dtype=np.int64)


def _combine(keys: np.ndarray, vals: np.ndarray):
    """Sum values on duplicate rows; rows returned in lexicographic order."""
    if len(keys) == 0:
        return keys, vals
    mult = _pack_mult(keys)
    if mult is not None:
        packed = _pack_rows(keys, mult)
        order = np.argsort(packed, kind="stable")
        p2 = packed[order]
        v2 = vals[order]
        if len(p2) == 1:
            return keys[order], v2
        starts = np.concatenate(([0], np.flatnonzero(p2[1:] != p2[:-1]) + 1))
        return keys[order[starts]], np.add.reduceat(v2, starts)
    order = np.lexsort(keys.T[::-1])
    k2 = keys[order]
    v2 = vals[order]
    if len(k2) == 1:
        return k2, v2
    changed = np.any(k2[1:] != k2[:-1], axis=1)
    starts = np.concatenate(([0], np.flatnonzero(changed) + 1))
    return k2[starts], np.add.reduceat(v2, starts)


class FourierTaylor:
    """Immutable sparse series; see module docstring for the term model."""

    __slots__ = ("n", "keys", "vals", "_dict")

    def __init__(self, n: int, keys=None, vals=None):
        if n < 1:
            raise DomainError(f"series dimension must be >= 1, got {n}")
        object.__setattr__(self, "n", int(n))
        if keys is None:
            keys = np.zeros((0, 3 * n), dtype=np.int64)
            vals = np.zeros((0,), dtype=np.complex128)
        keys = np.ascontiguousarray(np.asarray(keys, dtype=np.int64))
        vals = np.ascontiguousarray(np.asarray(vals, dtype=np.complex128))
        if keys.ndim != 2 or keys.shape[1] != 3 * n or len(keys) != len(vals):
            raise DomainError("malformed term arrays")
        if np.any(keys[:, n:] < 0):
            raise DomainError("Taylor exponents must be nonnegative")
        keys, vals = _combine(keys, vals)
        nz = vals != 0.0
        keys, vals = keys[nz], vals[nz]
        keys.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "vals", vals)
        object.__setattr__(self, "_dict", None)

    def __setattr__(self, *a):
        raise AttributeError("FourierTaylor is immutable")

    # --- constructors ------------------------------------------------------
    @staticmethod
    def zero(n: int) -> "FourierTaylor":
        return FourierTaylor(n)

    @staticmethod
    def from_terms(n: int, terms: dict) -> "FourierTaylor":
        if not terms:
            return FourierTaylor(n)
        keys = np.array(list(terms.keys()), dtype=np.int64).reshape(-1, 3 * n)
        vals = np.array(list(terms.values()), dtype=np.complex128)
        return FourierTaylor(n, keys, vals)

    @staticmethod
    def monomial(n: int, k=None, alpha=None, beta=None,
                 coeff: complex = 1.0) -> "FourierTaylor":
        k = tuple(k) if k is not None else (0,) * n
        alpha = tuple(alpha) if alpha is not None else (0,) * n
        beta = tuple(beta) if beta is not None else (0,) * n
        if len(k) != n or len(alpha) != n or len(beta) != n:
            raise DomainError("monomial index length mismatch")
        return FourierTaylor.from_terms(n, {k + alpha + beta: complex(coeff)})

    @staticmethod
    def constant(n: int, value: complex) -> "FourierTaylor":
        return FourierTaylor.monomial(n, coeff=value)

    # --- structure -----------------------------------------------------------
    @property
    def num_terms(self) -> int:
        return len(self.vals)

    @property
    def is_zero(self) -> bool:
        return len(self.vals) == 0

    def _as_dict(self) -> dict:
        d = self.__getattribute__("_dict")
        if d is None:
            d = {tuple(map(int, row)): complex(v)
                 for row, v in zip(self.keys, self.vals)}
            object.__setattr__(self, "_dict", d)
        return d

    def get(self, k=None, alpha=None, beta=None) -> complex:
        n = self.n
        k = tuple(k) if k is not None else (0,) * n
        alpha = tuple(alpha) if alpha is not None else (0,) * n
        beta = tuple(beta) if beta is not None else (0,) * n
        return self._as_dict().get(k + alpha + beta, 0.0 + 0.0j)

    def k_part(self) -> np.ndarray:
        return self.keys[:, : self.n]

    def alpha_part(self) -> np.ndarray:
        return self.keys[:, self.n: 2 * self.n]

    def beta_part(self) -> np.ndarray:
        return self.keys[:, 2 * self.n:]

    def equals(self, other: "FourierTaylor", tol: float = 0.0) -> bool:
        if self.n != other.n:
            return False
        if tol == 0.0:
            return (self.keys.shape == other.keys.shape
                    and np.array_equal(self.keys, other.keys)
                    and np.array_equal(self.vals, other.vals))
        return (self - other).max_abs_coeff() <= tol

    def max_abs_coeff(self) -> float:
        return float(np.max(np.abs(self.vals))) if len(self.vals) else 0.0

    # --- linear operations -----------------------------------------------------
    def _check_same(self, other: "FourierTaylor"):
        if self.n != other.n:
            raise DomainError("series dimension mismatch")

    def __add__(self, other: "FourierTaylor") -> "FourierTaylor":
        self._check_same(other)
        keys = np.concatenate([self.keys, other.keys])
        vals = np.concatenate([self.vals, other.vals])
        return FourierTaylor(self.n, keys, vals)

    def __sub__(self, other: "FourierTaylor") -> "FourierTaylor":
        return self + other.scale(-1.0)

    def __neg__(self) -> "FourierTaylor":
        return self.scale(-1.0)

    def scale(self, c: complex) -> "FourierTaylor":
        return FourierTaylor(self.n, self.keys, self.vals * c)

    # --- products ---------------------------------------------------------------
    def mul(self, other: "FourierTaylor") -> "FourierTaylor":
        """Exact product (indices add, coefficients multiply)."""
        self._check_same(other)
        if self.is_zero or other.is_zero:
            return FourierTaylor.zero(self.n)
        a, b = (self, other) if self.num_terms >= other.num_terms else (other, self)
        ta, tb = a.num_terms, b.num_terms
        rows = max(1, _CHUNK_PAIRS // ta)
        parts_k, parts_v = [], []
        # Pack both factors once so each chunk deduplicates scalar int64
        # codes; product rows (index sums) stay within the widened base.
        mult = _pack_mult(a.keys, extra=int(np.abs(b.keys).max()))
        if mult is not None:
            pa = _pack_rows(a.keys, mult)
            pb = _pack_rows(b.keys, mult)
            for lo in range(0, tb, rows):
                pbc = pb[lo: lo + rows]
                bv = b.vals[lo: lo + rows]
                P = (pbc[:, None] + pa[None, :]).reshape(-1)
                V = (bv[:, None] * a.vals[None, :]).reshape(-1)
                order = np.argsort(P, kind="stable")
                p2 = P[order]
                starts = np.concatenate(
                    ([0], np.flatnonzero(p2[1:] != p2[:-1]) + 1))
                flat = order[starts]
                parts_k.append(a.keys[flat % ta] + b.keys[lo + flat // ta])
                parts_v.append(np.add.reduceat(V[order], starts))
        else:
            for lo in range(0, tb, rows):
                bk = b.keys[lo: lo + rows]
                bv = b.vals[lo: lo + rows]
                K = (a.keys[None, :, :] + bk[:, None, :]).reshape(-1, 3 * self.n)
                V = (a.vals[None, :] * bv[:, None]).reshape(-1)
                K, V = _combine(K, V)
                parts_k.append(K)
                parts_v.append(V)
        keys = np.concatenate(parts_k)
        vals = np.concatenate(parts_v)
        return FourierTaylor(self.n, keys, vals)

    # --- derivatives -------------------------------------------------------------
    def dtheta(self, axis: int) -> "FourierTaylor":
        """d/d theta_axis = (2 pi i k_axis) *."""
        factor = 2j * math.pi * self.keys[:, axis].astype(np.float64)
        return FourierTaylor(self.n, self.keys, self.vals * factor)

    def dI(self, axis: int) -> "FourierTaylor":
        col = self.n + axis
        mask = self.keys[:, col] >= 1
        keys = self.keys[mask].copy()
        vals = self.vals[mask] * keys[:, col].astype(np.float64)
        keys[:, col] -= 1
        return FourierTaylor(self.n, keys, vals)

    def dx(self, axis: int) -> "FourierTaylor":
        col = 2 * self.n + axis
        mask = self.keys[:, col] >= 1
        keys = self.keys[mask].copy()
        vals = self.vals[mask] * keys[:, col].astype(np.float64)
        keys[:, col] -= 1
        return FourierTaylor(self.n, keys, vals)

    def poisson(self, other: "FourierTaylor") -> "FourierTaylor":
        """{f, g} = sum_a (df/dtheta_a dg/dI_a - df/dI_a dg/dtheta_a).

        With this orientation the Hamiltonian flow of F is
        dI/dt = -dF/dtheta, dtheta/dt = dF/dI, and d(g o X^t)/dt = {g, F}.
        """
        self._check_same(other)
        acc = FourierTaylor.zero(self.n)
        for a in range(self.n):
            acc = acc + self.dtheta(a).mul(other.dI(a))
            acc = acc - self.dI(a).mul(other.dtheta(a))
        return acc

    # --- mode filters ---------------------------------------------------------
    def average_full(self) -> "FourierTaylor":
        """Keep k = 0 terms (average over all angles)."""
        mask = np.all(self.k_part() == 0, axis=1)
        return FourierTaylor(self.n, self.keys[mask], self.vals[mask])

    def average_along(self, v: RationalVector) -> "FourierTaylor":
        """Keep terms resonant with v: exact integer test k . (q v) == 0."""
        if v.n != self.n:
            raise DomainError("rational direction dimension mismatch")
        qv = np.asarray(v.numerators, dtype=np.int64)
        dots = self.k_part() @ qv
        mask = dots == 0
        return FourierTaylor(self.n, self.keys[mask], self.vals[mask])

    def solve_homological(self, v: RationalVector) -> "FourierTaylor":
        """F with {F, v.I} = self, coefficientwise F_k = c_k q / (2 pi i k.(q v)).

        Every term must be non-resonant (k.(q v) != 0); the divisor then obeys
        |k . v| >= 1/q, so no small divisors appear.  Resonant terms raise
        HomologicalError -- average them away first.
        """
        if v.n != self.n:
            raise DomainError("rational direction dimension mismatch")
        if self.is_zero:
            return FourierTaylor.zero(self.n)
        qv = np.asarray(v.numerators, dtype=np.int64)
        dots = self.k_part() @ qv
        if np.any(dots == 0):
            bad = self.keys[np.flatnonzero(dots == 0)[0], : self.n]
            raise HomologicalError(
                f"right-hand side has a resonant mode k = {tuple(int(x) for x in bad)} "
                f"along v = {v.numerators}/{v.q}"
            )
        vals = self.vals * (float(v.q) / (2j * math.pi)) / dots.astype(np.float64)
        return FourierTaylor(self.n, self.keys, vals)

    # --- splitting ----------------------------------------------------------------
    def action_linearization(self):
        """(Pbar, tail): terms with |alpha|_1 <= 1 versus the rest.

        Pbar = P(0, theta, x) + dP/dI(0, theta, x) . I;  the tail is the part
        quadratic and higher in the actions.
        """
        adeg = np.abs(self.alpha_part()).sum(axis=1)
        mask = adeg <= 1
        lin = FourierTaylor(self.n, self.keys[mask], self.vals[mask])
        tail = FourierTaylor(self.n, self.keys[~mask], self.vals[~mask])
        return lin, tail

    def truncate(self, caps: SeriesCaps):
        """(kept, discarded) by the caps on |k|_1, |alpha|_1, |beta|_1."""
        kn = np.abs(self.k_part()).sum(axis=1)
        an = self.alpha_part().sum(axis=1)
        bn = self.beta_part().sum(axis=1)
        mask = (kn <= caps.cutoffK) & (an <= caps.degI) & (bn <= caps.degW)
        kept = FourierTaylor(self.n, self.keys[mask], self.vals[mask])
        disc = FourierTaylor(self.n, self.keys[~mask], self.vals[~mask])
        return kept, disc

    def prune(self, domain: DomainParams, budget: float):
        """Drop the smallest-weight terms with total weighted mass <= budget.

        Weights are the majorant weights on `domain`, so the discarded mass
        is exactly the majorant norm of the dropped remainder.  Terms are
        dropped in whole conjugacy classes {(k, a, b), (-k, a, b)} so pruning
        preserves conjugate symmetry.  Returns (kept, discarded_mass).
        Deterministic: stable sort on canonical class order.
        """
        if self.is_zero or budget <= 0.0:
            return self, 0.0
        m = len(self.vals)
        w = self._weights(domain) * np.abs(self.vals)
        # conjugacy-class representative: lexicographic min of key and k-flip
        flipped = self.keys.copy()
        flipped[:, : self.n] *= -1
        neq = self.keys != flipped
        has_diff = neq.any(axis=1)
        first = np.argmax(neq, axis=1)
        rows = np.arange(m)
        use_flip = has_diff & (flipped[rows, first] < self.keys[rows, first])
        class_keys = np.where(use_flip[:, None], flipped, self.keys)
        order = np.lexsort(class_keys.T[::-1])
        ck_sorted = class_keys[order]
        boundary = np.ones(m, dtype=bool)
        boundary[1:] = np.any(ck_sorted[1:] != ck_sorted[:-1], axis=1)
        class_id_sorted = np.cumsum(boundary) - 1
        class_id = np.empty(m, dtype=np.int64)
        class_id[order] = class_id_sorted
        n_classes = int(class_id_sorted[-1]) + 1
        class_w = np.zeros(n_classes)
        np.add.at(class_w, class_id, w)
        corder = np.argsort(class_w, kind="stable")
        csum = np.cumsum(class_w[corder])
        ndrop = int(np.searchsorted(csum, budget, side="right"))
        if ndrop == 0:
            return self, 0.0
        dropped = np.zeros(n_classes, dtype=bool)
        dropped[corder[:ndrop]] = True
        keep_mask = ~dropped[class_id]
        mass = float(csum[ndrop - 1])
        return FourierTaylor(self.n, self.keys[keep_mask], self.vals[keep_mask]), mass

    # --- norms ---------------------------------------------------------------------
    def _weights(self, domain: DomainParams) -> np.ndarray:
        kn = np.abs(self.k_part()).sum(axis=1).astype(np.float64)
        an = self.alpha_part().sum(axis=1).astype(np.float64)
        bn = self.beta_part().sum(axis=1).astype(np.float64)
        with np.errstate(over="raise"):
            return (np.exp(2.0 * math.pi * domain.s * kn)
                    * np.float_power(domain.r, an)
                    * np.float_power(domain.h, bn))

    def majorant_norm(self, domain: DomainParams) -> float:
        """sum |c| e^{2 pi s |k|_1} r^{|alpha|} h^{|beta|} (>= sup on domain)."""
        if self.is_zero:
            return 0.0
        return float(np.sum(self._weights(domain) * np.abs(self.vals)))

    # --- reality ----------------------------------------------------------------------
    def reality_defect(self) -> float:
        """max |c(k,a,b) - conj(c(-k,a,b))| over all terms."""
        if self.is_zero:
            return 0.0
        flipped = self.keys.copy()
        flipped[:, : self.n] *= -1
        d = self._as_dict()
        partner = np.array([d.get(tuple(map(int, row)), 0.0 + 0.0j)
                            for row in flipped], dtype=np.complex128)
        return float(np.max(np.abs(self.vals - np.conj(partner))))

    def symmetrized(self) -> "FourierTaylor":
        """Average with its conjugate-reflected copy (projects onto real series)."""
        flipped = self.keys.copy()
        flipped[:, : self.n] *= -1
        keys = np.concatenate([self.keys, flipped])
        vals = np.concatenate([self.vals * 0.5, np.conj(self.vals) * 0.5])
        return FourierTaylor(self.n, keys, vals)

    def require_real(self, rel_tol: float = 1e-13) -> "FourierTaylor":
        """Symmetrize, raising RealityError if the defect exceeds rel_tol."""
        if self.is_zero:
            return self
        scale = self.max_abs_coeff()
        defect = self.reality_defect()
        if defect > rel_tol * max(scale, 1e-300):
            raise RealityError(
                f"series violates conjugate symmetry: defect {defect:.3e} "
                f"vs scale {scale:.3e}"
            )
        return self.symmetrized()

    # --- evaluation -------------------------------------------------------------------------
    def evaluate(self, theta=None, I=None, x=None) -> np.ndarray:
        """Evaluate at broadcastable point arrays of shape (..., n).

        Missing blocks default to zero.  Returns complex values shaped (...).
        """
        n = self.n
        blocks = [theta, I, x]
        shapes = [np.asarray(b).shape[:-1] for b in blocks if b is not None]
        lead = shapes[0] if shapes else ()
        m = int(np.prod(lead)) if lead else 1

        def prep(b):
            if b is None:
                return np.zeros((m, n), dtype=np.complex128)
            arr = np.asarray(b, dtype=np.complex128).reshape(-1, n)
            return arr

        th, act, par = (prep(b) for b in blocks)
        if self.is_zero:
            return np.zeros(lead, dtype=np.complex128)
        K = self.k_part().astype(np.float64)
        A = self.alpha_part()
        B = self.beta_part()
        E = np.exp(2j * math.pi * (th @ K.T))
        amax = int(A.max()) if A.size else 0
        bmax = int(B.max()) if B.size else 0
        # monomial values via gathers from per-axis power tables
        pa = [act[:, j][:, None] ** np.arange(amax + 1)[None, :] for j in range(n)]
        pb = [par[:, j][:, None] ** np.arange(bmax + 1)[None, :] for j in range(n)]
        mono = np.ones((m, self.num_terms))
        for j in range(n):
            mono = mono * pa[j][:, A[:, j]]
            mono = mono * pb[j][:, B[:, j]]
        out = (E * mono) @ self.vals
        return out.reshape(lead)

    # --- serialization ------------------------------------------------------------------------
    def to_payload(self, caps: SeriesCaps | None = None) -> dict:
        """JSON-ready dict {n, cutoffK, degI, degW, terms:[{k,alpha,beta,re,im}]}."""
        if caps is None:
            kn = np.abs(self.k_part()).sum(axis=1)
            an = self.alpha_part().sum(axis=1)
            bn = self.beta_part().sum(axis=1)
            caps = SeriesCaps(
                int(kn.max()) if len(kn) else 0,
                int(an.max()) if len(an) else 0,
                int(bn.max()) if len(bn) else 0,
            )
        terms = []
        for row, v in zip(self.keys, self.vals):
            terms.append({
                "k": [int(x) for x in row[: self.n]],
                "alpha": [int(x) for x in row[self.n: 2 * self.n]],
                "beta": [int(x) for x in row[2 * self.n:]],
                "re": float(v.real),
                "im": float(v.imag),
            })
        return {"n": self.n, "cutoffK": caps.cutoffK, "degI": caps.degI,
                "degW": caps.degW, "terms": terms}

    @staticmethod
    def from_payload(payload: dict) -> "FourierTaylor":
        n = int(payload["n"])
        terms = {}
        for t in payload["terms"]:
            key = tuple(int(x) for x in t["k"]) + \
                tuple(int(x) for x in t["alpha"]) + \
                tuple(int(x) for x in t["beta"])
            if len(key) != 3 * n:
                raise DomainError(f"term index length mismatch in payload: {t}")
            terms[key] = terms.get(key, 0.0) + complex(float(t["re"]), float(t["im"]))
        return FourierTaylor.from_terms(n, terms)


# ---------------------------------------------------------------------------
# discard bookkeeping
# ---------------------------------------------------------------------------

@dataclass
class DiscardLedger:
    """Accumulates majorant mass of every discarded remainder, by label."""

    entries: list = field(default_factory=list)

    def charge(self, label: str, amount: float) -> None:
        if amount < 0 or not math.isfinite(amount):
            raise DomainError(f"bad discard amount {amount} for {label}")
        if amount > 0.0:
            self.entries.append((label, float(amount)))

    def charge_series(self, label: str, series: FourierTaylor,
                      domain: DomainParams) -> None:
        if not series.is_zero:
            self.charge(label, series.majorant_norm(domain))

    @property
    def total(self) -> float:
        return float(sum(a for _, a in self.entries))

    def check_budget(self, budget: float, context: str = "") -> None:
        if self.total > budget:
            worst = sorted(self.entries, key=lambda e: -e[1])[:5]
            raise TruncationBudgetError(
                f"discarded mass {self.total:.3e} exceeds budget {budget:.3e}"
                + (f" in {context}" if context else "")
                + f"; top contributions: {worst}"
            )

    def summary(self) -> dict:
        agg: dict = {}
        for label, amount in self.entries:
            agg[label] = agg.get(label, 0.0) + amount
        return dict(sorted(agg.items()))


# ---------------------------------------------------------------------------
# conversions and normal-form helpers
# ---------------------------------------------------------------------------

def parampoly_to_series(p: ParamPoly, n: int, alpha=None) -> FourierTaylor:
    """Embed a parameter polynomial as a (k = 0) series, optional I-monomial."""
    if p.n != n:
        raise DomainError("parameter polynomial dimension mismatch")
    alpha = tuple(alpha) if alpha is not None else (0,) * n
    idx = np.argwhere(p.coeffs != 0.0)
    terms = {}
    for e in idx:
        key = (0,) * n + alpha + tuple(int(x) for x in e)
        terms[key] = complex(p.coeffs[tuple(e)])
    return FourierTaylor.from_terms(n, terms)


def series_to_parampoly(f: FourierTaylor, deg: int) -> ParamPoly:
    """Inverse embedding: requires k = 0, alpha = 0, real coefficients."""
    n = f.n
    c = np.zeros((deg + 1,) * n)
    for row, v in zip(f.keys, f.vals):
        if np.any(row[: 2 * n] != 0):
            raise DomainError("series has angle or action dependence")
        b = tuple(int(x) for x in row[2 * n:])
        if any(e > deg for e in b):
            raise DomainError(f"parameter degree {b} exceeds target {deg}")
        if abs(v.imag) > 1e-13 * max(abs(v), 1e-300):
            raise RealityError(f"parameter coefficient not real: {v}")
        c[b] = v.real
    return ParamPoly(c)


def extract_action_gradient(f: FourierTaylor, deg: int) -> ParamVector:
    """nu(x) from the k = 0, |alpha| = 1 part: coefficient polys of I_a."""
    n = f.n
    comps = []
    for a in range(n):
        c = np.zeros((deg + 1,) * n)
        for row, v in zip(f.keys, f.vals):
            if np.any(row[:n] != 0):
                continue
            alpha = row[n: 2 * n]
            if alpha[a] != 1 or alpha.sum() != 1:
                continue
            b = tuple(int(x) for x in row[2 * n:])
            if any(e > deg for e in b):
                raise DomainError(f"parameter degree {b} exceeds target {deg}")
            if abs(v.imag) > 1e-13 * max(abs(v), 1e-300):
                raise RealityError(f"action-gradient coefficient not real: {v}")
            c[b] = v.real
        comps.append(ParamPoly(c))
    return ParamVector(tuple(comps))


def normal_form_series(omega0: FrequencyVector) -> FourierTaylor:
    """N = omega . I = sum_a (omega0_a + x_a) I_a as an exact series."""
    n = omega0.n
    terms = {}
    for a in range(n):
        alpha = [0] * n
        alpha[a] = 1
        key0 = (0,) * n + tuple(alpha) + (0,) * n
        terms[key0] = complex(omega0[a])
        beta = [0] * n
        beta[a] = 1
        key1 = (0,) * n + tuple(alpha) + tuple(beta)
        terms[key1] = 1.0 + 0.0j
    return FourierTaylor.from_terms(n, terms)


def action_linear_series(v, n: int) -> FourierTaylor:
    """v . I for a constant vector v (used for the bracket with rational N_v)."""
    terms = {}
    for a in range(n):
        alpha = [0] * n
        alpha[a] = 1
        key = (0,) * n + tuple(alpha) + (0,) * n
        c = complex(v[a])
        if c != 0.0:
            terms[key] = c
    return FourierTaylor.from_terms(n, terms)


@dataclass(frozen=True)
class ParamHamiltonian:
    """Parameterized normal-form datum H = e(x) + omega.I + P(I, theta, x)."""

    omega0: FrequencyVector
    e: ParamPoly
    P: FourierTaylor
    domain: DomainParams
    caps: SeriesCaps

    def __post_init__(self):
        if self.P.n != self.omega0.n or self.e.n != self.omega0.n:
            raise DomainError("Hamiltonian parts have inconsistent dimensions")

    @property
    def n(self) -> int:
        return self.omega0.n

    def normal_form(self) -> FourierTaylor:
        return normal_form_series(self.omega0)

    def full_series(self) -> FourierTaylor:
        return parampoly_to_series(self.e, self.n) + self.normal_form() + self.P

    def perturbation_norm(self) -> float:
        return self.P.majorant_norm(self.domain)
