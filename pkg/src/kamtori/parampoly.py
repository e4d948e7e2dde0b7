"""Dense polynomials in the frequency-parameter offset x = omega - omega0.

The scheme tracks how every object depends on the frequency parameter omega
through polynomials of modest degree in the offset x.  This module provides
the dense coefficient-array representation (shape (deg+1,)^n per variable),
parameter maps phi(omega) = omega + u(x), and the inversion of near-identity
frequency maps f(omega) = omega + nu(omega) by a contraction fixed point,
with explicit certificates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve

from .errors import DomainError, InversionError

__all__ = [
    "ParamPoly",
    "ParamVector",
    "ParamMap",
    "InversionResult",
    "invert_frequency_map",
]

_EINSUM_LETTERS = "abcdefgh"


def _total_degree_grid(n: int, deg: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(deg + 1)] * n), indexing="ij")
    return sum(grids)


@dataclass(frozen=True)
class ParamPoly:
    """Dense real polynomial in n offset variables, per-axis degree <= deg."""

    coeffs: np.ndarray  # shape (deg+1,)^n, float64, read-only

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=float))
        if c.ndim < 1 or len(set(c.shape)) != 1:
            raise DomainError(f"coefficient array must be a hypercube, got {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # --- constructors ----------------------------------------------------
    @staticmethod
    def zero(n: int, deg: int) -> "ParamPoly":
        return ParamPoly(np.zeros((deg + 1,) * n))

    @staticmethod
    def const(n: int, deg: int, value: float) -> "ParamPoly":
        c = np.zeros((deg + 1,) * n)
        c[(0,) * n] = value
        return ParamPoly(c)

    @staticmethod
    def monomial(n: int, deg: int, exponents, value: float = 1.0) -> "ParamPoly":
        exponents = tuple(int(e) for e in exponents)
        if len(exponents) != n or any(e < 0 or e > deg for e in exponents):
            raise DomainError(f"bad exponents {exponents} for n={n}, deg={deg}")
        c = np.zeros((deg + 1,) * n)
        c[exponents] = value
        return ParamPoly(c)

    @staticmethod
    def coordinate(n: int, deg: int, axis: int) -> "ParamPoly":
        e = [0] * n
        e[axis] = 1
        return ParamPoly.monomial(n, deg, e)

    # --- structure -------------------------------------------------------
    @property
    def n(self) -> int:
        return self.coeffs.ndim

    @property
    def deg(self) -> int:
        return self.coeffs.shape[0] - 1

    def with_degree(self, deg: int) -> "ParamPoly":
        """Embed into (or truncate to) per-axis degree `deg`."""
        if deg == self.deg:
            return self
        if deg > self.deg:
            pad = deg - self.deg
            c = np.pad(self.coeffs, [(0, pad)] * self.n)
            return ParamPoly(c)
        sl = tuple(slice(0, deg + 1) for _ in range(self.n))
        return ParamPoly(self.coeffs[sl].copy())

    def value_at_zero(self) -> float:
        return float(self.coeffs[(0,) * self.n])

    # --- ring operations ---------------------------------------------------
    def _align(self, other: "ParamPoly"):
        if self.n != other.n:
            raise DomainError("parameter polynomials have different dimensions")
        d = max(self.deg, other.deg)
        return self.with_degree(d), other.with_degree(d)

    def __add__(self, other: "ParamPoly") -> "ParamPoly":
        a, b = self._align(other)
        return ParamPoly(a.coeffs + b.coeffs)

    def __sub__(self, other: "ParamPoly") -> "ParamPoly":
        a, b = self._align(other)
        return ParamPoly(a.coeffs - b.coeffs)

    def __neg__(self) -> "ParamPoly":
        return ParamPoly(-self.coeffs)

    def scale(self, c: float) -> "ParamPoly":
        return ParamPoly(self.coeffs * float(c))

    def mul(self, other: "ParamPoly", deg: int | None = None) -> "ParamPoly":
        """Product truncated to per-axis degree `deg` (default: ambient ring)."""
        a, b = self._align(other)
        cap = a.deg if deg is None else int(deg)
        full = convolve(a.coeffs, b.coeffs, method="direct")
        target = (cap + 1,) * self.n
        out = np.zeros(target)
        sl = tuple(slice(0, min(s, cap + 1)) for s in full.shape)
        out[sl] = full[sl]
        return ParamPoly(out)

    def derivative(self, axis: int) -> "ParamPoly":
        d = self.deg
        c = np.moveaxis(self.coeffs, axis, 0)
        out = np.zeros_like(c)
        out[:d] = c[1:] * np.arange(1, d + 1).reshape((-1,) + (1,) * (self.n - 1))
        return ParamPoly(np.moveaxis(out, 0, axis))

    # --- analysis ----------------------------------------------------------
    def majorant_norm(self, h: float) -> float:
        """sum |c_beta| h^{|beta|_1}, an upper bound for sup_{|x|<=h} |p(x)|."""
        T = _total_degree_grid(self.n, self.deg)
        return float(np.sum(np.abs(self.coeffs) * (float(h) ** T)))

    def split_total_degree(self, dmax: int):
        """(kept, discarded) with kept holding total degree <= dmax."""
        T = _total_degree_grid(self.n, self.deg)
        keep = T <= dmax
        return ParamPoly(np.where(keep, self.coeffs, 0.0)), \
            ParamPoly(np.where(keep, 0.0, self.coeffs))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at offset points, x shape (..., n) -> values shape (...)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DomainError(f"points have dimension {x.shape[-1]}, poly has {self.n}")
        lead = x.shape[:-1]
        pts = x.reshape(-1, self.n)
        d = self.deg
        vanders = [pts[:, j][:, None] ** np.arange(d + 1)[None, :]
                   for j in range(self.n)]
        letters = _EINSUM_LETTERS[: self.n]
        spec = letters + "," + ",".join("i" + ch for ch in letters) + "->i"
        vals = np.einsum(spec, self.coeffs, *vanders)
        return vals.reshape(lead)

    def compose(self, subs: "ParamVector", deg: int | None = None) -> "ParamPoly":
        """Substitute x_j <- subs[j](x); result truncated at per-axis `deg`."""
        if subs.n_vars != self.n or len(subs.components) != self.n:
            raise DomainError("substitution must supply one polynomial per variable")
        cap = self.deg if deg is None else int(deg)
        one = ParamPoly.const(subs.n_vars, cap, 1.0)
        powers = []
        for j in range(self.n):
            pj = [one]
            zj = subs.components[j].with_degree(cap)
            for _ in range(self.deg):
                pj.append(pj[-1].mul(zj, deg=cap))
            powers.append(pj)
        acc = np.zeros((cap + 1,) * subs.n_vars)
        it = np.ndindex(*self.coeffs.shape)
        for idx in it:
            c = self.coeffs[idx]
            if c == 0.0:
                continue
            term = ParamPoly.const(subs.n_vars, cap, c)
            for j, e in enumerate(idx):
                if e:
                    term = term.mul(powers[j][e], deg=cap)
            acc = acc + term.coeffs
        return ParamPoly(acc)


@dataclass(frozen=True)
class ParamVector:
    """Tuple of parameter polynomials sharing dimension (a map R^n -> R^m)."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DomainError("empty parameter vector")
        n = comps[0].n
        if any(c.n != n for c in comps):
            raise DomainError("components have inconsistent variable counts")
        d = max(c.deg for c in comps)
        comps = tuple(c.with_degree(d) for c in comps)
        object.__setattr__(self, "components", comps)

    @staticmethod
    def zero(n_vars: int, m: int, deg: int) -> "ParamVector":
        return ParamVector(tuple(ParamPoly.zero(n_vars, deg) for _ in range(m)))

    @staticmethod
    def identity(n: int, deg: int) -> "ParamVector":
        deg = max(int(deg), 1)
        return ParamVector(tuple(ParamPoly.coordinate(n, deg, j) for j in range(n)))

    @property
    def n_vars(self) -> int:
        return self.components[0].n

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def deg(self) -> int:
        return self.components[0].deg

    def with_degree(self, deg: int) -> "ParamVector":
        return ParamVector(tuple(c.with_degree(deg) for c in self.components))

    def __add__(self, other: "ParamVector") -> "ParamVector":
        return ParamVector(tuple(a + b for a, b in
                                 zip(self.components, other.components)))

    def __sub__(self, other: "ParamVector") -> "ParamVector":
        return ParamVector(tuple(a - b for a, b in
                                 zip(self.components, other.components)))

    def __neg__(self) -> "ParamVector":
        return ParamVector(tuple(-c for c in self.components))

    def scale(self, c: float) -> "ParamVector":
        return ParamVector(tuple(p.scale(c) for p in self.components))

    def majorant_norm(self, h: float) -> float:
        """max over components of the coefficient majorant at radius h."""
        return max(c.majorant_norm(h) for c in self.components)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        vals = [c.evaluate(x) for c in self.components]
        return np.stack(vals, axis=-1)

    def compose(self, subs: "ParamVector", deg: int | None = None) -> "ParamVector":
        return ParamVector(tuple(c.compose(subs, deg) for c in self.components))

    def jacobian_norm(self, h: float) -> float:
        """Induced sup-norm bound: max_a sum_b |d u_a / d x_b|_h."""
        total = 0.0
        for comp in self.components:
            row = sum(comp.derivative(b).majorant_norm(h)
                      for b in range(self.n_vars))
            total = max(total, row)
        return total


@dataclass(frozen=True)
class ParamMap:
    """Near-identity map of the frequency parameter: phi(omega) = omega + u(x)."""

    omega0: tuple
    offset: ParamVector  # u, as polynomials in x = omega - omega0

    def __post_init__(self):
        if len(self.omega0) != self.offset.m or self.offset.n_vars != self.offset.m:
            raise DomainError("parameter map must be square in the frequency space")

    @staticmethod
    def identity(omega0, deg: int) -> "ParamMap":
        n = len(omega0)
        return ParamMap(tuple(float(w) for w in omega0),
                        ParamVector.zero(n, n, deg))

    @property
    def n(self) -> int:
        return len(self.omega0)

    @property
    def deg(self) -> int:
        return self.offset.deg

    def evaluate(self, omega: np.ndarray) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        x = omega - np.asarray(self.omega0)
        return omega + self.offset.evaluate(x)

    def offset_norm(self, h: float) -> float:
        return self.offset.majorant_norm(h)

    def jacobian_minus_id_norm(self, h: float) -> float:
        return self.offset.jacobian_norm(h)

    def compose(self, inner: "ParamMap", deg: int | None = None) -> "ParamMap":
        """self after inner: omega -> self(inner(omega))."""
        if self.omega0 != inner.omega0:
            raise DomainError("parameter maps have different base frequencies")
        cap = max(self.deg, inner.deg, 1) if deg is None else max(int(deg), 1)
        x_plus_u = ParamVector.identity(self.n, cap) + inner.offset.with_degree(cap)
        u_comp = inner.offset.with_degree(cap) + \
            self.offset.compose(x_plus_u, deg=cap)
        return ParamMap(self.omega0, u_comp)


@dataclass(frozen=True)
class InversionResult:
    phi: ParamMap
    residual: ParamVector        # f(phi(omega)) - omega, in offset coordinates
    certificates: dict


def invert_frequency_map(nu: ParamVector, omega0, h: float,
                         deg: int | None = None,
                         max_sweeps: int | None = None) -> InversionResult:
    """Invert f(omega) = omega + nu(omega - omega0) on |omega - omega0| <= h.

    Contraction fixed point u <- -nu(x + u(x)) in the polynomial algebra of
    per-axis degree `deg` (default max(nu.deg, 8)).  Requires the smallness
    certificate delta = |nu|_h <= h / 4; raises InversionError otherwise.

    The returned residual is f(phi(omega)) - omega computed inside the
    truncated algebra; its majorant norm plus the reported geometric
    `tail_bound` bounds the true inversion defect.
    """
    n = len(omega0)
    if nu.m != n or nu.n_vars != n:
        raise DomainError("frequency correction must be a square vector field")
    if h <= 0:
        raise DomainError(f"inversion radius must be positive, got h = {h}")
    delta = nu.majorant_norm(h)
    if not math.isfinite(delta):
        raise InversionError("frequency correction has non-finite majorant norm")
    if delta > h / 4.0:
        raise InversionError(
            f"frequency correction too large to invert: |nu|_h = {delta:.6e} "
            f"> h/4 = {h / 4.0:.6e}"
        )
    D = max(nu.deg, 8) if deg is None else int(deg)
    nu = nu.with_degree(D)
    ident = ParamVector.identity(n, D)
    u = ParamVector.zero(n, n, D)
    sweeps = max_sweeps or (4 * (D + 2))
    converged = False
    it_used = 0
    tol = 1e-12 * max(delta, 1e-300)
    for it in range(sweeps):
        it_used = it + 1
        new_u = -(nu.compose(ident + u, deg=D))
        same = all(np.array_equal(a.coeffs, b.coeffs)
                   for a, b in zip(new_u.components, u.components))
        change_h = (new_u - u).majorant_norm(h)
        u = new_u
        if same or change_h <= tol:
            converged = True
            break
    if not converged:
        raise InversionError(
            f"frequency-map inversion did not stabilize in {sweeps} sweeps "
            f"(delta = {delta:.3e}, h = {h:.3e})"
        )
    residual = u + nu.compose(ident + u, deg=D)
    u_norm = u.majorant_norm(h)
    q = delta / h if h > 0 else math.inf
    tail = 2.0 * h * q ** (D + 1) if q < 1 else math.inf
    certs = {
        "delta": delta,
        "ratio": delta / (h / 4.0),
        "offset_norm": u_norm,
        "jacobian_minus_id_norm": u.jacobian_norm(h),
        "residual_norm": residual.majorant_norm(h),
        "tail_bound": tail,
        "sweeps": it_used,
        "degree": D,
    }
    phi = ParamMap(tuple(float(w) for w in omega0), u)
    return InversionResult(phi=phi, residual=residual, certificates=certs)
