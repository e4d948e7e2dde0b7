"""Canonical transformations generated by action-affine Hamiltonians.

A generator F = F0(theta, x) + F1(theta, x) . I produces a time-one flow

    I_old     = u0(theta, x) + u1(theta, x) I      (u1 includes the identity)
    theta_old = theta + vshift(theta, x)
    omega_old = phi(omega),

exactly affine in the actions because the flow equations dI/dt = -dF/dtheta,
dtheta/dt = dF/dI decouple the angles from the actions for such F.  The
composed object of a whole run keeps this shape, which is what makes the
torus embedding a finite Fourier series at the end.

Pullbacks of Hamiltonians are computed with Lie series  g o X^1_F =
sum_m ad_F^m g / m!  with ad_F g = {g, F}; every truncation charges its
majorant mass to a ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CompositionDomainError,
    DomainError,
    FlowDomainError,
)
from .parampoly import ParamMap, ParamPoly, ParamVector
from .series import (
    DiscardLedger,
    DomainParams,
    FourierTaylor,
    SeriesCaps,
    parampoly_to_series,
)

__all__ = [
    "TruncationContext",
    "lie_series_sum",
    "lie_transform",
    "transform_from_generator",
    "substitute_angles",
    "substitute_param",
    "Transform",
    "TorusEmbedding",
]

_LIE_MAX_ORDER = 80
_LIE_REL_FLOOR = 1e-17


@dataclass
class TruncationContext:
    """Shared truncation policy: caps, measuring domain, ledger, prune budget."""

    caps: SeriesCaps
    domain: DomainParams
    ledger: DiscardLedger
    prune_budget: float = 0.0

    def clip(self, f: FourierTaylor, label: str,
             prune: bool = False) -> FourierTaylor:
        kept, disc = f.truncate(self.caps)
        self.ledger.charge_series(label + ":caps", disc, self.domain)
        if prune and self.prune_budget > 0.0:
            kept, mass = kept.prune(self.domain, self.prune_budget)
            self.ledger.charge(label + ":prune", mass)
        return kept


def lie_series_sum(term1: FourierTaylor, F: FourierTaylor,
                   ctx: TruncationContext, label: str,
                   start_m: int = 1) -> FourierTaylor:
    """sum_{m >= start_m} term_m with term_{m+1} = {term_m, F}/(m+1).

    The caller supplies term_{start_m}; the geometric tail after the last
    computed term is charged to the ledger.  Raises FlowDomainError if the
    term norms fail to decay (the generator is too large for this domain).
    """
    acc = FourierTaylor.zero(term1.n)
    term = term1
    m = start_m
    norm1 = term1.majorant_norm(ctx.domain)
    floor = _LIE_REL_FLOOR * max(norm1, 1e-300)
    prev_norm = math.inf
    while True:
        tnorm = term.majorant_norm(ctx.domain)
        if tnorm <= floor or term.is_zero:
            ctx.ledger.charge(label + ":lie-tail", min(tnorm * 2.0, prev_norm))
            break
        acc = acc + term
        if m - start_m + 1 >= _LIE_MAX_ORDER:
            raise FlowDomainError(
                f"Lie series for {label} did not converge within "
                f"{_LIE_MAX_ORDER} orders (last term norm {tnorm:.3e})"
            )
        if m > start_m + 4 and tnorm > 0.75 * prev_norm:
            raise FlowDomainError(
                f"Lie series for {label} is not contracting "
                f"(norms {prev_norm:.3e} -> {tnorm:.3e} at order {m})"
            )
        prev_norm = tnorm
        m += 1
        term = ctx.clip(term.poisson(F).scale(1.0 / m), label, prune=True)
    return acc


def lie_transform(g: FourierTaylor, F: FourierTaylor,
                  ctx: TruncationContext, label: str) -> FourierTaylor:
    """g o X^1_F = g + sum_{m>=1} ad_F^m g / m!."""
    term1 = ctx.clip(g.poisson(F), label, prune=True)
    if term1.is_zero:
        return g
    return g + lie_series_sum(term1, F, ctx, label)


def _exp_series(y: FourierTaylor, ctx: TruncationContext,
                label: str) -> FourierTaylor:
    """exp(y) = sum y^m / m! with ledger-charged tail."""
    acc = FourierTaylor.constant(y.n, 1.0)
    term = FourierTaylor.constant(y.n, 1.0)
    m = 0
    while True:
        m += 1
        term = ctx.clip(term.mul(y).scale(1.0 / m), label)
        tnorm = term.majorant_norm(ctx.domain)
        if term.is_zero or tnorm <= _LIE_REL_FLOOR:
            ctx.ledger.charge(label + ":exp-tail", 2.0 * tnorm)
            break
        acc = acc + term
        if m >= _LIE_MAX_ORDER:
            raise CompositionDomainError(
                f"exponential series for {label} did not converge "
                f"(term norm {tnorm:.3e} at order {m})"
            )
    return acc


def substitute_angles(g: FourierTaylor, vshift, ctx: TruncationContext,
                      label: str) -> FourierTaylor:
    """g(I, theta + vshift(theta, x), x) via exp(2 pi i k . vshift) expansion."""
    n = g.n
    if g.is_zero:
        return g
    if all(v.is_zero for v in vshift):
        return g
    base: dict = {}
    power_memo: dict = {}

    def axis_power(a: int, p: int) -> FourierTaylor:
        if p == 0:
            return FourierTaylor.constant(n, 1.0)
        key = (a, p)
        if key in power_memo:
            return power_memo[key]
        if (a, 1) not in base or (a, -1) not in base:
            y = vshift[a].scale(2j * math.pi)
            base[(a, 1)] = _exp_series(y, ctx, f"{label}:exp+{a}")
            base[(a, -1)] = _exp_series(y.scale(-1.0), ctx, f"{label}:exp-{a}")
        sgn = 1 if p > 0 else -1
        prev = axis_power(a, p - sgn)
        val = ctx.clip(prev.mul(base[(a, sgn)]), label)
        power_memo[key] = val
        return val

    factor_memo: dict = {}

    def factor_for(kvec: tuple) -> FourierTaylor:
        if kvec in factor_memo:
            return factor_memo[kvec]
        f = FourierTaylor.constant(n, 1.0)
        for a, ka in enumerate(kvec):
            if ka != 0:
                f = ctx.clip(f.mul(axis_power(a, int(ka))), label)
        factor_memo[kvec] = f
        return f

    K = g.k_part()
    uniq, inverse = np.unique(K, axis=0, return_inverse=True)
    out = FourierTaylor.zero(n)
    for idx in range(len(uniq)):
        mask = inverse == idx
        sub = FourierTaylor(n, g.keys[mask], g.vals[mask])
        fac = factor_for(tuple(int(x) for x in uniq[idx]))
        out = out + ctx.clip(sub.mul(fac), label)
    return out


def substitute_param(g: FourierTaylor, offset: ParamVector,
                     ctx: TruncationContext, label: str) -> FourierTaylor:
    """g with x <- x + offset(x), parameter degree capped at caps.degW."""
    n = g.n
    if g.is_zero or all(np.all(c.coeffs == 0.0) for c in offset.components):
        return g
    degW = ctx.caps.degW
    work_deg = max(degW, offset.deg)
    shifted = [ParamPoly.coordinate(n, work_deg, b) +
               offset.components[b].with_degree(work_deg) for b in range(n)]
    poly_memo: dict = {}

    def beta_poly(beta: tuple):
        """(embedded kept factor, majorant of the discarded factor)."""
        if beta in poly_memo:
            return poly_memo[beta]
        poly = ParamPoly.const(n, work_deg, 1.0)
        for b, e in enumerate(beta):
            for _ in range(int(e)):
                poly = poly.mul(shifted[b], deg=work_deg)
        kept, disc = poly.split_total_degree(degW)
        entry = (parampoly_to_series(kept, n),
                 disc.majorant_norm(ctx.domain.h))
        poly_memo[beta] = entry
        return entry

    B = g.beta_part()
    uniq, inverse = np.unique(B, axis=0, return_inverse=True)
    out = FourierTaylor.zero(n)
    for idx in range(len(uniq)):
        beta = tuple(int(x) for x in uniq[idx])
        mask = inverse == idx
        keys = g.keys[mask].copy()
        keys[:, 2 * n:] = 0
        stripped = FourierTaylor(n, keys, g.vals[mask])
        if all(e == 0 for e in beta):
            out = out + stripped
        else:
            factor, disc_norm = beta_poly(beta)
            if disc_norm > 0.0:
                ctx.ledger.charge(label + ":param-deg",
                                  stripped.majorant_norm(ctx.domain) * disc_norm)
            out = out + ctx.clip(stripped.mul(factor), label)
    return out


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _check_theta_x_only(f: FourierTaylor, what: str) -> FourierTaylor:
    if not f.is_zero and np.any(f.alpha_part() != 0):
        raise DomainError(f"{what} must not depend on the actions")
    return f


@dataclass(frozen=True)
class Transform:
    """Near-identity canonical change of variables, affine in the actions.

    Maps new coordinates to old:  I_old = u0 + u1 I,  theta_old = theta +
    vshift,  omega_old = phi(omega).  The series u0, u1, vshift are functions
    of (theta, x) with x = omega - omega0 the offset of the *new* parameter.
    """

    omega0: tuple
    u0: tuple        # n series
    u1: tuple        # n x n nested tuple of series, identity included
    vshift: tuple    # n series
    phi: ParamMap

    def __post_init__(self):
        n = len(self.omega0)
        if len(self.u0) != n or len(self.u1) != n or len(self.vshift) != n:
            raise DomainError("transform component count mismatch")
        for f in self.u0:
            _check_theta_x_only(f, "u0")
        for row in self.u1:
            if len(row) != n:
                raise DomainError("u1 must be square")
            for f in row:
                _check_theta_x_only(f, "u1")
        for f in self.vshift:
            _check_theta_x_only(f, "vshift")

    @property
    def n(self) -> int:
        return len(self.omega0)

    @staticmethod
    def identity(omega0, deg: int = 0) -> "Transform":
        n = len(omega0)
        zero = FourierTaylor.zero(n)
        one = FourierTaylor.constant(n, 1.0)
        u1 = tuple(tuple(one if a == b else zero for b in range(n))
                   for a in range(n))
        return Transform(
            omega0=tuple(float(w) for w in omega0),
            u0=(zero,) * n,
            u1=u1,
            vshift=(zero,) * n,
            phi=ParamMap.identity(omega0, deg),
        )

    # --- evaluation ---------------------------------------------------------
    def evaluate(self, theta: np.ndarray, I: np.ndarray,
                 omega: np.ndarray):
        """Pointwise map; arrays shaped (..., n).  Returns (I_old, theta_old,
        omega_old)."""
        theta = np.asarray(theta, dtype=float)
        I = np.asarray(I, dtype=float)
        omega = np.asarray(omega, dtype=float)
        x = omega - np.asarray(self.omega0)
        n = self.n
        I_old = np.zeros(theta.shape, dtype=np.complex128)
        th_old = np.zeros(theta.shape, dtype=np.complex128)
        for a in range(n):
            acc = self.u0[a].evaluate(theta=theta, x=x)
            for b in range(n):
                acc = acc + self.u1[a][b].evaluate(theta=theta, x=x) * I[..., b]
            I_old[..., a] = acc
            th_old[..., a] = theta[..., a] + \
                self.vshift[a].evaluate(theta=theta, x=x)
        return I_old, th_old, self.phi.evaluate(omega)

    def jacobian_block(self, theta: np.ndarray, I: np.ndarray,
                       omega: np.ndarray) -> np.ndarray:
        """d(I_old, theta_old)/d(I, theta) at frozen omega, shape (..., 2n, 2n).

        Row/column order: actions first, then angles.
        """
        theta = np.asarray(theta, dtype=float)
        I = np.asarray(I, dtype=float)
        omega = np.asarray(omega, dtype=float)
        x = omega - np.asarray(self.omega0)
        n = self.n
        lead = theta.shape[:-1]
        J = np.zeros(lead + (2 * n, 2 * n), dtype=np.complex128)
        for a in range(n):
            for b in range(n):
                J[..., a, b] = self.u1[a][b].evaluate(theta=theta, x=x)
                dth = self.u0[a].dtheta(b).evaluate(theta=theta, x=x)
                for c in range(n):
                    dth = dth + self.u1[a][c].dtheta(b).evaluate(
                        theta=theta, x=x) * I[..., c]
                J[..., a, n + b] = dth
                J[..., n + a, n + b] = (1.0 if a == b else 0.0) + \
                    self.vshift[a].dtheta(b).evaluate(theta=theta, x=x)
        return J

    # --- composition -----------------------------------------------------------
    def compose(self, later: "Transform", ctx: TruncationContext,
                label: str = "compose") -> "Transform":
        """self o later as maps: earlier transform applied to later's output.

        If H_mid = H_old o self and H_new = H_mid o later, the composite
        satisfies H_new = H_old o (self o later).
        """
        if self.omega0 != later.omega0:
            raise CompositionDomainError("transforms have different base frequency")
        n = self.n
        # earlier series live at parameter phi_later(omega): substitute x.
        w = later.phi.offset

        def pullback(f: FourierTaylor) -> FourierTaylor:
            f = substitute_param(f, w, ctx, label + ":param")
            return substitute_angles(f, later.vshift, ctx, label + ":angle")

        u0A = [pullback(f) for f in self.u0]
        u1A = [[pullback(f) for f in row] for row in self.u1]
        vsA = [pullback(f) for f in self.vshift]

        u0C = []
        u1C = []
        vsC = []
        for a in range(n):
            acc0 = u0A[a]
            for b in range(n):
                acc0 = acc0 + ctx.clip(u1A[a][b].mul(later.u0[b]),
                                       label + ":u0")
            u0C.append(acc0)
            row = []
            for c in range(n):
                acc1 = FourierTaylor.zero(n)
                for b in range(n):
                    acc1 = acc1 + ctx.clip(u1A[a][b].mul(later.u1[b][c]),
                                           label + ":u1")
                row.append(acc1)
            u1C.append(tuple(row))
            vsC.append(later.vshift[a] + vsA[a])
        phiC = self.phi.compose(later.phi)
        return Transform(omega0=self.omega0, u0=tuple(u0C), u1=tuple(u1C),
                         vshift=tuple(vsC), phi=phiC)

    def with_param_map(self, phi: ParamMap, ctx: TruncationContext,
                       label: str = "fold-param") -> "Transform":
        """Fold a frequency reparameterization into this transform.

        Result represents (z, omega) -> (flow(z; phi(omega)), phi(omega)),
        assuming self.phi is the identity (flows are built parameter-free).
        """
        w = phi.offset

        def sub(f: FourierTaylor) -> FourierTaylor:
            return substitute_param(f, w, ctx, label)

        return Transform(
            omega0=self.omega0,
            u0=tuple(sub(f) for f in self.u0),
            u1=tuple(tuple(sub(f) for f in row) for row in self.u1),
            vshift=tuple(sub(f) for f in self.vshift),
            phi=self.phi.compose(phi),
        )

    # --- analysis ------------------------------------------------------------
    def distance(self, other: "Transform", domain: DomainParams,
                 weights=(1.0, 1.0, 1.0)) -> float:
        """Weighted sup-norm distance between the two maps on the domain.

        weights = (w_action, w_angle, w_param) multiply the action block,
        angle block, and parameter block respectively.
        """
        n = self.n
        act = 0.0
        for a in range(n):
            part = (self.u0[a] - other.u0[a]).majorant_norm(domain)
            for b in range(n):
                part += (self.u1[a][b] - other.u1[a][b]).majorant_norm(domain) \
                    * domain.r
            act = max(act, part)
        ang = max((self.vshift[a] - other.vshift[a]).majorant_norm(domain)
                  for a in range(n))
        par = (self.phi.offset - other.phi.offset).majorant_norm(domain.h)
        return max(weights[0] * act, weights[1] * ang, weights[2] * par)

    def deviation_from_identity(self, domain: DomainParams,
                                weights=(1.0, 1.0, 1.0)) -> float:
        return self.distance(Transform.identity(self.omega0), domain, weights)

    def symplectic_defect(self, rng: np.random.Generator,
                          n_samples: int, domain: DomainParams,
                          radius_factor: float = 0.5) -> float:
        """Max |dPhi^T J dPhi - J| over random sample points (measured check)."""
        n = self.n
        theta = rng.uniform(0.0, 1.0, size=(n_samples, n))
        I = rng.uniform(-domain.r * radius_factor, domain.r * radius_factor,
                        size=(n_samples, n))
        omega = np.asarray(self.omega0)[None, :] + \
            rng.uniform(-domain.h * radius_factor, domain.h * radius_factor,
                        size=(n_samples, n))
        J = self.jacobian_block(theta, I, omega)
        Jr = J.real
        Sym = np.zeros((2 * n, 2 * n))
        Sym[:n, n:] = -np.eye(n)
        Sym[n:, :n] = np.eye(n)
        # coordinates ordered (I, theta): canonical form sum dI ^ dtheta
        lhs = np.einsum("mji,jk,mkl->mil", Jr, Sym, Jr)
        return float(np.max(np.abs(lhs - Sym[None, :, :])))

    def restrict_torus(self, omega_tilde) -> "TorusEmbedding":
        """Embedding of the invariant torus: I = 0, x = 0 slice."""
        n = self.n

        def at_x0(f: FourierTaylor) -> FourierTaylor:
            if f.is_zero:
                return f
            mask = np.all(f.beta_part() == 0, axis=1)
            return FourierTaylor(n, f.keys[mask], f.vals[mask])

        return TorusEmbedding(
            omega0=self.omega0,
            omega_tilde=tuple(float(w) for w in omega_tilde),
            action=tuple(at_x0(f) for f in self.u0),
            angle_shift=tuple(at_x0(f) for f in self.vshift),
        )


def transform_from_generator(F: FourierTaylor, ctx: TruncationContext,
                             omega0, label: str = "flow") -> Transform:
    """Time-one flow of an action-affine generator as a Transform.

    F must have action degree <= 1.  The coordinate images are Lie series
    I_a o X^1 = I_a + sum_{m>=1} ad^{m-1}{I_a, F}/m!, and likewise for the
    angle shift starting from {theta_a, F} = dF/dI_a.
    """
    n = F.n
    if np.any(F.alpha_part().sum(axis=1) > 1):
        raise DomainError("flow generator must be affine in the actions")
    zero = FourierTaylor.zero(n)
    one = FourierTaylor.constant(n, 1.0)
    u0 = []
    u1 = []
    vshift = []
    for a in range(n):
        # action image: I_a + Lie tail of {I_a, F} = -dF/dtheta_a
        t1 = ctx.clip(F.dtheta(a).scale(-1.0), label, prune=True)
        img = lie_series_sum(t1, F, ctx, f"{label}:I{a}") if not t1.is_zero \
            else zero
        lin, tail = img.action_linearization()
        if not tail.is_zero:
            raise FlowDomainError("flow image not affine in actions")
        mask0 = np.all(lin.alpha_part() == 0, axis=1)
        u0.append(FourierTaylor(n, lin.keys[mask0], lin.vals[mask0]))
        row = []
        for b in range(n):
            colmask = lin.alpha_part()[:, b] == 1
            keys = lin.keys[colmask].copy()
            keys[:, n + b] = 0
            entry = FourierTaylor(n, keys, lin.vals[colmask])
            if a == b:
                entry = entry + one
            row.append(entry)
        u1.append(tuple(row))
        # angle image: theta_a + Lie tail of {theta_a, F} = dF/dI_a
        s1 = ctx.clip(F.dI(a), label, prune=True)
        vs = lie_series_sum(s1, F, ctx, f"{label}:th{a}") if not s1.is_zero \
            else zero
        if not vs.is_zero and np.any(vs.alpha_part() != 0):
            raise FlowDomainError("angle image depends on actions")
        vshift.append(vs)
    return Transform(
        omega0=tuple(float(w) for w in omega0),
        u0=tuple(u0),
        u1=tuple(u1),
        vshift=tuple(vshift),
        phi=ParamMap.identity(omega0, 0),
    )


@dataclass(frozen=True)
class TorusEmbedding:
    """Invariant-torus embedding theta -> (I(theta), theta + shift(theta)).

    Angle components are finite Fourier series in theta; omega_tilde is the
    frequency of the quasi-periodic motion on the torus in these coordinates.
    """

    omega0: tuple
    omega_tilde: tuple
    action: tuple       # n series, k-modes only
    angle_shift: tuple  # n series, k-modes only

    @property
    def n(self) -> int:
        return len(self.omega0)

    def evaluate(self, theta: np.ndarray):
        """(I, theta_image) at angle points theta of shape (..., n)."""
        theta = np.asarray(theta, dtype=float)
        I = np.stack([f.evaluate(theta=theta).real for f in self.action],
                     axis=-1)
        shift = np.stack([f.evaluate(theta=theta).real
                          for f in self.angle_shift], axis=-1)
        return I, theta + shift

    def derivative(self, theta: np.ndarray):
        """d/dtheta of the embedding: pair of (..., n, n) arrays."""
        theta = np.asarray(theta, dtype=float)
        lead = theta.shape[:-1]
        n = self.n
        dI = np.zeros(lead + (n, n))
        dTh = np.zeros(lead + (n, n))
        for a in range(n):
            for b in range(n):
                dI[..., a, b] = self.action[a].dtheta(b).evaluate(
                    theta=theta).real
                dTh[..., a, b] = (1.0 if a == b else 0.0) + \
                    self.angle_shift[a].dtheta(b).evaluate(theta=theta).real
        return dI, dTh

    def to_payload(self) -> dict:
        return {
            "omega0": [float(w) for w in self.omega0],
            "omegaTilde": [float(w) for w in self.omega_tilde],
            "action": [f.to_payload() for f in self.action],
            "angleShift": [f.to_payload() for f in self.angle_shift],
        }

    @staticmethod
    def from_payload(payload: dict) -> "TorusEmbedding":
        return TorusEmbedding(
            omega0=tuple(float(w) for w in payload["omega0"]),
            omega_tilde=tuple(float(w) for w in payload["omegaTilde"]),
            action=tuple(FourierTaylor.from_payload(p)
                         for p in payload["action"]),
            angle_shift=tuple(FourierTaylor.from_payload(p)
                              for p in payload["angleShift"]),
        )
