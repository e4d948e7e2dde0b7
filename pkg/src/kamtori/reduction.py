"""Reduction of a near-integrable Hamiltonian to parameterized form.

Physical model: ``H(p, q) = h(p) + epsilon * f(p, q)`` on the cotangent
bundle of the n-torus, with ``h(p) = omega0 . p + g(p)`` where ``g`` is a
polynomial with no constant or linear part (so ``grad h(0) = omega0``)
and an invertible Hessian at the origin (twist condition).

For each frequency ``omega = omega0 + x`` near ``omega0`` let ``p*(x)``
solve ``grad h(p*) = omega0 + x`` (computed below as a truncated power
series via a contraction built from the inverse Hessian). Writing
``p = p*(x) + I`` turns ``H`` into the parameterized family

    H = e(x) + (omega0 + x) . I + P(theta, I, x),

with ``e(x) = h(p*(x))`` and ``P`` collecting the terms at least
quadratic in ``I`` together with the perturbation evaluated on the
shifted actions. The torus for parameter ``x`` is hunted at ``I = 0``.

Scaling: with ``M`` a majorant for the action Hessian of ``h`` and ``F``
a majorant for ``f`` on the analyticity strip, the action radius is
balanced so the integrable quadratic tail and the perturbation enter at
the same size: ``r = sqrt(epsilon * F / M)``; the working perturbation
size is ``eps_param = max(2 * F * epsilon, |P|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .diophantine import ArithmeticProfile, FrequencyVector
from .errors import (
    DomainError,
    EpsilonTooLargeError,
    NondegeneracyError,
    PlacementError,
)
from .parampoly import ParamPoly, ParamVector
from .series import (
    DiscardLedger,
    DomainParams,
    FourierTaylor,
    ParamHamiltonian,
    SeriesCaps,
    parampoly_to_series,
)
from .step import ConditionCheck


def cosine_series(n: int, modes: Sequence) -> FourierTaylor:
    """Real trigonometric polynomial ``sum_m a_m cos(2 pi k_m . theta)``.

    ``modes`` is a sequence of ``(k, amplitude)`` pairs; each contributes
    the conjugate exponential pair ``(a/2) e^{2 pi i k.theta} + c.c.``.
    """
    terms: dict = {}
    for k, amp in modes:
        k = tuple(int(x) for x in k)
        if len(k) != n:
            raise DomainError(f"mode {k} has wrong dimension (expected {n})")
        if all(x == 0 for x in k):
            key = k + (0,) * (2 * n)
            terms[key] = terms.get(key, 0.0) + float(amp)
            continue
        zeros = (0,) * (2 * n)
        kp = k + zeros
        km = tuple(-x for x in k) + zeros
        terms[kp] = terms.get(kp, 0.0) + 0.5 * float(amp)
        terms[km] = terms.get(km, 0.0) + 0.5 * float(amp)
    return FourierTaylor.from_terms(n, terms)


@dataclass(frozen=True)
class IntegrableSpec:
    """Physical problem statement ``H = omega0 . p + h_poly(p) + eps f``.

    ``h_poly`` holds the nonlinear part of the integrable Hamiltonian
    (monomials of total degree >= 2 in the actions). ``f`` is a real
    Fourier-Taylor series in the angles and actions with no parameter
    dependence (beta = 0 in every term).
    """

    omega0: FrequencyVector
    h_poly: ParamPoly
    f: FourierTaylor
    epsilon: float

    def __post_init__(self):
        n = self.omega0.n
        if self.h_poly.n != n:
            raise DomainError(
                f"integrable part has {self.h_poly.n} action variables, "
                f"expected {n}")
        if self.f.n != n:
            raise DomainError(
                f"perturbation has dimension {self.f.n}, expected {n}")
        if self.epsilon < 0.0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        grid = np.argwhere(self.h_poly.coeffs != 0.0)
        for idx in grid:
            if int(idx.sum()) < 2:
                raise DomainError(
                    "the constant and linear parts of the integrable "
                    "Hamiltonian are fixed by the frequency vector; "
                    f"remove the degree-{int(idx.sum())} monomial "
                    f"{tuple(int(i) for i in idx)}")
        if not self.f.is_zero and np.any(self.f.keys[:, 2 * n:] != 0):
            raise DomainError(
                "the perturbation must not depend on the frequency "
                "parameter (beta = 0 required)")
        self.f.require_real()

    @property
    def n(self) -> int:
        return self.omega0.n

    @staticmethod
    def quadratic(omega0: FrequencyVector, f: FourierTaylor, epsilon: float,
                  hessian: Optional[np.ndarray] = None) -> "IntegrableSpec":
        """Spec with ``h(p) = omega0 . p + p^T A p / 2`` (default A = Id)."""
        n = omega0.n
        A = np.eye(n) if hessian is None else np.asarray(hessian, dtype=float)
        return IntegrableSpec(omega0, _quadratic_poly(A), f, epsilon)

    # --- calculus on the integrable part ---------------------------------
    def hessian0(self) -> np.ndarray:
        """Action Hessian of ``h`` at the origin."""
        n = self.n
        A = np.zeros((n, n))
        for a in range(n):
            da = self.h_poly.derivative(a)
            for b in range(n):
                A[a, b] = da.derivative(b).value_at_zero()
        return A

    def h_value(self, p: np.ndarray) -> np.ndarray:
        """``h(p)`` for points ``p`` of shape (..., n)."""
        p = np.asarray(p, dtype=float)
        return p @ np.asarray(self.omega0.values) + self.h_poly.evaluate(p)

    def h_gradient(self, p: np.ndarray) -> np.ndarray:
        """``grad h(p)`` for points of shape (..., n)."""
        p = np.asarray(p, dtype=float)
        cols = [self.h_poly.derivative(a).evaluate(p) for a in range(self.n)]
        return np.asarray(self.omega0.values) + np.stack(cols, axis=-1)

    def h_hessian(self, p: np.ndarray) -> np.ndarray:
        """``grad^2 h(p)`` for points of shape (..., n) -> (..., n, n)."""
        p = np.asarray(p, dtype=float)
        n = self.n
        rows = []
        for a in range(n):
            da = self.h_poly.derivative(a)
            rows.append(np.stack(
                [da.derivative(b).evaluate(p) for b in range(n)], axis=-1))
        return np.stack(rows, axis=-2)


def action_polynomial(hessian: np.ndarray,
                      terms: Sequence = ()) -> ParamPoly:
    """Nonlinear integrable part ``p^T A p / 2 + extra monomials``.

    ``terms`` is a sequence of ``(exponents, coefficient)`` pairs for
    monomials of total degree >= 2 beyond the quadratic form.
    """
    A = np.asarray(hessian, dtype=float)
    poly = _quadratic_poly(A)
    n = A.shape[0]
    if terms:
        deg = max([2] + [int(sum(e)) for e, _ in terms])
        poly = poly.with_degree(deg)
        for exps, coeff in terms:
            exps = tuple(int(x) for x in exps)
            if len(exps) != n:
                raise DomainError(
                    f"action monomial {exps} has wrong dimension "
                    f"(expected {n})")
            if sum(exps) < 2:
                raise DomainError(
                    f"action monomial {exps} has total degree "
                    f"{sum(exps)} < 2; the constant and linear parts are "
                    f"fixed by the frequency vector")
            poly = poly + ParamPoly.monomial(n, deg, exps, float(coeff))
    return poly


def _quadratic_poly(A: np.ndarray) -> ParamPoly:
    """``p -> p^T A p / 2`` as a polynomial (A symmetrized)."""
    n = A.shape[0]
    if A.shape != (n, n):
        raise DomainError(f"Hessian must be square, got shape {A.shape}")
    S = 0.5 * (A + A.T)
    poly = ParamPoly.zero(n, 2)
    for a in range(n):
        for b in range(a, n):
            exps = [0] * n
            exps[a] += 1
            exps[b] += 1
            c = 0.5 * S[a, a] if a == b else S[a, b]
            if c != 0.0:
                poly = poly + ParamPoly.monomial(n, 2, tuple(exps), c)
    return poly


@dataclass(frozen=True)
class ReductionResult:
    """Parameterized Hamiltonian plus the scaling report that built it."""

    hamiltonian: ParamHamiltonian
    p_star: ParamVector
    q0: int
    checks: tuple
    report: dict

    def as_dict(self) -> dict:
        return {
            "report": dict(self.report),
            "q0": int(self.q0),
            "checks": [c.as_dict() for c in self.checks],
        }


def _solve_action_series(spec: IntegrableSpec, Ainv: np.ndarray,
                         work_deg: int) -> ParamVector:
    """Power series ``p*(x)`` with ``grad h(p*(x)) = omega0 + x``.

    Fixed point of ``p <- Ainv (x - grad_hi(p))`` where ``grad_hi`` is the
    gradient of the cubic-and-higher part; each sweep extends the valid
    order by at least one degree.
    """
    n = spec.n
    A = spec.hessian0()
    h_hi = spec.h_poly - _quadratic_poly(A).with_degree(spec.h_poly.deg)
    grad_hi = [h_hi.derivative(a) for a in range(n)]
    higher_is_zero = all(np.all(g.coeffs == 0.0) for g in grad_hi)

    x_id = ParamVector.identity(n, max(work_deg, 1))
    p_star = ParamVector.zero(n, n, work_deg)
    sweeps = 1 if higher_is_zero else work_deg
    for _ in range(sweeps):
        gp = [g.compose(p_star, deg=work_deg).with_degree(work_deg)
              for g in grad_hi]
        rhs = [x_id.components[b].with_degree(work_deg) - gp[b]
               for b in range(n)]
        comps = []
        for a in range(n):
            acc = ParamPoly.zero(n, work_deg)
            for b in range(n):
                if Ainv[a, b] != 0.0:
                    acc = acc + rhs[b].scale(Ainv[a, b])
            comps.append(acc)
        p_star = ParamVector(tuple(comps))
    return p_star


def _shifted_action_powers(p_star: ParamVector, n: int):
    """Memoized powers of ``S_a = p*_a(x) + I_a`` as series factories."""
    base = []
    for a in range(n):
        alpha = [0] * n
        alpha[a] = 1
        base.append(parampoly_to_series(p_star.components[a], n)
                    + FourierTaylor.monomial(n, alpha=tuple(alpha)))
    memo: dict = {}

    def power(a: int, j: int) -> FourierTaylor:
        if j == 0:
            return FourierTaylor.constant(n, 1.0)
        if (a, j) not in memo:
            memo[(a, j)] = power(a, j - 1).mul(base[a])
        return memo[(a, j)]

    return power


def _hamiltonian_on_shifted_actions(spec: IntegrableSpec,
                                    p_star: ParamVector) -> FourierTaylor:
    """``h(p*(x) + I)`` as a series in (theta, I, x) (theta-independent)."""
    n = spec.n
    power = _shifted_action_powers(p_star, n)
    omega0 = spec.omega0.values
    acc = FourierTaylor.zero(n)
    for a in range(n):
        if omega0[a] != 0.0:
            acc = acc + power(a, 1).scale(omega0[a])
    for idx in np.argwhere(spec.h_poly.coeffs != 0.0):
        gamma = tuple(int(i) for i in idx)
        c = float(spec.h_poly.coeffs[gamma])
        term = FourierTaylor.constant(n, c)
        for a, g in enumerate(gamma):
            if g:
                term = term.mul(power(a, g))
        acc = acc + term
    return acc


def _perturbation_on_shifted_actions(spec: IntegrableSpec,
                                     p_star: ParamVector) -> FourierTaylor:
    """``f(p*(x) + I, theta)`` as a series in (theta, I, x)."""
    n = spec.n
    f = spec.f
    if f.is_zero:
        return f
    power = _shifted_action_powers(p_star, n)
    alphas = f.alpha_part()
    uniq, inverse = np.unique(alphas, axis=0, return_inverse=True)
    out = FourierTaylor.zero(n)
    for idx in range(len(uniq)):
        alpha = tuple(int(x) for x in uniq[idx])
        mask = inverse == idx
        keys = f.keys[mask].copy()
        keys[:, n:2 * n] = 0
        angle_part = FourierTaylor(n, keys, f.vals[mask])
        factor = FourierTaylor.constant(n, 1.0)
        for a, g in enumerate(alpha):
            if g:
                factor = factor.mul(power(a, g))
        out = out + angle_part.mul(factor)
    return out


def _strip_majorant(f: FourierTaylor, s: float, window: float) -> float:
    """Coefficient majorant of ``f`` on the strip, actions in a ball."""
    if f.is_zero:
        return 0.0
    n = f.n
    knorm = np.abs(f.keys[:, :n]).sum(axis=1).astype(float)
    anorm = f.keys[:, n:2 * n].sum(axis=1).astype(float)
    weights = np.exp(2.0 * math.pi * s * knorm) * window ** anorm
    return float((np.abs(f.vals) * weights).sum())


def _hessian_majorant(spec: IntegrableSpec, window: float) -> float:
    """Row-sum majorant of the action Hessian of ``h`` on a ball."""
    n = spec.n
    best = 0.0
    for a in range(n):
        da = spec.h_poly.derivative(a)
        row = 0.0
        for b in range(n):
            row += da.derivative(b).majorant_norm(window)
        best = max(best, row)
    return best


def _sampled_sup_f(spec: IntegrableSpec, s: float, window: float) -> float:
    """Sampled sup of |f| on the strip boundary (diagnostic only)."""
    if spec.f.is_zero:
        return 0.0
    n = spec.n
    grid = np.linspace(0.0, 1.0, 17, endpoint=False)
    mesh = np.stack(np.meshgrid(*([grid] * n), indexing="ij"),
                    axis=-1).reshape(-1, n)
    actions = [np.zeros(n)]
    for a in range(n):
        e = np.zeros(n)
        e[a] = window
        actions.extend([e, -e])
    best = 0.0
    x0 = np.zeros(n)
    for signs in np.ndindex(*((2,) * n)):
        im = s * (2 * np.asarray(signs) - 1)
        theta = mesh + 1j * im
        for I in actions:
            vals = spec.f.evaluate(theta, np.broadcast_to(I, theta.shape),
                                   np.broadcast_to(x0, theta.shape))
            best = max(best, float(np.abs(vals).max()))
    return best


def _sampled_sup_hessian(spec: IntegrableSpec, window: float) -> float:
    """Sampled sup of the Hessian row sums on a real ball (diagnostic)."""
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(256, spec.n))
    norms = np.linalg.norm(pts, axis=1, keepdims=True)
    pts = window * pts / np.maximum(norms, 1e-300)
    pts = np.concatenate([pts, np.zeros((1, spec.n))])
    H = spec.h_hessian(pts)
    return float(np.abs(H).sum(axis=-1).max())


def reduce_to_param_form(spec: IntegrableSpec, s: float, caps: SeriesCaps,
                         profile: ArithmeticProfile, *,
                         param_radius: Optional[float] = None,
                         action_radius: Optional[float] = None,
                         c_hauto: float = 0.5,
                         c_sigma: float = 16.0,
                         condition_mode: str = "record") -> ReductionResult:
    """Reduce the physical spec to a parameterized Hamiltonian.

    Chooses the action radius ``r = sqrt(epsilon F / M)`` balancing the
    integrable tail against the perturbation, the parameter radius from
    the first averaging order when not given explicitly, and assembles
    the exact degree-capped series for ``e`` and ``P``.
    """
    if spec.omega0.values != profile.omega.values:
        raise DomainError(
            "arithmetic profile was built for a different frequency vector")
    if s <= 0.0:
        raise DomainError(f"strip width must be positive, got {s}")
    n = spec.n
    eps = spec.epsilon
    work_deg = max(caps.degW, 2)

    A = spec.hessian0()
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise NondegeneracyError(
            "the action Hessian of the integrable part is singular; the "
            "frequency-to-action map cannot be inverted") from exc
    condA = float(np.linalg.cond(A))
    if not np.isfinite(condA) or condA > 1e12:
        raise NondegeneracyError(
            f"the action Hessian is numerically degenerate "
            f"(condition number {condA:.3e})")

    # Scheduling scale: the first averaging order fixes the safe size of
    # the frequency ball (all divisors of order <= Q0 stay within a factor
    # two of their unperturbed size when h <= 1 / (2 Delta(Q0))).
    q0 = profile.choose_q0(s, c_sigma)
    delta_q0 = profile.delta_at(q0)
    psi_q0 = profile.psi_at(q0)
    h_auto = c_hauto / delta_q0
    h = float(param_radius) if param_radius is not None else h_auto
    if h <= 0.0:
        raise DomainError(f"parameter radius must be positive, got {h}")

    # Two-pass scaling: a zero-window pass seeds the radius, then the
    # majorants are re-evaluated on the seeded window.
    M0 = _hessian_majorant(spec, 0.0)
    F0 = _strip_majorant(spec.f, s, 0.0)
    if M0 <= 0.0:
        raise NondegeneracyError(
            "the action Hessian majorant vanishes at the origin")
    r1 = math.sqrt(eps * F0 / M0) if eps * F0 > 0.0 else 1e-2 / max(M0, 1.0)
    window = r1 + h
    M = _hessian_majorant(spec, window)
    F = _strip_majorant(spec.f, s, window)
    if action_radius is not None:
        r = float(action_radius)
        if r <= 0.0:
            raise DomainError(f"action radius must be positive, got {r}")
    else:
        r = math.sqrt(eps * F / M) if eps * F > 0.0 else 1e-2 / max(M, 1.0)
    domain = DomainParams(s=s, r=r, h=h)

    # Exact series assembly.
    p_star = _solve_action_series(spec, Ainv, work_deg)
    h_shift = _hamiltonian_on_shifted_actions(spec, p_star)
    e_full_series = _constant_action_part(h_shift)
    normal = FourierTaylor.from_terms(n, _normal_terms(spec.omega0))
    p_integrable = h_shift - e_full_series - normal
    p_eps = _perturbation_on_shifted_actions(spec, p_star).scale(eps)
    p_full = p_integrable + p_eps

    ledger = DiscardLedger()
    p_kept, p_disc = p_full.truncate(caps)
    ledger.charge("reduction:caps", p_disc.majorant_norm(domain))
    e_poly_full = _series_to_param_constant(e_full_series, n)
    e_kept, e_disc = e_poly_full.split_total_degree(caps.degW)
    e_kept = e_kept.with_degree(caps.degW)
    ledger.charge("reduction:energy-degree", e_disc.majorant_norm(h))

    ham = ParamHamiltonian(omega0=spec.omega0, e=e_kept, P=p_kept,
                           domain=domain, caps=caps)
    p_norm = p_kept.majorant_norm(domain)
    eps_param = max(2.0 * F * eps, p_norm)

    # Jet defect of the truncated frequency-to-action series (diagnostic).
    jet = _jet_residual(spec, p_star, work_deg, h)

    checks = []
    gate_lhs = eps_param * psi_q0
    gate = ConditionCheck(
        name="epsilon-smallness", lhs=gate_lhs, rhs=1.0,
        satisfied=bool(gate_lhs <= 1.0),
        note="working perturbation size times the worst divisor "
             "amplification at the first averaging order must stay "
             "below one")
    checks.append(gate)
    disc_check = ConditionCheck(
        name="reduction-discard", lhs=ledger.total,
        rhs=1e-3 * max(eps_param, 1e-300),
        satisfied=bool(ledger.total <= 1e-3 * max(eps_param, 1e-300)),
        note="series mass dropped while capping the reduced Hamiltonian")
    checks.append(disc_check)
    if condition_mode == "strict":
        if not gate.satisfied:
            raise EpsilonTooLargeError(
                f"perturbation too large for the first averaging order: "
                f"eps_param * Psi(Q0) = {gate_lhs:.3e} > 1")
        if not disc_check.satisfied:
            raise EpsilonTooLargeError(
                f"reduction discarded more series mass than allowed "
                f"({ledger.total:.3e})")
    elif condition_mode != "record":
        raise DomainError(
            f"condition_mode must be 'record' or 'strict', "
            f"got {condition_mode!r}")

    report = {
        "M": float(M),
        "MSampled": 1.05 * _sampled_sup_hessian(spec, window),
        "F": float(F),
        "FSampled": 1.05 * _sampled_sup_f(spec, s, window),
        "psiQ0": float(psi_q0),
        "window": float(window),
        "r": float(r),
        "rOverride": action_radius is not None,
        "h": float(h),
        "hAuto": float(h_auto),
        "epsilon": float(eps),
        "epsParam": float(eps_param),
        "perturbationNorm": float(p_norm),
        "q0": int(q0),
        "deltaQ0": float(delta_q0),
        "jetResidual": float(jet),
        "discardTotal": float(ledger.total),
        "hessianCondition": condA,
    }
    return ReductionResult(hamiltonian=ham, p_star=p_star, q0=q0,
                           checks=tuple(checks), report=report)


def _normal_terms(omega0: FrequencyVector) -> dict:
    """Terms of ``(omega0 + x) . I``."""
    n = omega0.n
    terms = {}
    for a in range(n):
        alpha = [0] * n
        alpha[a] = 1
        key_lin = (0,) * n + tuple(alpha) + (0,) * n
        if omega0.values[a] != 0.0:
            terms[key_lin] = omega0.values[a]
        beta = [0] * n
        beta[a] = 1
        terms[(0,) * n + tuple(alpha) + tuple(beta)] = 1.0
    return terms


def _constant_action_part(series: FourierTaylor) -> FourierTaylor:
    """Rows with k = 0 and alpha = 0 (pure parameter dependence)."""
    n = series.n
    if series.is_zero:
        return series
    mask = np.all(series.keys[:, :2 * n] == 0, axis=1)
    return FourierTaylor(n, series.keys[mask], series.vals[mask])


def _series_to_param_constant(series: FourierTaylor, n: int) -> ParamPoly:
    """Convert a (k = 0, alpha = 0) series into a parameter polynomial."""
    if series.is_zero:
        return ParamPoly.zero(n, 0)
    if np.any(series.keys[:, :2 * n] != 0):
        raise DomainError("series has angle or action dependence")
    deg = int(series.keys[:, 2 * n:].max())
    poly = ParamPoly.zero(n, deg)
    for key, val in zip(series.keys, series.vals):
        beta = tuple(int(b) for b in key[2 * n:])
        poly = poly + ParamPoly.monomial(n, deg, beta, float(val.real))
    return poly


def _jet_residual(spec: IntegrableSpec, p_star: ParamVector,
                  work_deg: int, h: float) -> float:
    """Majorant of ``grad h(p*(x)) - (omega0 + x)`` on the parameter ball.

    Composed at full degree so the leading truncation tail of the
    frequency-to-action series is visible, not hidden by its own cap.
    """
    n = spec.n
    full_deg = max(1, spec.h_poly.deg - 1) * max(work_deg, 1)
    x_id = ParamVector.identity(n, full_deg)
    worst = 0.0
    for a in range(n):
        ga = spec.h_poly.derivative(a)
        comp = ga.compose(p_star.with_degree(full_deg), deg=full_deg) \
            - x_id.components[a]
        worst = max(worst, comp.majorant_norm(h))
    return worst


@dataclass(frozen=True)
class PlacementResult:
    """Action point whose intrinsic frequency matches the target."""

    action: tuple
    residual: float
    iterations: int


def place_torus(spec: IntegrableSpec, omega_tilde, *, tol: float = 1e-12,
                max_iter: int = 60) -> PlacementResult:
    """Solve ``grad h(p) = omega_tilde`` by a Newton iteration from 0."""
    target = np.asarray(omega_tilde, dtype=float)
    if target.shape != (spec.n,):
        raise DomainError(
            f"target frequency must have shape ({spec.n},), "
            f"got {target.shape}")
    A = spec.hessian0()
    try:
        p = np.linalg.solve(A, target - np.asarray(spec.omega0.values))
    except np.linalg.LinAlgError as exc:
        raise NondegeneracyError(
            "the action Hessian of the integrable part is singular") from exc
    scale = max(1.0, float(np.abs(target).max()))
    for it in range(1, max_iter + 1):
        res = spec.h_gradient(p) - target
        rnorm = float(np.abs(res).max())
        if rnorm <= tol * scale:
            return PlacementResult(action=tuple(float(v) for v in p),
                                   residual=rnorm, iterations=it)
        try:
            dp = np.linalg.solve(spec.h_hessian(p), res)
        except np.linalg.LinAlgError as exc:
            raise PlacementError(
                f"the action Hessian became singular at iterate {it} "
                f"(|p| = {float(np.abs(p).max()):.3e})") from exc
        p = p - dp
        if not np.all(np.isfinite(p)) or float(np.abs(p).max()) > 1e6:
            raise PlacementError(
                f"action placement diverged at iterate {it}")
    raise PlacementError(
        f"action placement did not reach tolerance {tol:.1e} in "
        f"{max_iter} iterations (last residual {rnorm:.3e})")
