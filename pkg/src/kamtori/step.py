"""One step of the rational-approximation normal-form scheme.

A step takes H = e(x) + omega.I + P(I, theta, x) on domain (s, r, h) and a
unimodular basis of rational approximations v_1..v_n at scale Q, and returns
an equivalent Hamiltonian on the shrunk domain (s - sigma, eta r, h/4) whose
remainder is measurably smaller, together with the canonical transform that
realizes it.

Stages:
  1. split P into its action-linear part and quadratic tail;
  2. cascade of averages along v_1..v_n (exact mode filters) ending in the
     plain angle average -- guaranteed by unimodularity;
  3. for each stage, solve {F_j, v_j . I} = (non-resonant part) with bounded
     divisors |k . v_j| >= 1/q_j and pull the Hamiltonian through the
     time-one flow of F_j, accumulating the new remainder pieces;
  4. extract the averaged part c(x) + nu(x) . I;
  5. invert the frequency map omega + nu and substitute, so the normal form
     is exactly omega . I again (the inversion defect is kept in the
     remainder -- nothing is swept under the rug);
  6. measure the new remainder on the shrunk domain and check the
     contraction envelope.

No small divisors appear anywhere: every divisor in stage 3 is a nonzero
integer over q_j.

Condition handling: quantitative sufficient conditions are *recorded* with
their measured values; in "record" mode the step proceeds on the strength of
the measured envelope check at the end, while "strict" mode raises
StepConditionError on the first recorded failure.  Hard impossibilities
(resonant basis, non-invertible frequency map, non-contracting Lie series)
raise regardless of mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diophantine import RationalBasis
from .errors import (
    HomologicalError,
    ScheduleError,
    StepConditionError,
)
from .parampoly import ParamVector, invert_frequency_map
from .series import (
    DiscardLedger,
    DomainParams,
    FourierTaylor,
    ParamHamiltonian,
    SeriesCaps,
    action_linear_series,
    extract_action_gradient,
    normal_form_series,
    parampoly_to_series,
    series_to_parampoly,
)
from .transforms import (
    Transform,
    TruncationContext,
    lie_series_sum,
    lie_transform,
    substitute_param,
    transform_from_generator,
)

__all__ = [
    "StepSettings",
    "ConditionCheck",
    "StageReport",
    "StepReport",
    "StepResult",
    "kam_step",
]

_PRUNE_OPS_ESTIMATE = 200.0


@dataclass(frozen=True)
class StepSettings:
    """Tunable constants of a single step."""

    eta: float = 1.0 / 66.0
    envelope_factor: float = 1.0 / 8.0   # target |P+| <= eta * envelope_factor * |P|
    ledger_fraction: float = 1e-3        # discard budget as fraction of target
    condition_mode: str = "record"       # "record" | "strict"
    generator_margin: float = 1.0 / 16.0  # recorded check: 2 h alpha <= eta * this

    def __post_init__(self):
        if not 0.0 < self.eta < 0.25:
            raise ScheduleError(f"eta must be in (0, 1/4), got {self.eta}")
        if self.condition_mode not in ("record", "strict"):
            raise ScheduleError(f"unknown condition mode {self.condition_mode!r}")


@dataclass
class ConditionCheck:
    name: str
    lhs: float
    rhs: float
    satisfied: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "satisfied": bool(self.satisfied), "note": self.note}


@dataclass
class StageReport:
    q: int
    numerators: tuple
    skipped: bool
    rhs_norm: float
    generator_norm: float
    generator_angle_derivative: float
    coupling_norm: float     # |{(omega - v).I, F_j}| measured

    def as_dict(self) -> dict:
        return {"q": self.q, "numerators": list(self.numerators),
                "skipped": self.skipped, "rhsNorm": self.rhs_norm,
                "generatorNorm": self.generator_norm,
                "generatorAngleDerivative": self.generator_angle_derivative,
                "couplingNorm": self.coupling_norm}


@dataclass
class StepReport:
    eps_in: float
    eps_out: float
    eps_out_certified: float
    envelope_target: float
    envelope_ok: bool
    contraction: float
    sigma: float
    Q: int
    basis_q: tuple
    basis_det: int
    tail_norm_in: float
    averaged_constant: float
    nu_norm: float
    inversion: dict
    stages: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    ledger: dict = field(default_factory=dict)
    ledger_total: float = 0.0
    domain_in: tuple = ()
    domain_out: tuple = ()

    def as_dict(self) -> dict:
        return {
            "epsIn": self.eps_in,
            "epsOut": self.eps_out,
            "epsOutCertified": self.eps_out_certified,
            "envelopeTarget": self.envelope_target,
            "envelopeOk": bool(self.envelope_ok),
            "contraction": self.contraction,
            "sigma": self.sigma,
            "Q": self.Q,
            "basisQ": list(self.basis_q),
            "basisDet": self.basis_det,
            "tailNormIn": self.tail_norm_in,
            "averagedConstant": self.averaged_constant,
            "nuNorm": self.nu_norm,
            "inversion": self.inversion,
            "stages": [s.as_dict() for s in self.stages],
            "conditions": [c.as_dict() for c in self.conditions],
            "ledger": self.ledger,
            "ledgerTotal": self.ledger_total,
            "domainIn": list(self.domain_in),
            "domainOut": list(self.domain_out),
        }


@dataclass
class StepResult:
    hamiltonian: ParamHamiltonian
    transform: Transform
    report: StepReport


def _record(checks: list, settings: StepSettings, name: str, lhs: float,
            rhs: float, note: str = "") -> ConditionCheck:
    ok = bool(lhs <= rhs)
    chk = ConditionCheck(name=name, lhs=float(lhs), rhs=float(rhs),
                         satisfied=ok, note=note)
    checks.append(chk)
    if not ok and settings.condition_mode == "strict":
        raise StepConditionError(
            f"condition {name} violated: {lhs:.6e} > {rhs:.6e}"
            + (f" ({note})" if note else "")
        )
    return chk


def kam_step(ham: ParamHamiltonian, basis: RationalBasis, sigma: float,
             settings: StepSettings | None = None) -> StepResult:
    """Apply one normal-form step; see module docstring."""
    settings = settings or StepSettings()
    n = ham.n
    omega0 = ham.omega0
    dom_in = ham.domain
    eta = settings.eta
    if basis.omega.values != omega0.values:
        raise ScheduleError("basis was built for a different frequency vector")
    if not sigma > 0.0:
        raise ScheduleError(f"strip loss sigma must be positive, got {sigma}")
    if sigma >= dom_in.s:
        raise ScheduleError(
            f"strip loss sigma = {sigma} consumes the whole strip s = {dom_in.s}"
        )
    dom_out = DomainParams(dom_in.s - sigma, eta * dom_in.r, dom_in.h / 4.0)

    checks: list = []
    eps_in = ham.perturbation_norm()
    if eps_in == 0.0:
        # nothing to do: identity step with pure domain shrink
        return _trivial_step(ham, basis, sigma, settings, dom_out)
    envelope_target = eta * settings.envelope_factor * eps_in
    budget_total = settings.ledger_fraction * envelope_target
    ledger = DiscardLedger()
    ctx = TruncationContext(
        caps=ham.caps, domain=dom_in, ledger=ledger,
        prune_budget=budget_total / _PRUNE_OPS_ESTIMATE,
    )

    _record(checks, settings, "eta-window", 2.0 * eta, 0.5,
            "action-radius contraction factor stays perturbative")
    _record(checks, settings, "strip-budget", sigma, dom_in.s / 2.0,
            "per-step strip loss within half the current strip")

    # ---- stage 1: action linearization ---------------------------------
    P = ham.P
    Pbar, tail = P.action_linearization()
    tail_norm = tail.majorant_norm(
        DomainParams(dom_in.s, 2.0 * eta * dom_in.r, dom_in.h))
    _record(checks, settings, "tail-smallness", tail_norm,
            (2 * eta) ** 2 / (1 - 2 * eta) * eps_in,
            "quadratic tail on the 2*eta*r ball (termwise Cauchy bound)")

    # ---- stages 2-3: averaging cascade with bounded-divisor flows ------
    N = normal_form_series(omega0)
    Pj = Pbar
    acc = FourierTaylor.zero(n)          # accumulated new remainder pieces
    tail_pulled = tail
    phi_step = Transform.identity(omega0.values)
    stage_reports = []
    for j, v in enumerate(basis.vectors):
        qv = np.asarray(v.numerators, dtype=np.int64)
        dots = Pj.k_part() @ qv
        res_mask = dots == 0
        P_next = FourierTaylor(n, Pj.keys[res_mask], Pj.vals[res_mask])
        rhs = FourierTaylor(n, Pj.keys[~res_mask], Pj.vals[~res_mask])
        if rhs.is_zero:
            stage_reports.append(StageReport(
                q=v.q, numerators=v.numerators, skipped=True, rhs_norm=0.0,
                generator_norm=0.0, generator_angle_derivative=0.0,
                coupling_norm=0.0))
            Pj = P_next
            continue
        F = rhs.solve_homological(v)
        Fnorm = F.majorant_norm(dom_in)
        dF_ang = max(F.dtheta(a).majorant_norm(dom_in) for a in range(n))
        alpha = dF_ang / eps_in
        _record(checks, settings, f"generator-size-{j}",
                2.0 * dom_in.h * alpha, eta * settings.generator_margin,
                "frequency-offset coupling stays below the contraction share")
        # coupling S_j = {(omega - v_j).I, F_j}
        n_minus_nv = N - action_linear_series(v.as_floats(), n)
        S = ctx.clip(n_minus_nv.poisson(F), f"stage{j}:S", prune=True)
        # ad_F N = S_j - rhs_j algebraically (the homological equation
        # cancels the non-resonant part exactly -- never recomputed in floats)
        term1_full = S - rhs
        term2 = ctx.clip(term1_full.poisson(F).scale(0.5), f"stage{j}:N2",
                         prune=True)
        n_higher = lie_series_sum(term2, F, ctx, f"stage{j}:N", start_m=2) \
            if not term2.is_zero else FourierTaylor.zero(n)
        p_term1 = ctx.clip(Pj.poisson(F), f"stage{j}:P1", prune=True)
        p_tail = lie_series_sum(p_term1, F, ctx, f"stage{j}:P") \
            if not p_term1.is_zero else FourierTaylor.zero(n)
        new_piece = S + n_higher + p_tail
        # pull previously accumulated pieces through this flow
        if not acc.is_zero:
            acc = lie_transform(acc, F, ctx, f"stage{j}:acc")
        if not tail_pulled.is_zero:
            tail_pulled = lie_transform(tail_pulled, F, ctx, f"stage{j}:tail")
        acc = acc + new_piece
        T_j = transform_from_generator(F, ctx, omega0.values,
                                       label=f"stage{j}:flow")
        phi_step = phi_step.compose(T_j, ctx, label=f"stage{j}:compose")
        stage_reports.append(StageReport(
            q=v.q, numerators=v.numerators, skipped=False,
            rhs_norm=rhs.majorant_norm(dom_in), generator_norm=Fnorm,
            generator_angle_derivative=dF_ang,
            coupling_norm=S.majorant_norm(dom_in)))
        Pj = P_next

    if not Pj.is_zero and np.any(Pj.k_part() != 0):
        raise HomologicalError(
            "averaging cascade did not terminate at the angle average; "
            "the rational basis must be degenerate"
        )

    # ---- stage 4: averaged part --------------------------------------------
    avg_const = FourierTaylor(
        n, Pj.keys[np.all(Pj.alpha_part() == 0, axis=1)],
        Pj.vals[np.all(Pj.alpha_part() == 0, axis=1)])
    c_poly = series_to_parampoly(avg_const, ham.caps.degW)
    nu = extract_action_gradient(Pj, ham.caps.degW)
    nu_norm = nu.majorant_norm(dom_in.h)

    # ---- stage 5: frequency renormalization ---------------------------------
    _record(checks, settings, "inversion-smallness", nu_norm, dom_in.h / 4.0,
            "frequency correction within the contraction radius")
    inv = invert_frequency_map(nu, omega0.values, dom_in.h,
                               deg=max(ham.caps.degW, 8))
    phi = inv.phi
    # remainder in the new parameter: substitute x <- phi-offset into the
    # accumulated pieces and the pulled tail, then add the inversion defect.
    P_rest = acc + tail_pulled
    P_new = substitute_param(P_rest, phi.offset, ctx, "param-sub")
    defect = FourierTaylor.zero(n)
    for a in range(n):
        kept, disc = inv.residual.components[a].split_total_degree(ham.caps.degW)
        ledger.charge("inversion-defect:deg",
                      disc.majorant_norm(dom_out.h) * dom_out.r)
        alpha_idx = [0] * n
        alpha_idx[a] = 1
        defect = defect + parampoly_to_series(kept, n, alpha=alpha_idx)
    P_new = P_new + defect
    P_new = P_new.require_real()
    # e+ = (e + c) o phi, capped at the parameter degree
    e_plus_full = (ham.e + c_poly).compose(
        ParamVector.identity(n, max(ham.caps.degW, phi.offset.deg)) + phi.offset,
        deg=max(ham.caps.degW, phi.offset.deg))
    e_plus, e_disc = e_plus_full.split_total_degree(ham.caps.degW)
    ledger.charge("energy-shift:deg", e_disc.majorant_norm(dom_out.h))
    phi_step = phi_step.with_param_map(phi, ctx, label="fold-param")

    # ---- stage 6: measurement -------------------------------------------------
    eps_out = P_new.majorant_norm(dom_out)
    ledger_total = ledger.total
    eps_cert = eps_out + ledger_total
    envelope_ok = eps_cert <= envelope_target
    _record(checks, settings, "discard-budget", ledger_total, budget_total,
            "total truncated mass within its share of the envelope")
    _record(checks, settings, "envelope", eps_cert, envelope_target,
            "measured contraction of the remainder (binding)")

    new_ham = ParamHamiltonian(omega0=omega0, e=e_plus, P=P_new,
                               domain=dom_out, caps=ham.caps)
    report = StepReport(
        eps_in=eps_in, eps_out=eps_out, eps_out_certified=eps_cert,
        envelope_target=envelope_target, envelope_ok=envelope_ok,
        contraction=eps_cert / eps_in, sigma=sigma, Q=basis.Q,
        basis_q=tuple(v.q for v in basis.vectors), basis_det=basis.determinant,
        tail_norm_in=tail_norm, averaged_constant=c_poly.value_at_zero(),
        nu_norm=nu_norm, inversion=dict(inv.certificates),
        stages=stage_reports, conditions=checks,
        ledger=ledger.summary(), ledger_total=ledger_total,
        domain_in=(dom_in.s, dom_in.r, dom_in.h),
        domain_out=(dom_out.s, dom_out.r, dom_out.h),
    )
    return StepResult(hamiltonian=new_ham, transform=phi_step, report=report)


def _trivial_step(ham: ParamHamiltonian, basis: RationalBasis, sigma: float,
                  settings: StepSettings, dom_out: DomainParams) -> StepResult:
    report = StepReport(
        eps_in=0.0, eps_out=0.0, eps_out_certified=0.0, envelope_target=0.0,
        envelope_ok=True, contraction=0.0, sigma=sigma, Q=basis.Q,
        basis_q=tuple(v.q for v in basis.vectors),
        basis_det=basis.determinant, tail_norm_in=0.0, averaged_constant=0.0,
        nu_norm=0.0, inversion={}, stages=[], conditions=[], ledger={},
        ledger_total=0.0,
        domain_in=(ham.domain.s, ham.domain.r, ham.domain.h),
        domain_out=(dom_out.s, dom_out.r, dom_out.h),
    )
    new_ham = ParamHamiltonian(omega0=ham.omega0, e=ham.e, P=ham.P,
                               domain=dom_out, caps=ham.caps)
    return StepResult(hamiltonian=new_ham,
                      transform=Transform.identity(ham.omega0.values),
                      report=report)
