"""Iteration driver: repeated normal-form steps with a geometric schedule.

The schedule doubles a divisor threshold Delta_i = 2^i Delta(Q0) and sets
Q_i = deltaStar(Delta_i), sigma_i = C / Q_i; the choice of Q0 guarantees the
total strip loss sum sigma_i stays below half the initial strip.  Each step
must contract the remainder by the envelope factor eta/8; the driver aborts
with StepContractError the moment a step misses its envelope, and with
DivergenceError if the remainder stops improving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diophantine import ArithmeticProfile, build_profile, rational_basis
from .errors import (
    DivergenceError,
    NeedsLargerTableError,
    ScheduleError,
    StepContractError,
)
from .series import DiscardLedger, DomainParams, FourierTaylor, ParamHamiltonian
from .step import StepSettings, kam_step
from .transforms import Transform, TorusEmbedding, TruncationContext

__all__ = [
    "IterationSettings",
    "ScheduleEntry",
    "build_schedule",
    "IterationRecord",
    "TorusResult",
    "iterate",
]


@dataclass(frozen=True)
class IterationSettings:
    max_iters: int = 6
    stop_tol: float = 0.0
    c_sigma: float = 16.0
    step: StepSettings = field(default_factory=StepSettings)
    table_growth_limit: int = 5  # permitted doublings of the psi table


@dataclass(frozen=True)
class ScheduleEntry:
    index: int
    Q: int
    sigma: float
    delta: float


def build_schedule(profile: ArithmeticProfile, s: float,
                   settings: IterationSettings) -> tuple:
    """(schedule, profile): Q_i = deltaStar(2^i Delta(Q0)), sigma_i = C/Q_i.

    Grows the sampled psi table geometrically if the doubling sequence runs
    off its end (bounded by table_growth_limit).
    """
    C = settings.c_sigma
    for _ in range(settings.table_growth_limit + 1):
        try:
            Q0 = profile.choose_q0(s, C)
            delta0 = profile.delta_at(Q0)
            entries = []
            for i in range(settings.max_iters):
                delta_i = delta0 * (2.0 ** i)
                Qi = profile.delta_star(delta_i)
                entries.append(ScheduleEntry(index=i, Q=Qi, sigma=C / Qi,
                                             delta=delta_i))
            total_loss = sum(e.sigma for e in entries)
            if total_loss > s / 2.0:
                raise ScheduleError(
                    f"scheduled strip loss {total_loss:.4f} exceeds s/2 = "
                    f"{s / 2.0:.4f}; increase Q0 or reduce iterations"
                )
            return entries, profile
        except NeedsLargerTableError:
            profile = build_profile(profile.omega, profile.qmax * 2)
    raise NeedsLargerTableError(
        f"psi table did not cover the schedule after "
        f"{settings.table_growth_limit} doublings (qmax = {profile.qmax})"
    )


@dataclass
class IterationRecord:
    index: int
    Q: int
    sigma: float
    eps_before: float
    eps_after: float
    eps_envelope: float
    contraction: float
    telescope: float
    omega_tilde: tuple
    report: dict

    def as_dict(self) -> dict:
        return {
            "index": self.index, "Q": self.Q, "sigma": self.sigma,
            "epsBefore": self.eps_before, "epsAfter": self.eps_after,
            "epsEnvelope": self.eps_envelope, "contraction": self.contraction,
            "telescope": self.telescope,
            "omegaTilde": list(self.omega_tilde),
            "report": self.report,
        }


@dataclass
class TorusResult:
    omega0: tuple
    omega_tilde: tuple
    converged: bool
    stop_reason: str
    eps_final: float
    iterations: list
    hamiltonian: ParamHamiltonian
    transform: Transform
    embedding: TorusEmbedding
    error_bounds: dict
    schedule: list

    def as_dict(self) -> dict:
        return {
            "omega0": list(self.omega0),
            "omegaTilde": list(self.omega_tilde),
            "converged": bool(self.converged),
            "stopReason": self.stop_reason,
            "epsFinal": self.eps_final,
            "iterations": [r.as_dict() for r in self.iterations],
            "errorBounds": self.error_bounds,
            "schedule": [
                {"index": e.index, "Q": e.Q, "sigma": e.sigma, "delta": e.delta}
                for e in self.schedule
            ],
            "embedding": self.embedding.to_payload(),
            "finalDomain": [self.hamiltonian.domain.s,
                            self.hamiltonian.domain.r,
                            self.hamiltonian.domain.h],
        }


def _torus_defects(ham: ParamHamiltonian) -> dict:
    """First-order vector-field defects on the candidate torus (I=0, x=0).

    In the final coordinates dI/dt = -dP/dtheta and dtheta/dt - omega0 =
    dP/dI, both restricted to the torus; their majorant norms on the final
    angle strip bound the invariance error of the embedding.
    """
    n = ham.n
    P = ham.P
    dom = ham.domain

    def restrict(f):
        mask = np.all(f.alpha_part() == 0, axis=1) & \
            np.all(f.beta_part() == 0, axis=1)
        return FourierTaylor(n, f.keys[mask], f.vals[mask])

    act = max(restrict(P.dtheta(a)).majorant_norm(dom) for a in range(n))
    ang = max(restrict(P.dI(a)).majorant_norm(dom) for a in range(n))
    return {
        "actionDefect": act,
        "angleDefect": ang,
        "remainderNorm": ham.perturbation_norm(),
        "strip": dom.s,
        "actionRadius": dom.r,
        "paramRadius": dom.h,
    }


def iterate(ham: ParamHamiltonian, profile: ArithmeticProfile,
            settings: IterationSettings | None = None) -> TorusResult:
    """Run the scheme to tolerance or iteration budget; see module docstring."""
    settings = settings or IterationSettings()
    omega0 = ham.omega0
    schedule, profile = build_schedule(profile, ham.domain.s, settings)
    dom0 = ham.domain
    weights = (1.0 / dom0.r, 1.0 / schedule[0].sigma, 1.0 / dom0.h)

    phi_total = Transform.identity(omega0.values)
    records = []
    compose_ledger = DiscardLedger()
    eps = ham.perturbation_norm()
    converged = False
    stop_reason = "max-iters"
    worse_streak = 0
    prev_eps = math.inf
    for entry in schedule:
        if eps <= settings.stop_tol:
            converged = True
            stop_reason = "tolerance"
            break
        basis = rational_basis(omega0, entry.Q, profile=profile)
        result = kam_step(ham, basis, entry.sigma, settings.step)
        report = result.report
        if not report.envelope_ok:
            raise StepContractError(
                f"step {entry.index} missed its contraction envelope: "
                f"|P+| = {report.eps_out_certified:.6e} > "
                f"{report.envelope_target:.6e}"
            )
        ctx = TruncationContext(
            caps=result.hamiltonian.caps,
            domain=result.hamiltonian.domain,
            ledger=compose_ledger, prune_budget=0.0,
        )
        new_total = phi_total.compose(
            result.transform, ctx, label=f"iter{entry.index}:accumulate")
        telescope = new_total.distance(phi_total, result.hamiltonian.domain,
                                       weights)
        phi_total = new_total
        omega_tilde_now = tuple(
            float(w) for w in phi_total.phi.evaluate(
                np.asarray(omega0.values)))
        records.append(IterationRecord(
            index=entry.index, Q=entry.Q, sigma=entry.sigma,
            eps_before=eps, eps_after=report.eps_out_certified,
            eps_envelope=report.envelope_target,
            contraction=report.contraction, telescope=telescope,
            omega_tilde=omega_tilde_now, report=report.as_dict(),
        ))
        ham = result.hamiltonian
        new_eps = report.eps_out_certified
        if new_eps >= prev_eps:
            worse_streak += 1
            if worse_streak >= 2:
                raise DivergenceError(
                    f"remainder stopped improving for two consecutive steps "
                    f"({prev_eps:.3e} -> {new_eps:.3e})"
                )
        else:
            worse_streak = 0
        prev_eps = new_eps
        eps = new_eps
    if eps <= settings.stop_tol:
        converged = True
        stop_reason = "tolerance"
    elif len(records) == len(schedule):
        # Every scheduled step ran and certified its contraction envelope
        # (violations raise), so the run converged to the scheduled depth.
        converged = True
        stop_reason = "schedule-complete"

    omega_tilde = tuple(
        float(w) for w in phi_total.phi.evaluate(np.asarray(omega0.values)))
    embedding = phi_total.restrict_torus(omega_tilde)
    bounds = _torus_defects(ham)
    bounds["totalStripLoss"] = float(sum(e.sigma for e in schedule[:len(records)]))
    bounds["telescopeSum"] = float(sum(r.telescope for r in records))
    bounds["transformDiscard"] = compose_ledger.total
    return TorusResult(
        omega0=tuple(omega0.values), omega_tilde=omega_tilde,
        converged=converged, stop_reason=stop_reason,
        eps_final=eps, iterations=records, hamiltonian=ham,
        transform=phi_total, embedding=embedding, error_bounds=bounds,
        schedule=list(schedule),
    )
