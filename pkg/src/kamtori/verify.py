"""Dynamical verification of a computed invariant torus.

All checks run in the physical variables ``(p, q)`` against the original
near-integrable Hamiltonian, independently of the series algebra that
produced the torus: the embedding is treated as a black-box candidate
``W(theta) = (p(theta), q(theta))`` and tested against the flow.

Checks:

* invariance residual on an angle grid — pushing the internal frequency
  through the embedding derivative must reproduce the Hamiltonian vector
  field at every grid point;
* energy flatness — the Hamiltonian must be constant along the torus;
* shadowing — a trajectory integrated from a torus point with a
  symplectic (implicit midpoint) integrator must track the quasi-periodic
  motion predicted by the embedding;
* energy drift along the integrated trajectory;
* rotation vector estimated from the trajectory against the internal
  frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DivergenceError, DomainError
from .reduction import IntegrableSpec
from .step import ConditionCheck
from .transforms import TorusEmbedding


@dataclass(frozen=True)
class VerifySettings:
    """Grid, horizon, and integrator parameters for verification."""

    grid: int = 32
    t_max: float = 20.0
    dt: float = 1e-3
    n_orbits: int = 4
    sample_stride: int = 50
    fixed_point_tol: float = 1e-14
    fixed_point_max_iter: int = 16

    def __post_init__(self):
        if self.grid < 4:
            raise DomainError(f"verification grid too small: {self.grid}")
        if self.dt <= 0.0 or self.t_max < 10.0 * self.dt:
            raise DomainError(
                f"bad time stepping: t_max={self.t_max}, dt={self.dt}")
        if self.n_orbits < 1 or self.sample_stride < 1:
            raise DomainError("need at least one orbit and stride >= 1")
        if self.fixed_point_tol <= 0.0 or self.fixed_point_max_iter < 2:
            raise DomainError("bad fixed point controls")


class PhysicalFlow:
    """Vectorized Hamiltonian vector field of ``h(p) + eps f(p, q)``."""

    def __init__(self, spec: IntegrableSpec):
        self.spec = spec
        n = spec.n
        self.n = n
        self._omega0 = np.asarray(spec.omega0.values)
        self._grad_polys = [spec.h_poly.derivative(a) for a in range(n)]
        self._f_dq = [spec.f.dtheta(a) for a in range(n)]
        self._f_dp = [spec.f.dI(a) for a in range(n)]

    def field(self, p: np.ndarray, q: np.ndarray):
        """``(dp/dt, dq/dt)`` at points of shape (..., n)."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        qdot = self._omega0 + np.stack(
            [g.evaluate(p) for g in self._grad_polys], axis=-1)
        eps = self.spec.epsilon
        if eps != 0.0 and not self.spec.f.is_zero:
            fq = np.stack([s.evaluate(theta=q, I=p).real
                           for s in self._f_dq], axis=-1)
            fp = np.stack([s.evaluate(theta=q, I=p).real
                           for s in self._f_dp], axis=-1)
            pdot = -eps * fq
            qdot = qdot + eps * fp
        else:
            pdot = np.zeros_like(p)
        return pdot, qdot

    def value(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Hamiltonian values at points of shape (..., n)."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        out = self.spec.h_value(p)
        if self.spec.epsilon != 0.0 and not self.spec.f.is_zero:
            out = out + self.spec.epsilon * \
                self.spec.f.evaluate(theta=q, I=p).real
        return out


def _midpoint_step(flow: PhysicalFlow, p: np.ndarray, q: np.ndarray,
                   dt: float, tol: float, max_iter: int):
    """One implicit midpoint step, midpoint solved by fixed point."""
    pd, qd = flow.field(p, q)
    pm = p + 0.5 * dt * pd
    qm = q + 0.5 * dt * qd
    scale = 1.0 + float(np.abs(pm).max()) + float(np.abs(qm).max())
    for _ in range(max_iter):
        pd, qd = flow.field(pm, qm)
        pm_new = p + 0.5 * dt * pd
        qm_new = q + 0.5 * dt * qd
        delta = max(float(np.abs(pm_new - pm).max()),
                    float(np.abs(qm_new - qm).max()))
        pm, qm = pm_new, qm_new
        if delta <= tol * scale:
            return 2.0 * pm - p, 2.0 * qm - q
    raise DivergenceError(
        f"implicit midpoint solve stalled (last update {delta:.3e}); "
        f"reduce the time step")


def integrate_orbits(flow: PhysicalFlow, p0: np.ndarray, q0: np.ndarray,
                     settings: VerifySettings):
    """Integrate a batch of orbits; returns (times, P, Q) sample arrays.

    ``P`` and ``Q`` have shape (samples, batch, n); angles are in the
    universal cover (never wrapped) so rotation slopes can be fitted
    directly.
    """
    steps = int(round(settings.t_max / settings.dt))
    p = np.array(p0, dtype=float)
    q = np.array(q0, dtype=float)
    times = [0.0]
    P = [p.copy()]
    Q = [q.copy()]
    for i in range(1, steps + 1):
        p, q = _midpoint_step(flow, p, q, settings.dt,
                              settings.fixed_point_tol,
                              settings.fixed_point_max_iter)
        if i % settings.sample_stride == 0 or i == steps:
            times.append(i * settings.dt)
            P.append(p.copy())
            Q.append(q.copy())
    return np.asarray(times), np.asarray(P), np.asarray(Q)


@dataclass(frozen=True)
class VerificationResult:
    """Measured defects plus the trajectory of the first sample orbit."""

    invariance_residual: float
    action_residual: float
    angle_residual: float
    energy_spread: float
    energy_drift: float
    shadow_error: float
    shadow_action_error: float
    shadow_angle_error: float
    rotation_estimate: tuple
    rotation_error: float
    grid: int
    t_max: float
    dt: float
    n_orbits: int
    times: np.ndarray = field(repr=False)
    trajectory_p: np.ndarray = field(repr=False)
    trajectory_q: np.ndarray = field(repr=False)
    trajectory_dist: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "invarianceResidual": float(self.invariance_residual),
            "actionResidual": float(self.action_residual),
            "angleResidual": float(self.angle_residual),
            "energySpread": float(self.energy_spread),
            "energyDrift": float(self.energy_drift),
            "shadowError": float(self.shadow_error),
            "shadowActionError": float(self.shadow_action_error),
            "shadowAngleError": float(self.shadow_angle_error),
            "rotationEstimate": [float(w) for w in self.rotation_estimate],
            "rotationError": float(self.rotation_error),
            "grid": int(self.grid),
            "tMax": float(self.t_max),
            "dt": float(self.dt),
            "nOrbits": int(self.n_orbits),
        }

    def checks(self, *, invariance_tol: float, shadow_tol: float,
               energy_tol: float, rotation_tol: float) -> list:
        """Threshold the measured defects into condition checks."""
        items = [
            ConditionCheck(
                name="torus-invariance",
                lhs=self.invariance_residual, rhs=invariance_tol,
                satisfied=bool(self.invariance_residual <= invariance_tol),
                note="vector-field residual along the embedded torus"),
            ConditionCheck(
                name="orbit-shadowing",
                lhs=self.shadow_error, rhs=shadow_tol,
                satisfied=bool(self.shadow_error <= shadow_tol),
                note="distance between the integrated orbit and the "
                     "quasi-periodic prediction"),
            ConditionCheck(
                name="energy-drift",
                lhs=self.energy_drift, rhs=energy_tol,
                satisfied=bool(self.energy_drift <= energy_tol),
                note="Hamiltonian drift along the integrated orbit"),
            ConditionCheck(
                name="rotation-vector",
                lhs=self.rotation_error, rhs=rotation_tol,
                satisfied=bool(self.rotation_error <= rotation_tol),
                note="fitted trajectory rotation vector against the "
                     "internal frequency"),
        ]
        return items


def _angle_grid(n: int, g: int) -> np.ndarray:
    pts = np.linspace(0.0, 1.0, g, endpoint=False)
    mesh = np.meshgrid(*([pts] * n), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, n)


def verify_torus(spec: IntegrableSpec, embedding: TorusEmbedding,
                 base_action, settings: Optional[VerifySettings] = None
                 ) -> VerificationResult:
    """Run all dynamical checks for an embedded torus candidate.

    ``base_action`` is the action offset of the torus in physical
    variables (the frequency-to-action series evaluated at the parameter
    the iteration selected); the embedding supplies the oscillation
    around it.
    """
    settings = settings or VerifySettings()
    n = spec.n
    if embedding.n != n:
        raise DomainError(
            f"embedding dimension {embedding.n} does not match the "
            f"Hamiltonian dimension {n}")
    base = np.asarray(base_action, dtype=float)
    if base.shape != (n,):
        raise DomainError(
            f"base action must have shape ({n},), got {base.shape}")
    flow = PhysicalFlow(spec)
    omega0 = np.asarray(spec.omega0.values)

    # --- invariance residual on the angle grid ---------------------------
    grid_pts = _angle_grid(n, settings.grid)
    I_emb, q_emb = embedding.evaluate(grid_pts)
    p_emb = base + I_emb
    dI, dTh = embedding.derivative(grid_pts)
    p_rate = dI @ omega0
    q_rate = dTh @ omega0
    pd, qd = flow.field(p_emb, q_emb)
    action_residual = float(np.abs(p_rate - pd).max())
    angle_residual = float(np.abs(q_rate - qd).max())
    invariance_residual = max(action_residual, angle_residual)
    energies = flow.value(p_emb, q_emb)
    energy_spread = float(energies.max() - energies.min())

    # --- trajectory checks ------------------------------------------------
    rng = np.random.default_rng(2026)
    theta0 = rng.random((settings.n_orbits, n))
    I0, q0 = embedding.evaluate(theta0)
    p0 = base + I0
    times, P, Q = integrate_orbits(flow, p0, q0, settings)

    # quasi-periodic prediction at the sample times
    phases = theta0[None, :, :] + times[:, None, None] * omega0[None, None, :]
    I_pred, q_pred = embedding.evaluate(phases)
    p_pred = base + I_pred
    dp = P - p_pred
    dq = Q - q_pred
    dq = (dq + 0.5) % 1.0 - 0.5
    shadow_action = float(np.abs(dp).max())
    shadow_angle = float(np.abs(dq).max())
    shadow_error = max(shadow_action, shadow_angle)
    dist0 = np.maximum(np.abs(dp[:, 0, :]).max(axis=-1),
                       np.abs(dq[:, 0, :]).max(axis=-1))

    H = flow.value(P, Q)
    energy_drift = float(np.abs(H - H[0]).max())

    # least-squares rotation slope per axis, worst orbit reported
    tc = times - times.mean()
    denom = float(tc @ tc)
    slopes = np.einsum("s,sbn->bn", tc, Q - Q.mean(axis=0)) / denom
    rot_err = float(np.abs(slopes - omega0).max())
    rotation = slopes.mean(axis=0)

    return VerificationResult(
        invariance_residual=invariance_residual,
        action_residual=action_residual,
        angle_residual=angle_residual,
        energy_spread=energy_spread,
        energy_drift=energy_drift,
        shadow_error=shadow_error,
        shadow_action_error=shadow_action,
        shadow_angle_error=shadow_angle,
        rotation_estimate=tuple(float(w) for w in rotation),
        rotation_error=rot_err,
        grid=settings.grid,
        t_max=settings.t_max,
        dt=settings.dt,
        n_orbits=settings.n_orbits,
        times=times,
        trajectory_p=P[:, 0, :],
        trajectory_q=Q[:, 0, :],
        trajectory_dist=dist0,
    )
