"""Dynamical verification: integrator correctness, defect detection on
known-invariant and known-non-invariant tori, and the desk pipeline torus.
"""
from __future__ import annotations

import numpy as np
import pytest

from kamtori.cli import _base_action
from kamtori.errors import DivergenceError, DomainError
from kamtori.reduction import IntegrableSpec, cosine_series
from kamtori.series import FourierTaylor
from kamtori.transforms import TorusEmbedding
from kamtori.verify import (PhysicalFlow, VerifySettings, _midpoint_step,
                            integrate_orbits, verify_torus)

GOLDEN_TUPLE = (1.0, 0.6180339887498949)

FAST = VerifySettings(grid=8, t_max=2.0, dt=1e-2, n_orbits=2,
                      sample_stride=10)


def flat_embedding(omega, n=2):
    zero = tuple(FourierTaylor.zero(n) for _ in range(n))
    return TorusEmbedding(omega0=tuple(omega), omega_tilde=tuple(omega),
                          action=zero, angle_shift=zero)


def desk_style_spec(golden, epsilon):
    f = cosine_series(2, [((1, 0), 1.0), ((1, 1), 1.0)])
    return IntegrableSpec.quadratic(golden, f, epsilon)


# --- settings validation ----------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"grid": 3},
    {"dt": 0.0},
    {"dt": -1e-3},
    {"t_max": 5e-3, "dt": 1e-3},
    {"n_orbits": 0},
    {"sample_stride": 0},
    {"fixed_point_tol": 0.0},
    {"fixed_point_max_iter": 1},
])
def test_settings_validation_rejects_bad_controls(kwargs):
    with pytest.raises(DomainError):
        VerifySettings(**kwargs)


# --- exact case: integrable system, flat torus ------------------------------

def test_flat_torus_of_integrable_system_verifies_exactly(golden):
    spec = desk_style_spec(golden, 0.0)
    emb = flat_embedding(GOLDEN_TUPLE)
    ver = verify_torus(spec, emb, (0.0, 0.0), FAST)
    # at p = 0 the vector field is exactly (0, omega0): residual is zero
    assert ver.invariance_residual == 0.0
    assert ver.energy_spread == 0.0
    # p stays bit-exactly zero under midpoint, so the energy cannot move
    assert ver.energy_drift == 0.0
    # angles accumulate k * dt * omega vs the predicted t * omega: rounding
    assert ver.shadow_error <= 1e-12
    assert ver.rotation_error <= 1e-12
    assert ver.rotation_estimate == pytest.approx(GOLDEN_TUPLE, abs=1e-12)


def test_verification_is_deterministic(golden):
    spec = desk_style_spec(golden, 0.0)
    emb = flat_embedding(GOLDEN_TUPLE)
    a = verify_torus(spec, emb, (0.0, 0.0), FAST).as_dict()
    b = verify_torus(spec, emb, (0.0, 0.0), FAST).as_dict()
    assert a == b


# --- defect detection -------------------------------------------------------

def test_flat_torus_of_perturbed_system_is_flagged(golden):
    eps = 1e-3
    spec = desk_style_spec(golden, eps)
    emb = flat_embedding(GOLDEN_TUPLE)
    ver = verify_torus(spec, emb, (0.0, 0.0), FAST)
    # the action rate should be -eps f_q != 0 while the embedding predicts 0
    assert ver.invariance_residual >= eps
    checks = ver.checks(invariance_tol=1e-8, shadow_tol=1e-8,
                        energy_tol=1e-8, rotation_tol=1e-8)
    by_name = {c.name: c for c in checks}
    assert set(by_name) == {"torus-invariance", "orbit-shadowing",
                            "energy-drift", "rotation-vector"}
    assert not by_name["torus-invariance"].satisfied
    assert by_name["torus-invariance"].lhs == ver.invariance_residual


def test_wrong_base_action_shows_up_as_angle_residual(golden):
    spec = desk_style_spec(golden, 0.0)
    emb = flat_embedding(GOLDEN_TUPLE)
    base = (0.05, -0.02)
    ver = verify_torus(spec, emb, base, FAST)
    # quadratic twist: the angle rate is omega0 + base, embedding predicts
    # omega0, so the residual equals the offset exactly
    assert ver.angle_residual == pytest.approx(0.05, rel=1e-15)
    assert ver.action_residual == 0.0
    assert ver.invariance_residual == pytest.approx(0.05, rel=1e-15)


# --- shape guards -----------------------------------------------------------

def test_dimension_mismatch_is_rejected(golden):
    spec = desk_style_spec(golden, 0.0)
    emb3 = flat_embedding((1.0, 0.5, 0.25), n=3)
    with pytest.raises(DomainError):
        verify_torus(spec, emb3, (0.0, 0.0, 0.0), FAST)


def test_bad_base_action_shape_is_rejected(golden):
    spec = desk_style_spec(golden, 0.0)
    emb = flat_embedding(GOLDEN_TUPLE)
    with pytest.raises(DomainError):
        verify_torus(spec, emb, (0.0, 0.0, 0.0), FAST)


# --- integrator properties --------------------------------------------------

def test_midpoint_step_is_time_reversible(golden):
    spec = desk_style_spec(golden, 1e-2)
    flow = PhysicalFlow(spec)
    p0 = np.array([[0.03, -0.01]])
    q0 = np.array([[0.20, 0.70]])
    p1, q1 = _midpoint_step(flow, p0, q0, 1e-2, 1e-15, 30)
    p2, q2 = _midpoint_step(flow, p1, q1, -1e-2, 1e-15, 30)
    assert np.abs(p2 - p0).max() <= 1e-13
    assert np.abs(q2 - q0).max() <= 1e-13


def test_midpoint_integration_converges_at_second_order(golden):
    spec = desk_style_spec(golden, 1e-2)
    flow = PhysicalFlow(spec)
    p0 = np.array([[0.03, -0.01]])
    q0 = np.array([[0.20, 0.70]])

    def final_state(dt):
        s = VerifySettings(grid=8, t_max=1.0, dt=dt, n_orbits=1,
                           sample_stride=10 ** 9)
        _, P, Q = integrate_orbits(flow, p0, q0, s)
        return np.concatenate([P[-1].ravel(), Q[-1].ravel()])

    ref = final_state(1.0 / 4096)
    errs = [np.abs(final_state(1.0 / m) - ref).max() for m in (64, 128, 256)]
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    for r in ratios:
        assert 3.2 <= r <= 4.8, (errs, ratios)


def test_midpoint_solver_reports_divergence(golden):
    spec = desk_style_spec(golden, 1.0)
    flow = PhysicalFlow(spec)
    p0 = np.array([[0.0, 0.0]])
    q0 = np.array([[0.2, 0.7]])
    with pytest.raises(DivergenceError):
        _midpoint_step(flow, p0, q0, 50.0, 1e-14, 8)


# --- the desk torus ---------------------------------------------------------

def test_desk_torus_passes_dynamical_verification(desk_reduction, desk_result):
    omega, spec, _, red = desk_reduction
    result, _ = desk_result
    base = _base_action(red, omega, result.omega_tilde)
    ver = verify_torus(spec, result.embedding, base,
                       VerifySettings(grid=8, t_max=2.0, dt=1e-3,
                                      n_orbits=2, sample_stride=100))
    assert ver.invariance_residual <= 1e-10
    assert ver.energy_spread <= 1e-12
    assert ver.shadow_error <= 1e-8
    assert ver.energy_drift <= 1e-9
    assert ver.rotation_error <= 1e-6
    checks = ver.checks(invariance_tol=1e-8, shadow_tol=1e-6,
                        energy_tol=1e-6, rotation_tol=1e-4)
    assert all(c.satisfied for c in checks)
