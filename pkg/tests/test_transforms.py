"""Canonical transformations: Lie-series flows checked against direct ODE
integration, truncation accounting, composition, and torus embeddings."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kamtori.errors import DomainError
from kamtori.series import (DiscardLedger, DomainParams, FourierTaylor,
                            SeriesCaps)
from kamtori.transforms import (Transform, TorusEmbedding, TruncationContext,
                                lie_transform, substitute_angles,
                                transform_from_generator)

OMEGA0 = (1.0, 0.6180339887498949)


def make_ctx(cutoffK=24, degI=3, degW=2, s=0.25, r=0.5, h=0.1,
             prune_budget=0.0):
    return TruncationContext(
        caps=SeriesCaps(cutoffK=cutoffK, degI=degI, degW=degW),
        domain=DomainParams(s, r, h),
        ledger=DiscardLedger(),
        prune_budget=prune_budget,
    )


def real_generator(scale=1e-3):
    """Small real action-affine generator with a few angle harmonics."""
    terms = {
        (1, 0, 0, 0, 0, 0): 0.4,
        (0, 1, 0, 0, 0, 0): 0.25 + 0.1j,
        (1, 1, 1, 0, 0, 0): 0.2,
        (1, -1, 0, 1, 0, 0): 0.15j,
    }
    f = FourierTaylor.from_terms(2, {k: scale * v for k, v in terms.items()})
    return f.symmetrized()


def rk4_flow(F: FourierTaylor, theta0, I0, t_end=1.0, steps=2000):
    """Forward flow of dtheta/dt = dF/dI, dI/dt = -dF/dtheta by plain RK4."""
    n = F.n
    dFdI = [F.dI(a) for a in range(n)]
    dFdth = [F.dtheta(a) for a in range(n)]

    def field(y):
        th, I = y[:n], y[n:]
        dth = np.array([complex(g.evaluate(theta=th, I=I)).real
                        for g in dFdI])
        dI = np.array([-complex(g.evaluate(theta=th, I=I)).real
                       for g in dFdth])
        return np.concatenate([dth, dI])

    y = np.concatenate([np.asarray(theta0, float), np.asarray(I0, float)])
    hstep = t_end / steps
    for _ in range(steps):
        k1 = field(y)
        k2 = field(y + 0.5 * hstep * k1)
        k3 = field(y + 0.5 * hstep * k2)
        k4 = field(y + hstep * k3)
        y = y + hstep / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y[:2], y[2:]


def test_generated_transform_matches_ode_flow():
    F = real_generator(1e-3)
    ctx = make_ctx()
    T = transform_from_generator(F, ctx, OMEGA0)
    theta0 = np.array([0.15, 0.82])
    I0 = np.array([0.04, -0.03])
    I_old, theta_old, omega_old = T.evaluate(theta0, I0, np.asarray(OMEGA0))
    th_ref, I_ref = rk4_flow(F, theta0, I0)
    assert np.max(np.abs(theta_old - th_ref)) <= 1e-10
    assert np.max(np.abs(I_old - I_ref)) <= 1e-10
    assert np.max(np.abs(omega_old - np.asarray(OMEGA0))) == 0.0


def test_lie_transform_is_composition_with_flow():
    F = real_generator(5e-4)
    ctx = make_ctx()
    g = FourierTaylor.from_terms(2, {
        (1, 0, 0, 0, 0, 0): 0.3, (0, 2, 1, 0, 0, 0): 0.2j,
        (0, 0, 2, 0, 0, 0): 0.5}).symmetrized()
    moved = lie_transform(g, F, ctx, "test")
    theta0 = np.array([0.31, 0.64])
    I0 = np.array([0.02, 0.05])
    th1, I1 = rk4_flow(F, theta0, I0)
    want = complex(g.evaluate(theta=th1, I=I1)).real
    got = complex(moved.evaluate(theta=theta0, I=I0)).real
    assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_flow_of_zero_generator_is_identity():
    ctx = make_ctx()
    T = transform_from_generator(FourierTaylor.zero(2), ctx, OMEGA0)
    theta0 = np.array([0.2, 0.7])
    I0 = np.array([0.1, -0.2])
    I_old, theta_old, _ = T.evaluate(theta0, I0, np.asarray(OMEGA0))
    assert np.array_equal(theta_old, theta0)
    assert np.array_equal(I_old, I0)


def test_generator_must_be_action_affine():
    bad = FourierTaylor.from_terms(2, {(1, 0, 2, 0, 0, 0): 1e-3}).symmetrized()
    with pytest.raises(DomainError):
        transform_from_generator(bad, make_ctx(), OMEGA0)


def test_jacobian_block_matches_finite_differences():
    F = real_generator(2e-3)
    ctx = make_ctx()
    T = transform_from_generator(F, ctx, OMEGA0)
    theta0 = np.array([0.41, 0.09])
    I0 = np.array([0.03, 0.01])
    omega = np.asarray(OMEGA0)
    J = np.real(T.jacobian_block(theta0, I0, omega))
    eps = 1e-6

    def both(th, I):
        I_old, th_old, _ = T.evaluate(th, I, omega)
        return np.concatenate([np.real(I_old), np.real(th_old)])

    # columns: actions first, then angles
    for j in range(2):
        e = np.zeros(2)
        e[j] = eps
        col_I = (both(theta0, I0 + e) - both(theta0, I0 - e)) / (2 * eps)
        col_th = (both(theta0 + e, I0) - both(theta0 - e, I0)) / (2 * eps)
        assert np.max(np.abs(J[:, j] - col_I)) <= 1e-6
        assert np.max(np.abs(J[:, 2 + j] - col_th)) <= 1e-6


def test_symplectic_defect_small_for_generated_flow():
    F = real_generator(1e-3)
    ctx = make_ctx()
    T = transform_from_generator(F, ctx, OMEGA0)
    rng = np.random.default_rng(31)
    defect = T.symplectic_defect(rng, 64, DomainParams(0.05, 0.05, 1e-3))
    assert defect <= 1e-10


def test_composition_matches_pointwise_chain():
    Fa = real_generator(8e-4)
    Fb = FourierTaylor.from_terms(2, {
        (0, 1, 0, 0, 0, 0): 6e-4, (1, 1, 0, 1, 0, 0): 3e-4j}).symmetrized()
    ctx = make_ctx()
    T1 = transform_from_generator(Fa, ctx, OMEGA0)
    T2 = transform_from_generator(Fb, ctx, OMEGA0)
    T12 = T1.compose(T2, ctx, "test")
    theta0 = np.array([0.22, 0.58])
    I0 = np.array([0.01, -0.02])
    omega = np.asarray(OMEGA0)
    # new -> mid via T2, mid -> old via T1 (real transforms: drop roundoff Im)
    I_mid, th_mid, om_mid = T2.evaluate(theta0, I0, omega)
    I_old, th_old, om_old = T1.evaluate(np.real(th_mid), np.real(I_mid),
                                        om_mid)
    I_got, th_got, om_got = T12.evaluate(theta0, I0, omega)
    assert np.max(np.abs(I_got - I_old)) <= 1e-12
    assert np.max(np.abs(th_got - th_old)) <= 1e-12
    assert np.max(np.abs(om_got - om_old)) <= 1e-12


def test_substitute_angles_matches_evaluation():
    ctx = make_ctx()
    g = FourierTaylor.from_terms(2, {
        (1, 0, 0, 0, 0, 0): 0.4, (1, -1, 0, 0, 0, 0): 0.25}).symmetrized()
    shift = 1e-2
    v = (FourierTaylor.from_terms(2, {(0, 1, 0, 0, 0, 0): shift}).symmetrized(),
         FourierTaylor.zero(2))
    moved = substitute_angles(g, v, ctx, "test")
    theta0 = np.array([0.37, 0.11])
    vs = np.array([complex(f.evaluate(theta=theta0)).real for f in v])
    want = complex(g.evaluate(theta=theta0 + vs)).real
    got = complex(moved.evaluate(theta=theta0)).real
    assert got == pytest.approx(want, rel=1e-11, abs=1e-13)


# --- truncation accounting ---------------------------------------------------

def test_clip_charges_exact_discard_mass():
    ctx = make_ctx(cutoffK=2, degI=1, degW=1)
    f = FourierTaylor.from_terms(2, {
        (1, 0, 0, 0, 0, 0): 1.0,     # kept
        (3, 0, 0, 0, 0, 0): 0.5,     # cut: |k|_1 > 2
        (0, 0, 2, 0, 0, 0): 0.25,    # cut: |alpha| > 1
        (0, 0, 0, 0, 2, 0): 0.125,   # cut: |beta| > 1
    })
    kept = ctx.clip(f, "test")
    kept_keys = {tuple(map(int, row)) for row in kept.keys}
    assert kept_keys == {(1, 0, 0, 0, 0, 0)}
    dom = ctx.domain
    want = (0.5 * math.exp(2 * math.pi * dom.s * 3)
            + 0.25 * dom.r ** 2 + 0.125 * dom.h ** 2)
    assert ctx.ledger.total == pytest.approx(want, rel=1e-14)


def test_prune_respects_budget_and_charges_mass():
    ctx = make_ctx(prune_budget=1e-6)
    tiny = 1e-12
    f = FourierTaylor.from_terms(2, {
        (1, 0, 0, 0, 0, 0): 1.0,
        (2, 0, 0, 0, 0, 0): tiny,
        (0, 1, 0, 0, 0, 0): tiny,
    })
    kept = ctx.clip(f, "test", prune=True)
    assert kept.num_terms < f.num_terms
    assert 0.0 < ctx.ledger.total <= 1e-6


# --- torus embeddings ---------------------------------------------------------

def test_identity_restricts_to_flat_torus():
    T = Transform.identity(OMEGA0)
    emb = T.restrict_torus(OMEGA0)
    theta = np.array([[0.1, 0.9], [0.5, 0.25]])
    I, th_im = emb.evaluate(theta)
    assert np.max(np.abs(I)) == 0.0
    assert np.array_equal(th_im, theta)


def test_embedding_payload_roundtrip():
    F = real_generator(1e-3)
    ctx = make_ctx()
    T = transform_from_generator(F, ctx, OMEGA0)
    emb = T.restrict_torus((1.0 + 1e-5, OMEGA0[1]))
    back = TorusEmbedding.from_payload(emb.to_payload())
    theta = np.array([0.3, 0.8])
    I1, th1 = emb.evaluate(theta)
    I2, th2 = back.evaluate(theta)
    assert np.array_equal(I1, I2)
    assert np.array_equal(th1, th2)
    assert back.omega_tilde == emb.omega_tilde


def test_embedding_derivative_matches_finite_differences():
    F = real_generator(1e-3)
    ctx = make_ctx()
    T = transform_from_generator(F, ctx, OMEGA0)
    emb = T.restrict_torus(OMEGA0)
    theta = np.array([0.27, 0.63])
    dI, dTh = emb.derivative(theta)
    eps = 1e-6
    for b in range(2):
        e = np.zeros(2)
        e[b] = eps
        I_hi, th_hi = emb.evaluate(theta + e)
        I_lo, th_lo = emb.evaluate(theta - e)
        assert np.max(np.abs(dI[:, b] - (I_hi - I_lo) / (2 * eps))) <= 1e-6
        assert np.max(np.abs(dTh[:, b] - (th_hi - th_lo) / (2 * eps))) <= 1e-6
