"""Reduction of a physical near-integrable Hamiltonian to parameterized
normal form: frozen desk-scale constants, a cubic-twist generalization,
non-degeneracy guards, and torus placement."""
from __future__ import annotations

import math

import numpy as np
import pytest

from kamtori.errors import (DomainError, EpsilonTooLargeError,
                            NondegeneracyError, PlacementError)
from kamtori.parampoly import ParamPoly
from kamtori.reduction import (IntegrableSpec, action_polynomial,
                               cosine_series, place_torus,
                               reduce_to_param_form)
from kamtori.series import FourierTaylor, SeriesCaps

GOLDEN_TUPLE = (1.0, 0.6180339887498949)


# --- spec construction -------------------------------------------------------

def test_cosine_series_structure():
    f = cosine_series(2, [((1, 0), 1.0), ((1, 1), 0.5)])
    d = {tuple(map(int, row)): complex(v) for row, v in zip(f.keys, f.vals)}
    assert d[(1, 0, 0, 0, 0, 0)] == pytest.approx(0.5)
    assert d[(-1, 0, 0, 0, 0, 0)] == pytest.approx(0.5)
    assert d[(1, 1, 0, 0, 0, 0)] == pytest.approx(0.25)
    assert d[(-1, -1, 0, 0, 0, 0)] == pytest.approx(0.25)
    assert f.reality_defect() == 0.0


def test_action_polynomial_rejects_low_degree():
    with pytest.raises(DomainError):
        action_polynomial(np.eye(2), [((1, 0), 0.3)])


def test_spec_validates_hessian(golden):
    with pytest.raises(NondegeneracyError):
        spec = IntegrableSpec.quadratic(
            golden, cosine_series(2, [((1, 0), 1.0)]), 1e-6,
            hessian=[[1.0, 1.0], [1.0, 1.0]])
        # degenerate Hessian surfaces at reduction
        from kamtori.diophantine import build_profile
        reduce_to_param_form(spec, 0.4, SeriesCaps(8, 2, 2),
                             build_profile(golden, 512))


# --- frozen desk reduction ----------------------------------------------------

def test_desk_reduction_frozen_report(desk_reduction):
    _, _, _, red = desk_reduction
    rep = red.report
    assert red.q0 == 314
    assert rep["q0"] == 314
    assert rep["M"] == pytest.approx(1.0, rel=1e-14)
    assert rep["F"] == pytest.approx(164.75131947834493, rel=1e-12)
    assert rep["r"] == pytest.approx(0.012835549052469275, rel=1e-12)
    assert rep["epsParam"] == pytest.approx(3.295026389566898e-4, rel=1e-12)
    assert rep["psiQ0"] == pytest.approx(321.9968943807959, rel=1e-12)
    assert rep["deltaQ0"] == pytest.approx(101107.0248355699, rel=1e-12)
    assert rep["hAuto"] == pytest.approx(4.945254801168848e-6, rel=1e-12)
    assert rep["h"] == pytest.approx(1e-5, rel=1e-15)  # pinned by config
    assert rep["hessianCondition"] == pytest.approx(1.0, rel=1e-12)
    assert rep["jetResidual"] == 0.0
    assert rep["discardTotal"] == 0.0
    assert rep["perturbationNorm"] == pytest.approx(rep["epsParam"],
                                                    rel=1e-12)


def test_desk_reduction_checks_recorded(desk_reduction):
    _, _, _, red = desk_reduction
    by_name = {c.name: c for c in red.checks}
    gate = by_name["epsilon-smallness"]
    assert gate.satisfied
    assert gate.lhs == pytest.approx(0.10609882643433077, rel=1e-10)
    disc = by_name["reduction-discard"]
    assert disc.satisfied and disc.lhs == 0.0


def test_desk_energy_and_placement_are_exact(desk_reduction):
    _, _, _, red = desk_reduction
    # e(x) = omega0 . x + |x|^2 / 2 for the quadratic twist
    e = red.hamiltonian.e
    x = np.array([3e-6, -2e-6])
    want = GOLDEN_TUPLE[0] * x[0] + GOLDEN_TUPLE[1] * x[1] + \
        0.5 * float(x @ x)
    assert float(e.evaluate(x)) == pytest.approx(want, rel=1e-12)
    # action placement p*(x) = x (identity Hessian)
    for a, comp in enumerate(red.p_star.components):
        assert float(comp.evaluate(x)) == pytest.approx(x[a], abs=1e-18)


def test_desk_perturbation_is_pure_angle_series(desk_reduction):
    _, _, _, red = desk_reduction
    P = red.hamiltonian.P
    assert np.all(P.alpha_part().sum(axis=1) <= 2)
    pure_angle = P.keys[P.alpha_part().sum(axis=1) == 0]
    # the two cosine modes survive as four conjugate exponentials
    kset = {tuple(map(int, row[:2])) for row in pure_angle}
    assert kset == {(1, 0), (-1, 0), (1, 1), (-1, -1)}


def test_strict_mode_rejects_large_epsilon(golden, golden_profile,
                                           desk_config):
    spec = IntegrableSpec.quadratic(
        golden, cosine_series(2, [((1, 0), 1.0), ((1, 1), 1.0)]), 0.5)
    with pytest.raises(EpsilonTooLargeError):
        reduce_to_param_form(spec, 0.4, desk_config.caps, golden_profile,
                             param_radius=1e-5, condition_mode="strict")


# --- cubic twist generalization -------------------------------------------------

@pytest.fixture(scope="module")
def cubic_spec(golden):
    f = cosine_series(2, [((1, 0), 1.0), ((1, 1), 1.0)])
    h_extra = action_polynomial(np.eye(2), [((3, 0), 0.1)])
    return IntegrableSpec(omega0=golden, h_poly=h_extra, f=f, epsilon=1e-6)


@pytest.fixture(scope="module")
def cubic_reduction(cubic_spec, golden_profile, desk_config):
    return reduce_to_param_form(cubic_spec, 0.4, desk_config.caps,
                                golden_profile, param_radius=1e-5)


def test_cubic_gradient_inversion_is_accurate(cubic_reduction, cubic_spec):
    red = cubic_reduction
    rng = np.random.default_rng(41)
    h = red.hamiltonian.domain.h
    for _ in range(10):
        x = rng.uniform(-h, h, size=2)
        p = np.array([float(c.evaluate(x)) for c in red.p_star.components])
        grad = cubic_spec.h_gradient(p)
        want = np.asarray(GOLDEN_TUPLE) + x
        assert np.max(np.abs(grad - want)) <= 1e-15


def test_cubic_jet_residual_reported(cubic_reduction):
    # truncating the inverse jet at finite degree leaves a measurable tail
    assert 0.0 < cubic_reduction.report["jetResidual"] < 1e-12


def test_cubic_discards_are_charged_within_budget(cubic_reduction):
    rep = cubic_reduction.report
    assert rep["discardTotal"] > 0.0
    by_name = {c.name: c for c in cubic_reduction.checks}
    disc = by_name["reduction-discard"]
    assert disc.satisfied
    assert disc.lhs == pytest.approx(rep["discardTotal"], rel=1e-12)


# --- torus placement ------------------------------------------------------------

def test_place_torus_quadratic_exact(desk_reduction):
    _, spec, _, _ = desk_reduction
    omega_tilde = (1.0 + 2e-6, GOLDEN_TUPLE[1] - 1e-6)
    placed = place_torus(spec, omega_tilde)
    # quadratic twist: gradient is p + omega0, so the action equals the
    # floating-point frequency offset exactly
    want = np.asarray(omega_tilde) - np.asarray(GOLDEN_TUPLE)
    assert placed.action == pytest.approx(want, abs=1e-21)
    assert placed.residual <= 1e-14
    assert placed.iterations <= 2


def test_place_torus_cubic_newton(cubic_spec):
    omega_tilde = (1.0 + 5e-6, GOLDEN_TUPLE[1])
    placed = place_torus(cubic_spec, omega_tilde)
    grad = cubic_spec.h_gradient(np.asarray(placed.action))
    assert np.max(np.abs(grad - np.asarray(omega_tilde))) <= 1e-12
    assert placed.iterations >= 2


def test_place_torus_rejects_unreachable_frequency(cubic_spec):
    # the first gradient component is bounded below; target 0 is unreachable
    with pytest.raises(PlacementError):
        place_torus(cubic_spec, (0.0, GOLDEN_TUPLE[1]), max_iter=30)
