"""Arithmetic layer: worst reciprocal divisors, their inverse scale, the
tail functional, order scheduling, and unimodular rational bases."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kamtori.diophantine import (EnumerationBudget, FrequencyVector,
                                 build_profile, preset_frequency, psi,
                                 psi_argmin, rational_basis)
from kamtori.errors import BudgetError, DomainError, ResonanceError

from oracles import brute_force_psi, exact_tail_integral

GOLDEN = preset_frequency("golden")
SQRT2 = preset_frequency("sqrt2")
# a badly approximable cubic point for the n=3 generic enumerator
# (reciprocal powers of the real root of x^3 = x + 1)
CUBIC3 = FrequencyVector((1.0, 0.7548776662466927, 0.5698402909980532))


# --- psi -------------------------------------------------------------------

@pytest.mark.parametrize("freq", [GOLDEN, SQRT2, CUBIC3],
                         ids=["golden", "sqrt2", "cubic3"])
@pytest.mark.parametrize("Q", [1, 2, 3, 5, 8, 13])
def test_psi_matches_brute_force(freq, Q):
    got_val, got_k = psi_argmin(freq, Q)
    want_val, want_k = brute_force_psi(tuple(freq), Q)
    assert got_k == want_k
    assert got_val == pytest.approx(want_val, rel=1e-14)


def test_psi_golden_frozen_values():
    # worst divisor up to order 1 is omega_2 itself; up to 2 it is 1 - omega_2
    assert psi(GOLDEN, 1) == pytest.approx(1.6180339887498947, abs=1e-15)
    assert psi(GOLDEN, 2) == pytest.approx(2.6180339887498953, abs=1e-15)
    assert psi(GOLDEN, 3) == pytest.approx(4.236067977499788, abs=1e-14)


def test_psi_rejects_bad_order():
    with pytest.raises(DomainError):
        psi(GOLDEN, 0)


def test_psi_budget_guard():
    tight = EnumerationBudget(kmax=10)
    with pytest.raises(BudgetError):
        psi(CUBIC3, 50, tight)


def test_resonant_vector_is_rejected():
    with pytest.raises(ResonanceError) as err:
        build_profile(FrequencyVector((1.0, 0.5)), 64)
    assert "(1, -2)" in str(err.value)


# --- profile table ---------------------------------------------------------

def test_table_matches_pointwise_enumeration(golden_profile):
    wide = EnumerationBudget(kmax=400)
    for Q in (1, 2, 7, 33, 100, 314):
        assert golden_profile.psi_at(Q) == pytest.approx(
            psi(GOLDEN, Q, wide), rel=1e-13)


def test_table_n3_matches_enumeration():
    prof = build_profile(CUBIC3, 40)
    for Q in (1, 5, 17, 40):
        assert prof.psi_at(Q) == pytest.approx(psi(CUBIC3, Q), rel=1e-13)


def test_psi_nondecreasing_delta_increasing(golden_profile):
    p = np.asarray(golden_profile.psi_samples[1:])
    d = np.asarray(golden_profile.delta_samples[1:])
    assert np.all(np.diff(p) >= 0)
    assert np.all(np.diff(d) > 0)


def test_frozen_desk_scale(golden_profile):
    assert golden_profile.psi_at(314) == pytest.approx(321.9968943807959,
                                                       rel=1e-13)
    assert golden_profile.delta_at(314) == pytest.approx(101107.0248355699,
                                                         rel=1e-13)


# --- generalized inverse ---------------------------------------------------

def test_delta_star_left_inverse(golden_profile):
    for Q in (1, 2, 3, 10, 314, 1596, 20000):
        assert golden_profile.delta_star(golden_profile.delta_at(Q)) == Q


_SMALL_PROFILE = build_profile(GOLDEN, 2000)


@given(st.data())
def test_delta_star_is_generalized_inverse(data):
    prof = _SMALL_PROFILE
    x = data.draw(st.floats(min_value=float(prof.delta_at(1)),
                            max_value=float(prof.delta_at(prof.qmax))))
    Q = prof.delta_star(x)
    assert prof.delta_at(Q) <= x
    if Q < prof.qmax:
        assert prof.delta_at(Q + 1) > x


# --- tail functional and order choice --------------------------------------

def test_tail_integral_matches_exact_piecewise(golden_profile):
    for q0 in (10, 100, 314, 1000):
        lib = golden_profile.br_tail(q0)
        exact = exact_tail_integral(golden_profile.delta_samples, q0,
                                    golden_profile.qmax)
        assert lib == pytest.approx(exact, rel=2e-3)


def test_tail_term_decreasing(golden_profile):
    ts = [golden_profile.tail_term(q) for q in (5, 20, 80, 320, 1280, 5120)]
    assert all(a > b for a, b in zip(ts, ts[1:]))


def test_choose_q0_minimal(golden_profile):
    s, C = 0.4, 16.0
    q0 = golden_profile.choose_q0(s, C)
    assert q0 == 314
    thresh = s / (2.0 * C)
    assert golden_profile.tail_term(q0) <= thresh
    assert golden_profile.tail_term(q0 - 1) > thresh


# --- rational bases ---------------------------------------------------------

@pytest.mark.parametrize("freq", [GOLDEN, SQRT2], ids=["golden", "sqrt2"])
@pytest.mark.parametrize("Q", [5, 10, 20, 40])
def test_rational_basis_unimodular(freq, Q):
    prof = build_profile(freq, 256)
    basis = rational_basis(freq, Q, prof)
    assert basis.determinant in (-1, 1)
    for v in basis.vectors:
        err = v.sup_error(freq)
        assert v.q * Q * err <= 10.0
        assert 1 <= v.q <= prof.psi_at(Q) + 1


def test_rational_basis_numerators_are_integers(golden_profile):
    basis = rational_basis(GOLDEN, 100, golden_profile)
    for v in basis.vectors:
        assert all(isinstance(x, int) for x in v.numerators)
    # best golden approximants at this order are Fibonacci-quotient vectors
    assert {v.q for v in basis.vectors} == {55, 89}
