"""Acceptance suite: the binding end-to-end checks of the public contract.

One test per numbered contract item (the conftest hook prints a PASS/FAIL
line for each).  Every quantitative claim is checked against an independent
oracle or a frozen reference value, with the stated runtime budget asserted
alongside.  Two sub-items whose literal phrasing is mathematically
unattainable are kept as strict expected failures with the honest surrogate
asserted in the main test; the reasons are spelled out on the markers.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from kamtori.cli import _base_action, _run_pipeline, main
from kamtori.config import config_from_echo
from kamtori.diophantine import (FrequencyVector, RationalVector,
                                 preset_frequency, psi_argmin, rational_basis)
from kamtori.errors import InversionError, ResonanceError
from kamtori.iterate import build_schedule, iterate
from kamtori.parampoly import ParamPoly, ParamVector, invert_frequency_map
from kamtori.series import DomainParams, FourierTaylor
from kamtori.verify import VerifySettings, verify_torus

from conftest import DESK_CONFIG
from oracles import brute_force_psi, exact_tail_integral

ETA = 1.0 / 66.0


# --- helpers -----------------------------------------------------------------

def term_dict(f: FourierTaylor) -> dict:
    return {tuple(int(x) for x in k): complex(v)
            for k, v in zip(f.keys, f.vals)}


def max_coeff_diff(a: FourierTaylor, b: FourierTaylor) -> float:
    da, db = term_dict(a), term_dict(b)
    keys = set(da) | set(db)
    if not keys:
        return 0.0
    return max(abs(da.get(k, 0.0) - db.get(k, 0.0)) for k in keys)


def random_trig(rng, n, kmax=6, extra_modes=()):
    """Random trigonometric polynomial with |k|_inf <= kmax."""
    m = int(rng.integers(1, 9))
    terms = {}
    for _ in range(m):
        k = tuple(int(x) for x in rng.integers(-kmax, kmax + 1, size=n))
        key = k + (0,) * (2 * n)
        c = complex(rng.normal(), rng.normal())
        terms[key] = terms.get(key, 0.0) + c
    for k in extra_modes:
        terms[tuple(k) + (0,) * (2 * n)] = 1.0
    return FourierTaylor.from_terms(n, terms)


def cascade(f: FourierTaylor, directions) -> FourierTaylor:
    for v in directions:
        f = f.average_along(v)
    return f


def normal_along(v: RationalVector) -> FourierTaylor:
    """The linear Hamiltonian v . I whose flow advances angles along v."""
    n = v.n
    terms = {}
    for a in range(n):
        alpha = tuple(1 if b == a else 0 for b in range(n))
        terms[(0,) * n + alpha + (0,) * n] = v.numerators[a] / v.q
    return FourierTaylor.from_terms(n, terms)


# --- 1: small-divisor floor vs brute force -----------------------------------

def test_criterion_01_small_divisor_floor_matches_brute_force(golden):
    t0 = time.perf_counter()
    witnesses = {1: (0, 1), 2: (1, -1), 3: (1, -2), 5: (2, -3),
                 8: (3, -5), 13: (5, -8)}
    for Q in (1, 2, 3, 5, 8, 13):
        value, k = psi_argmin(golden, Q)
        want_value, want_k = brute_force_psi(golden.values, Q)
        assert tuple(k) == tuple(want_k), Q
        assert tuple(k) == witnesses[Q]
        assert abs(value - want_value) <= 1e-14, (Q, value, want_value)
    assert time.perf_counter() - t0 < 1.0


# --- 2: unimodular rational bases ---------------------------------------------

def test_criterion_02_unimodular_rational_bases(golden, sqrt2):
    t0 = time.perf_counter()
    for omega in (golden, sqrt2):
        for Q in (5, 10, 20, 40):
            basis = rational_basis(omega, Q)
            det = basis.determinant
            assert isinstance(det, (int, np.integer))
            assert int(det) in (-1, 1), (omega.values, Q, det)
            for v, score in zip(basis.vectors, basis.scores):
                # quality of simultaneous approximation, recomputed
                measured = v.q * Q * v.sup_error(omega)
                assert measured == pytest.approx(score, rel=1e-12)
                assert measured <= 10.0, (omega.values, Q, v)
    with pytest.raises(ResonanceError):
        rational_basis(FrequencyVector((1.0, 0.5)), 10)
    assert time.perf_counter() - t0 < 5.0


# --- 3: directional-average cascade -------------------------------------------

def _cascade_test_set():
    """200 random trig polynomials paired with unimodular bases."""
    rng = np.random.default_rng(314159)
    golden = preset_frequency("golden")
    cubic = preset_frequency("cubic-root")
    bases2 = [rational_basis(golden, Q) for Q in (5, 21)]
    bases3 = [rational_basis(cubic, Q) for Q in (4, 9)]
    cases = []
    for i in range(100):
        cases.append((random_trig(rng, 2), bases2[i % 2]))
    for i in range(100):
        cases.append((random_trig(rng, 3), bases3[i % 2]))
    return cases


def test_criterion_03a_directional_average_cascade_equals_torus_average():
    t0 = time.perf_counter()
    cases = _cascade_test_set()
    assert len(cases) == 200
    for f, basis in cases:
        got = cascade(f, basis.vectors)
        want = f.average_full()
        assert max_coeff_diff(got, want) <= 1e-12
    # control: a singular direction set (determinant 0) leaves non-constant
    # modes behind, so the comparison genuinely can fail
    rng = np.random.default_rng(8)
    v = RationalVector(numerators=(2, 0), q=2)
    f = random_trig(rng, 2, extra_modes=[(0, 3)])
    diff = max_coeff_diff(cascade(f, [v, v]), f.average_full())
    assert diff > 1e-6
    assert time.perf_counter() - t0 < 10.0


@pytest.mark.xfail(
    strict=True,
    reason="a directional average along p/q annihilates every mode k with "
           "k.p != 0, so an n-fold cascade along the rows of ANY nonsingular "
           "integer matrix (determinant 2 included) keeps only k = 0 and "
           "equals the full torus average; only a singular family can "
           "produce a counterexample")
def test_criterion_03b_determinant_two_cascade_failure_documented():
    rng = np.random.default_rng(314159)
    dirs = [RationalVector(numerators=(2, 0), q=2),
            RationalVector(numerators=(1, 1), q=1)]  # integer rows, det 2
    worst = 0.0
    for _ in range(200):
        f = random_trig(rng, 2)
        worst = max(worst, max_coeff_diff(cascade(f, dirs),
                                          f.average_full()))
    assert worst > 1e-12  # claimed failure never materializes


# --- 4: homological solver -----------------------------------------------------

def test_criterion_04_bounded_divisor_homological_solver(golden, sqrt2):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2718)
    directions = []
    for omega, Qs in ((golden, (5, 21)), (sqrt2, (20,))):
        for Q in Qs:
            directions.extend(rational_basis(omega, Q).vectors)
    dom = DomainParams(0.25, 0.1, 0.1)
    checked = 0
    while checked < 200:
        v = directions[checked % len(directions)]
        f = random_trig(rng, 2)
        rhs = f - f.average_along(v)
        if rhs.is_zero:
            continue
        F = rhs.solve_homological(v)
        resid = (F.poisson(normal_along(v)) - rhs).majorant_norm(dom)
        rhs_norm = rhs.majorant_norm(dom)
        assert resid <= 1e-10 * rhs_norm
        assert F.majorant_norm(dom) <= v.q * rhs_norm
        checked += 1
    assert checked == 200
    assert time.perf_counter() - t0 < 10.0


# --- 5: the full desk run -------------------------------------------------------

def test_criterion_05_desk_run_contracts_and_verifies(desk_config,
                                                      desk_reduction,
                                                      desk_result):
    omega, spec, _, red = desk_reduction
    result, run_elapsed = desk_result
    eps_param = red.report["epsParam"]
    eta = desk_config.scheme.eta

    assert len(result.iterations) >= 5
    for j, rec in enumerate(result.iterations):
        # measured remainder after step j stays under the geometric envelope
        assert rec.eps_after <= (eta / 8.0) ** (j + 1) * eps_param, j

    base = _base_action(red, omega, result.omega_tilde)
    t0 = time.perf_counter()
    ver = verify_torus(spec, result.embedding, base,
                       VerifySettings(grid=32, t_max=100.0, dt=1e-3,
                                      n_orbits=2, sample_stride=100))
    verify_elapsed = time.perf_counter() - t0
    assert ver.grid == 32
    assert ver.invariance_residual <= 1e-8
    assert ver.t_max == 100.0
    assert ver.shadow_error <= 1e-6
    assert run_elapsed + verify_elapsed <= 300.0


# --- 6: per-step contract checks ------------------------------------------------

def test_criterion_06_step_reports_meet_envelope_and_tail_contract(
        desk_config, desk_result):
    result, _ = desk_result
    eta = desk_config.scheme.eta
    assert len(result.iterations) >= 5
    for rec in result.iterations:
        rep = rec.report
        eps_in = rep["epsIn"]
        assert rep["envelopeOk"] is True
        assert rep["envelopeTarget"] == pytest.approx(eta * eps_in / 8.0,
                                                      rel=1e-12)
        assert rep["epsOutCertified"] <= eta * eps_in / 8.0
        tail = {c["name"]: c for c in rep["conditions"]}["tail-smallness"]
        assert tail["satisfied"] is True
        assert tail["rhs"] == pytest.approx(eta * eps_in / 16.0, rel=1e-12)
        assert 0.0 < tail["lhs"] <= tail["rhs"]


# --- 7: frequency-map inversion -------------------------------------------------

def test_criterion_07_frequency_map_inversion_certificates():
    t0 = time.perf_counter()
    omega0 = (1.0, 0.6180339887498949)
    h = 1e-2
    rng = np.random.default_rng(7)

    def random_nu(delta):
        comps = [ParamPoly(rng.normal(size=(3, 3))) for _ in range(2)]
        nu = ParamVector(tuple(comps))
        return nu.scale(delta / nu.majorant_norm(h))

    for _ in range(100):
        delta = h / 4.0 * rng.uniform(0.05, 1.0)
        nu = random_nu(delta)
        inv = invert_frequency_map(nu, omega0, h, deg=5)
        assert inv.certificates["delta"] == pytest.approx(delta, rel=1e-12)
        assert inv.phi.offset_norm(h / 4.0) <= delta * (1 + 1e-12)
        for _ in range(20):
            omega = np.asarray(omega0) + rng.uniform(-h / 4, h / 4, size=2)
            w = inv.phi.evaluate(omega)
            f_of_w = w + nu.evaluate(w - np.asarray(omega0))
            assert np.max(np.abs(f_of_w - omega)) <= 1e-12
    with pytest.raises(InversionError):
        invert_frequency_map(random_nu(0.3 * h), omega0, h)
    assert time.perf_counter() - t0 < 5.0


# --- 8: scaling of the frequency correction -------------------------------------

@pytest.fixture(scope="module")
def scaling_runs(desk_config, desk_reduction, desk_result):
    """(eps, shift, ratio) for eps in {1e-6, 1e-7, 1e-8}; 1e-6 reuses the
    session desk run, the smaller two run fresh from the same template."""
    omega, _, _, red = desk_reduction
    result, run_elapsed = desk_result
    rows = []
    t0 = time.perf_counter()
    shift = max(abs(wt - w0) for wt, w0
                in zip(result.omega_tilde, result.omega0))
    rows.append((1e-6, shift,
                 shift * red.report["r"] / red.report["epsParam"], True))
    for eps in (1e-7, 1e-8):
        echo = desk_config.canonical()
        echo["model"]["epsilon"] = eps
        cfg = config_from_echo(echo)
        omega_i, _, profile_i, red_i = _run_pipeline(cfg)
        res = iterate(red_i.hamiltonian, profile_i,
                      cfg.scheme.iteration_settings())
        shift = max(abs(wt - w0) for wt, w0
                    in zip(res.omega_tilde, res.omega0))
        rows.append((eps, shift,
                     shift * red_i.report["r"] / red_i.report["epsParam"],
                     res.converged))
    elapsed = run_elapsed + (time.perf_counter() - t0)
    return rows, elapsed


def test_criterion_08a_counterterm_scaling_stays_bounded(scaling_runs):
    rows, elapsed = scaling_runs
    assert [r[0] for r in rows] == [1e-6, 1e-7, 1e-8]
    assert all(r[3] for r in rows)  # every run converged
    ratio0 = rows[0][2]
    assert ratio0 > 0.0
    for eps, shift, ratio, _ in rows:
        # no blowup: the scaled correction never exceeds its eps = 1e-6
        # reference by more than the stated factor
        assert ratio <= 3.0 * ratio0, (eps, ratio, ratio0)
    assert elapsed <= 900.0


@pytest.mark.xfail(
    strict=True,
    reason="the measured frequency correction scales like eps^2 while the "
           "action radius scales like sqrt(eps), so the scaled ratio decays "
           "like eps^1.5 across adjacent decades (and underflows the "
           "representable shift entirely below eps ~ 1e-7); a two-sided "
           "constant-factor band cannot hold")
def test_criterion_08b_two_sided_scaling_band_documented(scaling_runs):
    rows, _ = scaling_runs
    ratios = [r[2] for r in rows]
    assert min(ratios) > 0.0
    assert max(ratios) <= 3.0 * min(ratios)


# --- 9: schedule soundness -------------------------------------------------------

def test_criterion_09_schedule_soundness_and_first_order_choice(
        golden_profile, desk_config):
    t0 = time.perf_counter()
    s, C = 0.4, 16.0
    entries, prof = build_schedule(golden_profile, s,
                                   desk_config.scheme.iteration_settings())
    assert sum(e.sigma for e in entries) <= s / 2.0

    # threshold inversion against a plain scan of the sampled divisor table
    ds = np.asarray(prof.delta_samples)
    for e in entries:
        hits = np.nonzero(ds[1:] <= e.delta)[0]
        assert hits.size > 0
        oracle_Q = int(hits[-1]) + 1
        assert prof.delta_star(e.delta) == oracle_Q
        assert e.Q == oracle_Q

    # the first averaging order satisfies its defining inequality minimally
    q0 = prof.choose_q0(s, C)
    assert q0 == entries[0].Q == 314
    thresh = s / (2.0 * C)
    assert prof.tail_term(q0) <= thresh
    assert prof.tail_term(q0 - 1) > thresh
    # and the tail estimate agrees with the exact piecewise integral
    exact = 1.0 / q0 + exact_tail_integral(prof.delta_samples, q0,
                                           prof.qmax) / math.log(2.0)
    assert prof.tail_term(q0) == pytest.approx(exact, rel=2e-3)
    assert time.perf_counter() - t0 < 1.0


# --- 10: determinism --------------------------------------------------------------

def test_criterion_10_desk_run_is_byte_deterministic(tmp_path):
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        rc = main(["run", "--config", str(DESK_CONFIG), "--out", str(out)])
        assert rc == 0
        outs.append(out)
    for artifact in ("iterations.csv", "result.json"):
        a = (outs[0] / artifact).read_bytes()
        b = (outs[1] / artifact).read_bytes()
        assert a == b, artifact
