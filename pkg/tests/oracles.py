"""Independent oracles for the test suite.

Each helper recomputes a quantity by a method different from the library
implementation (plain nested loops, exact piecewise integrals, dense
quadrature, finite differences), so agreement between the two is meaningful
evidence rather than a tautology.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def canonical_sign(k):
    """Identify k with -k: first nonzero entry made positive."""
    for x in k:
        if x:
            return tuple(k) if x > 0 else tuple(-y for y in k)
    return tuple(k)


def brute_force_psi(omega_values, Q):
    """(psi(Q), minimizing k) by full enumeration of 0 < |k|_1 <= Q.

    psi(Q) = sup 1/|k.omega|; ties broken by smaller |k|_1 and then
    lexicographic order on sign-canonical vectors.  Written with plain
    Python loops so it shares no code with the library enumeration.
    """
    n = len(omega_values)
    best = None
    for k in itertools.product(range(-Q, Q + 1), repeat=n):
        l1 = sum(abs(x) for x in k)
        if l1 == 0 or l1 > Q:
            continue
        kk = canonical_sign(k)
        if kk != tuple(k):
            continue  # visit each +/- pair once
        d = abs(math.fsum(x * w for x, w in zip(kk, omega_values)))
        key = (d, l1, kk)
        if best is None or key < best:
            best = key
    d, _, kk = best
    return (math.inf if d == 0.0 else 1.0 / d), kk


def exact_tail_integral(delta_samples, q0, qmax):
    """Exact integral of 1/(x * Q(x)) over [Delta(q0), Delta(qmax)].

    Q(x) = number of orders Q with Delta(Q) <= x is piecewise constant, so
    the integral is a finite sum of logarithms.  This is the quantity the
    library approximates with a trapezoid rule on a log-spaced grid.
    """
    total = 0.0
    for Q in range(q0, qmax):
        a = float(delta_samples[Q])
        b = float(delta_samples[Q + 1])
        if b > a:
            total += math.log(b / a) / Q
    return total


def torus_average_on_grid(evaluate, n, m=16):
    """Full torus average via an m^n uniform grid.

    The grid rule integrates e^{2 pi i k.theta} exactly to zero unless every
    component of k is a multiple of m, so it is exact for trig polynomials
    with |k|_inf < m.
    """
    axes = [np.arange(m) / m] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    theta = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    return complex(np.mean(evaluate(theta=theta)))


def time_average_along(evaluate, theta0, numerators, q, max_cycles):
    """Directional average (1/q) * int_0^q f(theta0 + t p / q) dt.

    Composite Gauss-Legendre quadrature with enough panels to resolve every
    oscillation (the integrand frequencies are k.p/q cycles per unit time,
    at most max_cycles/q).  Exact to machine precision for trig polynomials.
    This is the defining time average, independent of the library's
    mode-projection shortcut.
    """
    p = np.asarray(numerators, dtype=float)
    panels = max(8, 4 * int(math.ceil(max_cycles)))
    nodes, weights = np.polynomial.legendre.leggauss(12)
    edges = np.linspace(0.0, float(q), panels + 1)
    total = 0.0 + 0.0j
    for a, b in zip(edges[:-1], edges[1:]):
        t = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        pts = theta0[None, :] + t[:, None] * (p / q)[None, :]
        total += 0.5 * (b - a) * np.sum(weights * evaluate(theta=pts))
    return total / q


def poisson_bracket_fd(f_eval, g_eval, theta, I, step=1e-5):
    """{f, g} at one real point by central finite differences.

    Uses only pointwise evaluations: d/dtheta_a and d/dI_a of both factors,
    assembled as sum_a (f_ta g_Ia - f_Ia g_ta).  Accuracy ~1e-6 relative for
    low-degree trig polynomials; used as an independent spot check.
    """
    theta = np.asarray(theta, dtype=float)
    I = np.asarray(I, dtype=float)
    n = len(theta)

    def d(ev, block, a):
        e = np.zeros(n)
        e[a] = step
        if block == "theta":
            hi = ev(theta=theta + e, I=I)
            lo = ev(theta=theta - e, I=I)
        else:
            hi = ev(theta=theta, I=I + e)
            lo = ev(theta=theta, I=I - e)
        return (complex(hi) - complex(lo)) / (2 * step)

    acc = 0.0 + 0.0j
    for a in range(n):
        acc += d(f_eval, "theta", a) * d(g_eval, "I", a)
        acc -= d(f_eval, "I", a) * d(g_eval, "theta", a)
    return acc


def dict_product(terms_a, terms_b):
    """Product of two sparse series as plain dictionaries {key tuple: coeff}.

    Keys add componentwise (Fourier indices and monomial exponents alike);
    reference implementation for the vectorized series multiply.
    """
    out = {}
    for ka, va in terms_a.items():
        for kb, vb in terms_b.items():
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = out.get(key, 0.0 + 0.0j) + va * vb
    return {k: v for k, v in out.items() if v != 0.0}
