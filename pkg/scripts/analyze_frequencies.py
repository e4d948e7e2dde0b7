#!/usr/bin/env python3
"""Tabulate the arithmetic of the preset frequency vectors.

For each preset this prints the small-divisor growth Psi(Q) at a few orders,
the divisor floor Delta(Q), the truncated Bruno-style tail, and the first
admissible averaging order for a reference strip width — the numbers that
drive schedule construction.  Full CSV tables go through `kam analyze`.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from kamtori.diophantine import build_profile, preset_frequency  # noqa: E402
from kamtori.errors import KamError  # noqa: E402

PRESETS = ("golden", "sqrt2", "cubic-root")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--qmax", type=int, default=2000,
                    help="table depth (largest sampled order)")
    ap.add_argument("--strip", type=float, default=0.4,
                    help="reference angle-strip width for the order choice")
    ap.add_argument("--sigma-constant", type=float, default=16.0,
                    help="shrink constant C in sigma = C / Q")
    ap.add_argument("--presets", nargs="+", default=list(PRESETS))
    args = ap.parse_args(argv)

    for name in args.presets:
        omega = preset_frequency(name)
        # n >= 3 tables come from full lattice enumeration (cost ~ qmax^n),
        # so cap their depth; the two-dimensional presets use the fast
        # continued-fraction path and take the requested depth as-is
        qmax = args.qmax if omega.n == 2 else min(args.qmax, 100)
        profile = build_profile(omega, qmax)
        print(f"{name}: omega = {tuple(omega.values)}  "
              f"(table depth {qmax})")
        print(f"  {'Q':>6} {'Psi(Q)':>14} {'Delta(Q)':>12} {'tail(Q)':>12}")
        for Q in (1, 2, 5, 13, 34, 89, 233, 610, 1597):
            if Q > qmax:
                break
            print(f"  {Q:>6} {profile.psi_at(Q):>14.6f} "
                  f"{profile.delta_at(Q):>12.3e} "
                  f"{profile.tail_term(Q):>12.6f}")
        try:
            q0 = profile.choose_q0(args.strip, args.sigma_constant)
            print(f"  first admissible order for strip {args.strip}, "
                  f"C = {args.sigma_constant}: Q0 = {q0}")
        except KamError as exc:
            print(f"  no admissible order within the table: {exc}")
        print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
