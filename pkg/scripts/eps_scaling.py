#!/usr/bin/env python3
"""Sweep the perturbation size and tabulate how the computed frequency
correction scales.

For each epsilon the desk model is rebuilt (same frequency, potential, and
schedule constants), the iteration is run to completion, and the table
reports the measured frequency shift |omegaTilde - omega0|, the action
radius r, the reduced perturbation norm, and the dimensionless ratio
shift * r / epsParam used as a boundedness surrogate.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from kamtori.cli import _run_pipeline  # noqa: E402
from kamtori.config import config_from_echo, load_config  # noqa: E402
from kamtori.iterate import iterate  # noqa: E402


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(REPO / "configs" / "desk.toml"),
                    help="template run configuration")
    ap.add_argument("--eps", type=float, nargs="+",
                    default=[1e-6, 1e-7, 1e-8],
                    help="perturbation sizes to sweep")
    ap.add_argument("--csv", default=None,
                    help="optional CSV output path")
    args = ap.parse_args(argv)

    template = load_config(args.config)
    rows = []
    header = ("epsilon", "shift", "r", "epsParam", "ratio",
              "iterations", "epsFinal", "seconds")
    print(("{:>10} " * len(header)).format(*header))
    for eps in args.eps:
        echo = template.canonical()
        echo["model"]["epsilon"] = eps
        cfg = config_from_echo(echo)
        t0 = time.perf_counter()
        _, _, profile, red = _run_pipeline(cfg)
        result = iterate(red.hamiltonian, profile,
                         cfg.scheme.iteration_settings())
        dt = time.perf_counter() - t0
        shift = max(abs(wt - w0) for wt, w0
                    in zip(result.omega_tilde, result.omega0))
        r = red.report["r"]
        eps_param = red.report["epsParam"]
        ratio = shift * r / eps_param
        row = (eps, shift, r, eps_param, ratio,
               len(result.iterations), result.eps_final, dt)
        rows.append(row)
        print("{:10.1e} {:10.3e} {:10.3e} {:10.3e} {:10.3e} "
              "{:10d} {:10.3e} {:10.2f}".format(*row))

    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
