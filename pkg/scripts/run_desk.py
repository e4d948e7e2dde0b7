#!/usr/bin/env python3
"""Run the bundled desk configuration end to end and verify the torus.

Equivalent to `kam run --config configs/desk.toml --verify`, with a short
console summary of the produced artifacts.  Intended as the one-command
reproduction of the reference desk computation.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from kamtori.cli import main as kam_main  # noqa: E402


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(REPO / "configs" / "desk.toml"),
                    help="run configuration (default: the bundled desk file)")
    ap.add_argument("--out", default="desk_out", help="output directory")
    ap.add_argument("--no-verify", action="store_true",
                    help="skip the dynamical verification stage")
    args = ap.parse_args(argv)

    cmd = ["run", "--config", args.config, "--out", args.out]
    if not args.no_verify:
        cmd.append("--verify")
    t0 = time.perf_counter()
    rc = kam_main(cmd)
    elapsed = time.perf_counter() - t0

    out = Path(args.out)
    result_path = out / "result.json"
    if result_path.exists():
        result = json.loads(result_path.read_text(encoding="utf-8"))
        print(f"converged      : {result['converged']} "
              f"({result['stopReason']})")
        print(f"iterations     : {len(result['iterations'])}")
        print(f"final remainder: {result['epsFinal']:.6e}")
        print(f"omegaTilde     : {result['omegaTilde']}")
    ver_path = out / "verification.json"
    if ver_path.exists():
        ver = json.loads(ver_path.read_text(encoding="utf-8"))
        rep = ver["report"]
        print(f"invariance     : {rep['invarianceResidual']:.6e}")
        print(f"shadowing      : {rep['shadowError']:.6e}")
        print(f"checks passed  : {ver['passed']}")
    print(f"artifacts in {out}/ ({elapsed:.1f}s), exit code {rc}")
    return rc


if __name__ == "__main__":
    sys.exit(main())
