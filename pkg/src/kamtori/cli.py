"""Command-line orchestration: subcommands, artifacts, exit codes.

Subcommands:

* ``analyze``  — frequency arithmetic table (CSV) and summary (JSON);
* ``approx``   — unimodular rational approximation basis at one order;
* ``run``      — full torus computation from a TOML config, writing
  ``config_echo.json``, ``versions.txt``, ``iterations.csv``,
  ``result.json`` and ``embedding.json`` (plus verification artifacts
  with ``--verify``);
* ``verify``   — dynamical verification of a stored result, writing
  ``verification.json`` and ``trajectory.csv``;
* ``step``     — one transformation step with a full JSON report.

Exit codes: 0 success, 1 usage error, 2 a quantitative condition failed,
3 numerical failure. The environment variable ``KAM_THREADS`` caps the
numerical thread pools when set before startup.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (RunConfig, config_from_echo, load_config)
from .diophantine import (build_profile, preset_frequency, rational_basis)
from .errors import KamError, UsageError
from .iterate import build_schedule, iterate
from .reduction import reduce_to_param_form
from .step import kam_step
from .transforms import TorusEmbedding
from .verify import verify_torus


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems via exit code 1."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _write_json(path: Path, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"
    path.write_text(text, encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _format_float(x) -> str:
    return repr(float(x))


def _frequency_from_args(args) -> tuple:
    """(FrequencyVector, qmax) from --config or --freq."""
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        return cfg.build_frequency(), cfg.frequency.qmax
    omega = preset_frequency(args.freq)
    return omega, args.qmax


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- analyze ---------------------------------------------------------------
def cmd_analyze(args) -> int:
    omega, qmax = _frequency_from_args(args)
    if getattr(args, "config", None) is None:
        qmax = args.qmax
    profile = build_profile(omega, qmax)
    out = _outdir(args)

    orders = list(range(1, qmax + 1))
    if len(orders) > args.rows:
        keep = sorted({int(round(x)) for x in np.geomspace(1, qmax,
                                                           args.rows)})
        orders = keep

    rows = []
    for Q in orders:
        psi = profile.psi_at(Q)
        delta = profile.delta_at(Q)
        try:
            tail = _format_float(profile.tail_term(Q))
        except (KamError, ValueError):
            tail = ""
        rows.append([Q, _format_float(psi), _format_float(delta), tail])
    _write_csv(out / "analysis.csv", ["Q", "Psi", "Delta", "tail"], rows)

    summary = {
        "schemaVersion": 1,
        "frequency": [float(w) for w in omega.values],
        "qmax": int(qmax),
        "rowsWritten": len(rows),
        "psiFirst": {str(Q): float(profile.psi_at(Q))
                     for Q in orders[:8]},
    }
    if args.strip is not None:
        try:
            q0 = profile.choose_q0(args.strip, args.sigma_constant)
            summary["strip"] = float(args.strip)
            summary["q0"] = int(q0)
            summary["deltaQ0"] = float(profile.delta_at(q0))
            summary["tailQ0"] = float(profile.tail_term(q0))
        except KamError as exc:
            summary["strip"] = float(args.strip)
            summary["q0Error"] = str(exc)
    _write_json(out / "analysis.json", summary)
    print(f"analyze: wrote {len(rows)} orders for frequency "
          f"({', '.join(f'{w:.6f}' for w in omega.values)}) to {out}")
    if "q0" in summary:
        print(f"analyze: first averaging order for strip "
              f"{args.strip}: Q0 = {summary['q0']}")
    return 0


# --- approx ----------------------------------------------------------------
def cmd_approx(args) -> int:
    omega, qmax = _frequency_from_args(args)
    if getattr(args, "config", None) is None:
        qmax = args.qmax
    if qmax < 2 * args.Q:
        qmax = 2 * args.Q
    profile = build_profile(omega, qmax)
    basis = rational_basis(omega, args.Q, profile=profile,
                           c_den=args.c_den)
    out = _outdir(args)
    payload = {
        "schemaVersion": 1,
        "frequency": [float(w) for w in omega.values],
        "Q": int(args.Q),
        "determinant": int(basis.determinant),
        "maxScore": float(basis.max_score()),
        "vectors": [
            {
                "numerators": [int(x) for x in v.numerators],
                "q": int(v.q),
                "error": float(e),
                "score": float(sc),
            }
            for v, e, sc in zip(basis.vectors, basis.errors, basis.scores)
        ],
    }
    _write_json(out / "approx.json", payload)
    print(f"approx: order Q={args.Q}, determinant {basis.determinant}, "
          f"max score {basis.max_score():.6g}")
    for v in basis.vectors:
        print(f"  q={v.q}: {tuple(int(x) for x in v.numerators)}")
    return 0


# --- run -------------------------------------------------------------------
def _versions_text() -> str:
    import scipy
    lines = [
        f"kamtori {__version__}",
        f"python {platform.python_version()}",
        f"numpy {np.__version__}",
        f"scipy {scipy.__version__}",
        f"platform {platform.platform()}",
    ]
    return "\n".join(lines) + "\n"


def _iteration_rows(result) -> list:
    rows = []
    for rec in result.iterations:
        rows.append([
            rec.index,
            _format_float(rec.eps_after),
            _format_float(rec.report["epsOut"]),
            _format_float(rec.sigma),
            rec.Q,
            _format_float(rec.telescope),
        ])
    return rows


def _base_action(red, omega0, omega_tilde) -> list:
    x = np.asarray(omega_tilde, dtype=float) - np.asarray(omega0.values)
    return [float(c.evaluate(x)) for c in red.p_star.components]


def _run_pipeline(cfg: RunConfig):
    """Shared run/step plumbing: profile, reduction, settings."""
    omega = cfg.build_frequency()
    spec = cfg.build_spec()
    profile = build_profile(omega, cfg.frequency.qmax)
    red = reduce_to_param_form(
        spec, cfg.domain.strip, cfg.caps, profile,
        param_radius=cfg.domain.param_radius,
        action_radius=cfg.domain.action_radius,
        c_hauto=cfg.scheme.c_hauto,
        c_sigma=cfg.scheme.sigma_constant,
        condition_mode=cfg.scheme.condition_mode,
    )
    return omega, spec, profile, red


def _write_verification(out: Path, cfg: RunConfig, spec, embedding,
                        base_action, t_max=None) -> tuple:
    settings = cfg.verification.settings(t_max=t_max)
    ver = verify_torus(spec, embedding, base_action, settings)
    checks = ver.checks(**cfg.verification.tolerances())
    passed = all(c.satisfied for c in checks)
    _write_json(out / "verification.json", {
        "schemaVersion": 1,
        "report": ver.as_dict(),
        "checks": [c.as_dict() for c in checks],
        "tolerances": cfg.verification.canonical(),
        "passed": passed,
    })
    n = spec.n
    header = (["t"] + [f"p{a + 1}" for a in range(n)]
              + [f"q{a + 1}" for a in range(n)] + ["dist"])
    rows = []
    for i, t in enumerate(ver.times):
        rows.append([_format_float(t)]
                    + [_format_float(v) for v in ver.trajectory_p[i]]
                    + [_format_float(v) for v in ver.trajectory_q[i]]
                    + [_format_float(ver.trajectory_dist[i])])
    _write_csv(out / "trajectory.csv", header, rows)
    return ver, checks, passed


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    echo = cfg.canonical()
    _write_json(out / "config_echo.json", echo)
    (out / "versions.txt").write_text(_versions_text(), encoding="utf-8")

    omega, spec, profile, red = _run_pipeline(cfg)
    result = iterate(red.hamiltonian, profile,
                     cfg.scheme.iteration_settings())
    base = _base_action(red, omega, result.omega_tilde)

    _write_csv(out / "iterations.csv",
               ["i", "eps", "measuredP", "sigma", "Q", "telescope"],
               _iteration_rows(result))
    payload = result.as_dict()
    payload.pop("embedding", None)
    payload["schemaVersion"] = 1
    payload["config"] = echo
    payload["baseAction"] = base
    payload["reduction"] = red.as_dict()
    _write_json(out / "result.json", payload)
    _write_json(out / "embedding.json", {
        "schemaVersion": 1,
        "baseAction": base,
        **result.embedding.to_payload(),
    })

    print(f"run: {len(result.iterations)} iterations, final remainder "
          f"{result.eps_final:.6e}, converged={result.converged} "
          f"({result.stop_reason})")
    print(f"run: torus frequency parameter "
          f"({', '.join(f'{w:.12f}' for w in result.omega_tilde)})")
    print(f"run: artifacts in {out}")

    if args.verify:
        ver, checks, passed = _write_verification(
            out, cfg, spec, result.embedding, base)
        for c in checks:
            state = "pass" if c.satisfied else "FAIL"
            print(f"verify: {c.name}: {state} "
                  f"({c.lhs:.3e} vs {c.rhs:.3e})")
        if not passed:
            print("run: verification failed", file=sys.stderr)
            return 2
    return 0


# --- verify ----------------------------------------------------------------
def _load_json(path: str, what: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {p}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} file {p} is not valid JSON: {exc}")


def cmd_verify(args) -> int:
    result = _load_json(args.result, "result")
    embedding_doc = _load_json(args.embedding, "embedding")
    if "config" not in result:
        raise UsageError("result file has no embedded config echo")
    cfg = config_from_echo(result["config"])
    spec = cfg.build_spec()
    try:
        embedding = TorusEmbedding.from_payload(embedding_doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"embedding file is malformed: {exc!r}")
    base = result.get("baseAction", embedding_doc.get("baseAction"))
    if base is None:
        raise UsageError("neither result nor embedding file carries the "
                         "base action of the torus")
    out = _outdir(args)
    ver, checks, passed = _write_verification(
        out, cfg, spec, embedding, base, t_max=args.tmax)
    print(f"verify: invariance residual {ver.invariance_residual:.6e}, "
          f"shadow error {ver.shadow_error:.6e}, "
          f"energy drift {ver.energy_drift:.6e}")
    for c in checks:
        state = "pass" if c.satisfied else "FAIL"
        print(f"verify: {c.name}: {state} ({c.lhs:.3e} vs {c.rhs:.3e})")
    print(f"verify: artifacts in {out}")
    return 0 if passed else 2


# --- step ------------------------------------------------------------------
def cmd_step(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    omega, spec, profile, red = _run_pipeline(cfg)
    schedule, profile = build_schedule(profile, cfg.domain.strip,
                                       cfg.scheme.iteration_settings())
    entry = schedule[0]
    basis = rational_basis(omega, entry.Q, profile=profile)
    result = kam_step(red.hamiltonian, basis, entry.sigma,
                      cfg.scheme.step_settings())
    report = result.report
    if args.dump_report:
        target = Path(args.dump_report)
        target.parent.mkdir(parents=True, exist_ok=True)
    else:
        target = out / "step_report.json"
    _write_json(target, {"schemaVersion": 1, **report.as_dict()})
    print(f"step: Q={entry.Q}, |P| {report.eps_in:.6e} -> "
          f"{report.eps_out_certified:.6e} "
          f"(target {report.envelope_target:.6e}, "
          f"envelope {'met' if report.envelope_ok else 'MISSED'})")
    print(f"step: report written to {target}")
    return 0 if report.envelope_ok else 2


# --- entry point -------------------------------------------------------------
def build_parser() -> _Parser:
    parser = _Parser(prog="kam", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version",
                        version=f"kam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    pa = sub.add_parser("analyze", help="frequency arithmetic table")
    pa.add_argument("--freq", default="golden",
                    help="frequency preset (golden, sqrt2, cubic-root)")
    pa.add_argument("--config", default=None,
                    help="TOML config to take the frequency from")
    pa.add_argument("--qmax", type=int, default=200,
                    help="largest order to tabulate")
    pa.add_argument("--rows", type=int, default=1024,
                    help="cap on CSV rows (geometric subsample above)")
    pa.add_argument("--strip", type=float, default=None,
                    help="also report the first averaging order for "
                         "this strip width")
    pa.add_argument("--sigma-constant", type=float, default=16.0,
                    help="strip budget constant used with --strip")
    pa.add_argument("--out", default=".", help="output directory")
    pa.set_defaults(func=cmd_analyze)

    pb = sub.add_parser("approx", help="rational approximation basis")
    pb.add_argument("--freq", default="golden")
    pb.add_argument("--config", default=None)
    pb.add_argument("--Q", type=int, required=True,
                    help="approximation order")
    pb.add_argument("--qmax", type=int, default=1000,
                    help="arithmetic table size")
    pb.add_argument("--c-den", type=float, default=1.0,
                    help="denominator cap multiplier")
    pb.add_argument("--out", default=".", help="output directory")
    pb.set_defaults(func=cmd_approx)

    pr = sub.add_parser("run", help="compute an invariant torus")
    pr.add_argument("--config", required=True, help="TOML run config")
    pr.add_argument("--out", default="kam_out", help="output directory")
    pr.add_argument("--verify", action="store_true",
                    help="also run dynamical verification")
    pr.set_defaults(func=cmd_run)

    pv = sub.add_parser("verify", help="verify a stored torus")
    pv.add_argument("--result", required=True, help="result.json path")
    pv.add_argument("--embedding", required=True,
                    help="embedding.json path")
    pv.add_argument("--tmax", type=float, default=None,
                    help="override the trajectory horizon")
    pv.add_argument("--out", default=".", help="output directory")
    pv.set_defaults(func=cmd_verify)

    ps = sub.add_parser("step", help="run a single transformation step")
    ps.add_argument("--config", required=True, help="TOML run config")
    ps.add_argument("--dump-report", default=None,
                    help="path for the step report JSON")
    ps.add_argument("--out", default="kam_out", help="output directory")
    ps.set_defaults(func=cmd_step)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except KamError as exc:
        print(f"kam: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # unexpected -> numerical failure
        print(f"kam: internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
