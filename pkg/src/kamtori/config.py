"""Structured run configuration: TOML schema, validation, canonical echo.

The configuration names a frequency vector, the physical Hamiltonian
(quadratic form plus optional higher action monomials, and a real
perturbation given by cosine modes and/or explicit Fourier-Taylor
terms), the analyticity domain, the series caps, the scheme constants,
and the verification controls. ``RunConfig.canonical()`` resolves every
default so two configs with the same meaning echo identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

try:  # Python 3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as _toml

from .diophantine import FrequencyVector, preset_frequency
from .errors import UsageError
from .iterate import IterationSettings
from .reduction import IntegrableSpec, action_polynomial, cosine_series
from .series import FourierTaylor, SeriesCaps
from .step import StepSettings
from .verify import VerifySettings

SCHEMA_VERSION = 1

_PRESETS = ("golden", "sqrt2", "cubic-root")


def _fail(path: str, message: str) -> UsageError:
    return UsageError(f"config {path}: {message}")


def _get_table(data: dict, key: str, path: str, required: bool = False):
    val = data.get(key)
    if val is None:
        if required:
            raise _fail(path, f"missing required section [{key}]")
        return {}
    if not isinstance(val, dict):
        raise _fail(path, f"[{key}] must be a table")
    return val


def _get_float(tbl: dict, key: str, path: str, default=None,
               minimum=None, maximum=None) -> float:
    val = tbl.get(key, default)
    if val is None:
        raise _fail(path, f"missing required value '{key}'")
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise _fail(path, f"'{key}' must be a number, got {val!r}")
    val = float(val)
    if minimum is not None and val < minimum:
        raise _fail(path, f"'{key}' must be >= {minimum}, got {val}")
    if maximum is not None and val > maximum:
        raise _fail(path, f"'{key}' must be <= {maximum}, got {val}")
    return val


def _get_int(tbl: dict, key: str, path: str, default=None,
             minimum=None) -> int:
    val = tbl.get(key, default)
    if val is None:
        raise _fail(path, f"missing required value '{key}'")
    if isinstance(val, bool) or not isinstance(val, int):
        raise _fail(path, f"'{key}' must be an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise _fail(path, f"'{key}' must be >= {minimum}, got {val}")
    return int(val)


def _get_fraction(tbl: dict, key: str, path: str, default: float) -> float:
    """Float value, also accepting exact 'a/b' strings."""
    val = tbl.get(key)
    if val is None:
        return float(default)
    if isinstance(val, str):
        try:
            return float(Fraction(val))
        except (ValueError, ZeroDivisionError):
            raise _fail(path, f"'{key}' is not a valid fraction: {val!r}")
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise _fail(path, f"'{key}' must be a number or 'a/b', got {val!r}")
    return float(val)


@dataclass(frozen=True)
class FrequencyConfig:
    preset: Optional[str]
    values: Optional[tuple]
    qmax: int

    def build(self) -> FrequencyVector:
        if self.preset is not None:
            return preset_frequency(self.preset)
        return FrequencyVector(self.values)

    @property
    def n(self) -> int:
        if self.preset is not None:
            return preset_frequency(self.preset).n
        return len(self.values)

    def canonical(self) -> dict:
        out = {"qmax": self.qmax}
        if self.preset is not None:
            out["preset"] = self.preset
            out["values"] = [float(v) for v in preset_frequency(
                self.preset).values]
        else:
            out["values"] = [float(v) for v in self.values]
        return out


@dataclass(frozen=True)
class ModelConfig:
    epsilon: float
    hessian: Optional[tuple]          # row tuples, or None for identity
    action_terms: tuple               # ((exponents, coeff), ...)
    cosine_modes: tuple               # ((k, amplitude), ...)
    fourier_terms: tuple              # ((k, alpha, re, im), ...)

    def build(self, omega0: FrequencyVector) -> IntegrableSpec:
        n = omega0.n
        A = np.eye(n) if self.hessian is None else np.asarray(
            self.hessian, dtype=float)
        h_poly = action_polynomial(A, self.action_terms)
        f = cosine_series(n, self.cosine_modes)
        if self.fourier_terms:
            terms = {}
            for k, alpha, re, im in self.fourier_terms:
                key = tuple(k) + tuple(alpha) + (0,) * n
                terms[key] = terms.get(key, 0.0) + complex(re, im)
            f = f + FourierTaylor.from_terms(n, terms)
        return IntegrableSpec(omega0, h_poly, f, self.epsilon)

    def canonical(self, n: int) -> dict:
        A = np.eye(n) if self.hessian is None else np.asarray(self.hessian)
        return {
            "epsilon": float(self.epsilon),
            "hessian": [[float(v) for v in row] for row in A],
            "actionTerms": [
                {"exponents": [int(x) for x in e], "coeff": float(c)}
                for e, c in self.action_terms],
            "cosineModes": [
                {"k": [int(x) for x in k], "amplitude": float(a)}
                for k, a in self.cosine_modes],
            "fourierTerms": [
                {"k": [int(x) for x in k], "alpha": [int(x) for x in al],
                 "re": float(re), "im": float(im)}
                for k, al, re, im in self.fourier_terms],
        }


@dataclass(frozen=True)
class DomainConfig:
    strip: float
    param_radius: Optional[float]
    action_radius: Optional[float]

    def canonical(self) -> dict:
        return {
            "strip": float(self.strip),
            "paramRadius": (None if self.param_radius is None
                            else float(self.param_radius)),
            "actionRadius": (None if self.action_radius is None
                             else float(self.action_radius)),
        }


@dataclass(frozen=True)
class SchemeConfig:
    eta: float
    envelope_factor: float
    sigma_constant: float
    c_hauto: float
    max_iters: int
    stop_tol: float
    condition_mode: str

    def step_settings(self) -> StepSettings:
        return StepSettings(eta=self.eta,
                            envelope_factor=self.envelope_factor,
                            condition_mode=self.condition_mode)

    def iteration_settings(self) -> IterationSettings:
        return IterationSettings(max_iters=self.max_iters,
                                 stop_tol=self.stop_tol,
                                 c_sigma=self.sigma_constant,
                                 step=self.step_settings())

    def canonical(self) -> dict:
        return {
            "eta": float(self.eta),
            "envelopeFactor": float(self.envelope_factor),
            "sigmaConstant": float(self.sigma_constant),
            "cHauto": float(self.c_hauto),
            "maxIters": int(self.max_iters),
            "stopTol": float(self.stop_tol),
            "conditionMode": self.condition_mode,
        }


@dataclass(frozen=True)
class VerificationConfig:
    grid: int
    t_max: float
    dt: float
    n_orbits: int
    sample_stride: int
    invariance_tol: float
    shadow_tol: float
    energy_tol: float
    rotation_tol: float

    def settings(self, t_max: Optional[float] = None) -> VerifySettings:
        return VerifySettings(grid=self.grid,
                              t_max=self.t_max if t_max is None else t_max,
                              dt=self.dt, n_orbits=self.n_orbits,
                              sample_stride=self.sample_stride)

    def tolerances(self) -> dict:
        return {
            "invariance_tol": self.invariance_tol,
            "shadow_tol": self.shadow_tol,
            "energy_tol": self.energy_tol,
            "rotation_tol": self.rotation_tol,
        }

    def canonical(self) -> dict:
        return {
            "grid": int(self.grid),
            "tMax": float(self.t_max),
            "dt": float(self.dt),
            "nOrbits": int(self.n_orbits),
            "sampleStride": int(self.sample_stride),
            "invarianceTol": float(self.invariance_tol),
            "shadowTol": float(self.shadow_tol),
            "energyTol": float(self.energy_tol),
            "rotationTol": float(self.rotation_tol),
        }


@dataclass(frozen=True)
class RunConfig:
    frequency: FrequencyConfig
    model: ModelConfig
    domain: DomainConfig
    caps: SeriesCaps
    scheme: SchemeConfig
    verification: VerificationConfig

    def build_frequency(self) -> FrequencyVector:
        return self.frequency.build()

    def build_spec(self) -> IntegrableSpec:
        return self.model.build(self.build_frequency())

    def canonical(self) -> dict:
        return {
            "schemaVersion": SCHEMA_VERSION,
            "frequency": self.frequency.canonical(),
            "model": self.model.canonical(self.frequency.n),
            "domain": self.domain.canonical(),
            "caps": {
                "fourier": int(self.caps.cutoffK),
                "actionDegree": int(self.caps.degI),
                "paramDegree": int(self.caps.degW),
            },
            "scheme": self.scheme.canonical(),
            "verification": self.verification.canonical(),
        }


def _parse_frequency(data: dict, path: str) -> FrequencyConfig:
    tbl = _get_table(data, "frequency", path, required=True)
    preset = tbl.get("preset")
    values = tbl.get("values")
    if preset is None and values is None:
        raise _fail(path, "[frequency] needs 'preset' or 'values'")
    if preset is not None and values is not None:
        raise _fail(path, "[frequency] takes 'preset' or 'values', not both")
    if preset is not None:
        if preset not in _PRESETS:
            raise _fail(path, f"unknown frequency preset {preset!r}; "
                              f"available: {', '.join(_PRESETS)}")
    else:
        if (not isinstance(values, list) or len(values) < 2 or
                any(isinstance(v, bool) or not isinstance(v, (int, float))
                    for v in values)):
            raise _fail(path, "[frequency] 'values' must be a list of at "
                              "least two numbers")
        values = tuple(float(v) for v in values)
        if values[0] != 1.0:
            raise _fail(path, "[frequency] 'values' must be normalized "
                              "with first entry exactly 1.0")
    qmax = _get_int(tbl, "qmax", path, default=20000, minimum=8)
    return FrequencyConfig(preset=preset, values=values, qmax=qmax)


def _parse_int_list(val, length: int, what: str, path: str) -> tuple:
    if (not isinstance(val, list) or len(val) != length or
            any(isinstance(v, bool) or not isinstance(v, int)
                for v in val)):
        raise _fail(path, f"{what} must be a list of {length} integers, "
                          f"got {val!r}")
    return tuple(int(v) for v in val)


def _parse_model(data: dict, path: str, n: int) -> ModelConfig:
    tbl = _get_table(data, "model", path, required=True)
    epsilon = _get_float(tbl, "epsilon", path, minimum=0.0)

    hessian = tbl.get("hessian")
    if hessian is not None:
        if (not isinstance(hessian, list) or len(hessian) != n or
                any(not isinstance(row, list) or len(row) != n
                    for row in hessian)):
            raise _fail(path, f"model.hessian must be a {n}x{n} matrix")
        hessian = tuple(tuple(float(v) for v in row) for row in hessian)

    action_terms = []
    for i, entry in enumerate(tbl.get("action_terms", [])):
        if not isinstance(entry, dict):
            raise _fail(path, f"model.action_terms[{i}] must be a table")
        exps = _parse_int_list(entry.get("exponents"), n,
                               f"model.action_terms[{i}].exponents", path)
        coeff = _get_float(entry, "coeff", path)
        action_terms.append((exps, coeff))

    cosine_modes = []
    for i, entry in enumerate(tbl.get("cosine", [])):
        if not isinstance(entry, dict):
            raise _fail(path, f"model.cosine[{i}] must be a table")
        k = _parse_int_list(entry.get("k"), n, f"model.cosine[{i}].k", path)
        amp = _get_float(entry, "amplitude", path)
        cosine_modes.append((k, amp))

    fourier_terms = []
    for i, entry in enumerate(tbl.get("terms", [])):
        if not isinstance(entry, dict):
            raise _fail(path, f"model.terms[{i}] must be a table")
        k = _parse_int_list(entry.get("k"), n, f"model.terms[{i}].k", path)
        alpha = _parse_int_list(entry.get("alpha", [0] * n), n,
                                f"model.terms[{i}].alpha", path)
        if any(a < 0 for a in alpha):
            raise _fail(path, f"model.terms[{i}].alpha must be nonnegative")
        re = _get_float(entry, "re", path, default=0.0)
        im = _get_float(entry, "im", path, default=0.0)
        fourier_terms.append((k, alpha, re, im))

    if not cosine_modes and not fourier_terms and epsilon != 0.0:
        raise _fail(path, "model has epsilon > 0 but no perturbation "
                          "modes; add [[model.cosine]] or [[model.terms]] "
                          "or set epsilon = 0.0")
    return ModelConfig(epsilon=epsilon, hessian=hessian,
                       action_terms=tuple(action_terms),
                       cosine_modes=tuple(cosine_modes),
                       fourier_terms=tuple(fourier_terms))


def _parse_domain(data: dict, path: str) -> DomainConfig:
    tbl = _get_table(data, "domain", path, required=True)
    strip = _get_float(tbl, "strip", path, minimum=1e-6)
    pr = tbl.get("param_radius")
    if pr is not None:
        pr = _get_float(tbl, "param_radius", path, minimum=0.0)
        if pr <= 0.0:
            raise _fail(path, "domain.param_radius must be positive")
    ar = tbl.get("action_radius")
    if ar is not None:
        ar = _get_float(tbl, "action_radius", path, minimum=0.0)
        if ar <= 0.0:
            raise _fail(path, "domain.action_radius must be positive")
    return DomainConfig(strip=strip, param_radius=pr, action_radius=ar)


def _parse_caps(data: dict, path: str) -> SeriesCaps:
    tbl = _get_table(data, "caps", path, required=True)
    return SeriesCaps(
        cutoffK=_get_int(tbl, "fourier", path, minimum=1),
        degI=_get_int(tbl, "action_degree", path, default=2, minimum=1),
        degW=_get_int(tbl, "param_degree", path, default=2, minimum=1),
    )


def _parse_scheme(data: dict, path: str) -> SchemeConfig:
    tbl = _get_table(data, "scheme", path)
    mode = tbl.get("condition_mode", "record")
    if mode not in ("record", "strict"):
        raise _fail(path, f"scheme.condition_mode must be 'record' or "
                          f"'strict', got {mode!r}")
    return SchemeConfig(
        eta=_get_fraction(tbl, "eta", path, default=1.0 / 66.0),
        envelope_factor=_get_fraction(tbl, "envelope_factor", path,
                                      default=0.125),
        sigma_constant=_get_float(tbl, "sigma_constant", path, default=16.0,
                                  minimum=1.0),
        c_hauto=_get_float(tbl, "c_hauto", path, default=0.5, minimum=0.0),
        max_iters=_get_int(tbl, "max_iters", path, default=6, minimum=1),
        stop_tol=_get_float(tbl, "stop_tol", path, default=0.0, minimum=0.0),
        condition_mode=mode,
    )


def _parse_verification(data: dict, path: str) -> VerificationConfig:
    tbl = _get_table(data, "verification", path)
    return VerificationConfig(
        grid=_get_int(tbl, "grid", path, default=32, minimum=4),
        t_max=_get_float(tbl, "t_max", path, default=20.0, minimum=1e-3),
        dt=_get_float(tbl, "dt", path, default=1e-3, minimum=1e-9),
        n_orbits=_get_int(tbl, "n_orbits", path, default=4, minimum=1),
        sample_stride=_get_int(tbl, "sample_stride", path, default=50,
                               minimum=1),
        invariance_tol=_get_float(tbl, "invariance_tol", path,
                                  default=1e-8, minimum=0.0),
        shadow_tol=_get_float(tbl, "shadow_tol", path, default=1e-6,
                              minimum=0.0),
        energy_tol=_get_float(tbl, "energy_tol", path, default=1e-9,
                              minimum=0.0),
        rotation_tol=_get_float(tbl, "rotation_tol", path, default=1e-7,
                                minimum=0.0),
    )


def config_from_dict(data: dict, path: str = "<dict>") -> RunConfig:
    """Build and validate a RunConfig from parsed TOML/JSON data."""
    if not isinstance(data, dict):
        raise _fail(path, "top level must be a table")
    schema = data.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise _fail(path, f"unsupported schema version {schema!r} "
                          f"(this build reads {SCHEMA_VERSION})")
    freq = _parse_frequency(data, path)
    model = _parse_model(data, path, freq.n)
    domain = _parse_domain(data, path)
    caps = _parse_caps(data, path)
    scheme = _parse_scheme(data, path)
    verification = _parse_verification(data, path)
    cfg = RunConfig(frequency=freq, model=model, domain=domain, caps=caps,
                    scheme=scheme, verification=verification)
    cfg.build_spec()  # surface model errors at load time
    return cfg


def config_from_echo(echo: dict) -> RunConfig:
    """Rebuild a RunConfig from a canonical echo dictionary."""
    path = "<echo>"
    if not isinstance(echo, dict):
        raise _fail(path, "echo must be a dictionary")
    if echo.get("schemaVersion") != SCHEMA_VERSION:
        raise _fail(path, f"unsupported echo schema "
                          f"{echo.get('schemaVersion')!r}")
    try:
        data = _echo_to_data(echo)
    except (KeyError, TypeError) as exc:
        raise _fail(path, f"echo is malformed: {exc!r}")
    return config_from_dict(data, path)


def _echo_to_data(echo: dict) -> dict:
    # keep the preset name when the echo carries one, so rebuilding from an
    # echo is a fixed point (canonical echoes include both preset and the
    # resolved values)
    if echo["frequency"].get("preset") is not None:
        freq = {"preset": echo["frequency"]["preset"],
                "qmax": echo["frequency"]["qmax"]}
    else:
        freq = {"values": echo["frequency"]["values"],
                "qmax": echo["frequency"]["qmax"]}
    data = {
        "schema": SCHEMA_VERSION,
        "frequency": freq,
        "model": {
            "epsilon": echo["model"]["epsilon"],
            "hessian": echo["model"]["hessian"],
            "action_terms": [
                {"exponents": t["exponents"], "coeff": t["coeff"]}
                for t in echo["model"]["actionTerms"]],
            "cosine": [
                {"k": t["k"], "amplitude": t["amplitude"]}
                for t in echo["model"]["cosineModes"]],
            "terms": [
                {"k": t["k"], "alpha": t["alpha"],
                 "re": t["re"], "im": t["im"]}
                for t in echo["model"]["fourierTerms"]],
        },
        "domain": {"strip": echo["domain"]["strip"]},
        "caps": {
            "fourier": echo["caps"]["fourier"],
            "action_degree": echo["caps"]["actionDegree"],
            "param_degree": echo["caps"]["paramDegree"],
        },
        "scheme": {
            "eta": echo["scheme"]["eta"],
            "envelope_factor": echo["scheme"]["envelopeFactor"],
            "sigma_constant": echo["scheme"]["sigmaConstant"],
            "c_hauto": echo["scheme"]["cHauto"],
            "max_iters": echo["scheme"]["maxIters"],
            "stop_tol": echo["scheme"]["stopTol"],
            "condition_mode": echo["scheme"]["conditionMode"],
        },
        "verification": {
            "grid": echo["verification"]["grid"],
            "t_max": echo["verification"]["tMax"],
            "dt": echo["verification"]["dt"],
            "n_orbits": echo["verification"]["nOrbits"],
            "sample_stride": echo["verification"]["sampleStride"],
            "invariance_tol": echo["verification"]["invarianceTol"],
            "shadow_tol": echo["verification"]["shadowTol"],
            "energy_tol": echo["verification"]["energyTol"],
            "rotation_tol": echo["verification"]["rotationTol"],
        },
    }
    if echo["domain"].get("paramRadius") is not None:
        data["domain"]["param_radius"] = echo["domain"]["paramRadius"]
    if echo["domain"].get("actionRadius") is not None:
        data["domain"]["action_radius"] = echo["domain"]["actionRadius"]
    return data


def load_config(path) -> RunConfig:
    """Load and validate a TOML run configuration."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    try:
        with open(p, "rb") as fh:
            data = _toml.load(fh)
    except _toml.TOMLDecodeError as exc:
        raise UsageError(f"config {p}: invalid TOML: {exc}")
    return config_from_dict(data, str(p))
