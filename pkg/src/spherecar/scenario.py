"""Configuration-driven scenario runs with CSV and JSON outputs.

A scenario is a TOML document. Every section and key is optional except
``geometry.rho``; unknown sections or keys are rejected. See the README for
the full key list.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .controller import ControllerGains, SingularityPolicy, closed_loop_rate, feedback
from .exceptions import (
    AntipodalError,
    ConfigError,
    DivergenceError,
    InfeasibleSteeringError,
    OutOfRegimeError,
    SingularConfigurationError,
)
from .integrators import IntegratorConfig, integrate_trajectory
from .lie import exp_so3, random_rotation, rotation_defect
from .models import CarGeometry, config_from_position, steering_from_curvature
from .observer import (
    ObserverGains,
    error_linearization,
    observation_error,
    observer_body_rate,
    place_poles,
)
from .reference import ColatitudeCurve, FlatCurve, GreatCircle, LatitudeCircle
from .tracking import error_angles, offset_configuration

GENERATOR = "numpy.random.PCG64"
# |y0| may deviate from rho by this much and still be normalized onto the sphere
NORMALIZE_TOL = 1e-6
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_REGIME = 0, 1, 2, 3

REFERENCE_KINDS = ("great-circle", "latitude-circle", "flat-curve")

_REQUIRED = object()

# section -> key -> (kind, default)
SCHEMA = {
    "geometry": {"rho": ("float", _REQUIRED), "l": ("float", 1.0), "r": ("float", 0.0)},
    "reference": {
        "kind": ("str", "great-circle"),
        "axis": ("vec3", (0.0, 0.0, 1.0)),
        "start": ("vec3?", None),
        "psi": ("float", math.pi / 4),
        "psi0": ("float", math.pi / 2),
        "cos_coeffs": ("floats", ()),
        "sin_coeffs": ("floats", ()),
    },
    "controller": {"c_sigma": ("float", 1.0), "c_delta1": ("float", 2.0), "c_delta0": ("float", 1.0)},
    "policy": {
        "eps_den": ("float", 1e-6),
        "eps_err": ("float", 1e-8),
        "eps_delta": ("float", 1e-6),
        "eps_affine": ("float", 1e-12),
        "kappa_max": ("float?", None),
        "phi_max": ("float", 1.4),
        "secant_iterations": ("int", 50),
        "secant_tol": ("float", 1e-12),
        "sigma_hold": ("float", 1e-5),
    },
    "observer": {
        "poles": ("poles?", None),
        "l11": ("float?", None),
        "l22": ("float?", None),
        "l31": ("float?", None),
        "l32": ("float", 0.0),
        "initial_error": ("float", 0.0),
        "initial_axis": ("axis", (0.0, 0.0, 1.0)),
        "max_initial_error": ("float", 0.5),
    },
    "initial": {
        "sigma": ("float", 0.0),
        "delta": ("float", 0.0),
        "heading": ("float", 0.0),
        "y0": ("vec3?", None),
        "chart": ("vec2?", None),
        "theta0": ("float", 0.0),
        "perturbation": ("float", 0.0),
    },
    "open_loop": {
        "speed": ("float", 1.0),
        "steering": ("float", 0.0),
        "amplitude": ("float", 0.0),
        "frequency": ("float", 1.0),
        "feedforward": ("bool", False),
    },
    "integrator": {"method": ("str", "rkmk4"), "step": ("float", 1e-3), "renormalize_every": ("int", 1000),
                   "renormalize_tol": ("float", 1e-12)},
    "run": {
        "s_end": ("float", 5.0),
        "output_interval": ("float?", None),
        "seed": ("int", 0),
        "converge_tol": ("float", 1e-4),
    },
    "output": {"dir": ("str", "out"), "csv": ("str", "run.csv"), "summary": ("str", "summary.json")},
}


class ConfigWarning(UserWarning):
    pass


def _number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", name)
    if not math.isfinite(value):
        raise ConfigError("must be finite", name)
    return float(value)


def _coerce(kind, value, name):
    optional = kind.endswith("?")
    kind = kind.rstrip("?")
    if value is None and optional:
        return None
    if kind == "float":
        return _number(value, name)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", name)
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"expected true or false, got {value!r}", name)
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", name)
        return value
    if kind in ("vec3", "vec2", "floats"):
        if not isinstance(value, list):
            raise ConfigError(f"expected an array of numbers, got {value!r}", name)
        out = tuple(_number(v, f"{name}[{i}]") for i, v in enumerate(value))
        size = {"vec3": 3, "vec2": 2}.get(kind)
        if size is not None and len(out) != size:
            raise ConfigError(f"expected {size} components, got {len(out)}", name)
        return out
    if kind == "axis":
        if value == "random":
            return value
        return _coerce("vec3", value, name)
    if kind == "poles":
        if not isinstance(value, list):
            raise ConfigError("expected an array of poles", name)
        poles = []
        for i, p in enumerate(value):
            if isinstance(p, list):
                re, im = _coerce("vec2", p, f"{name}[{i}]")
                poles.append(complex(re, im))
            else:
                poles.append(complex(_number(p, f"{name}[{i}]")))
        return tuple(poles)
    raise AssertionError(kind)


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; each section is a plain mapping with all defaults filled in."""

    geometry: CarGeometry
    reference: dict
    gains: ControllerGains
    policy: SingularityPolicy
    observer: dict
    initial: dict
    open_loop: dict
    integrator: IntegratorConfig
    run: dict
    output: dict
    has_observer: bool = False

    def with_overrides(self, seed=None, step=None, out=None):
        """Copy with command-line overrides applied."""
        run = dict(self.run) if seed is None else {**self.run, "seed": _check_seed(seed, "--seed")}
        integ = self.integrator
        if step is not None:
            if not step > 0.0:
                raise ConfigError("step must be positive", "--step")
            integ = replace(integ, step=float(step))
        output = self.output if out is None else {**self.output, "dir": str(out)}
        return ScenarioConfig(self.geometry, self.reference, self.gains, self.policy, self.observer,
                              self.initial, self.open_loop, integ, run, output, self.has_observer)


def _check_seed(seed, name):
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", name)
    return int(seed)


def _section(doc, name):
    table = doc.get(name, {})
    if not isinstance(table, dict):
        raise ConfigError("expected a table", name)
    schema = SCHEMA[name]
    for key in table:
        if key not in schema:
            raise ConfigError("unknown key", f"{name}.{key}")
    out = {}
    for key, (kind, default) in schema.items():
        if key in table:
            out[key] = _coerce(kind, table[key], f"{name}.{key}")
        elif default is _REQUIRED:
            raise ConfigError("missing required key", f"{name}.{key}")
        else:
            out[key] = default
    return out


def _positive(section, name, key, allow_zero=False):
    v = section[key]
    if v is not None and not (v >= 0.0 if allow_zero else v > 0.0):
        raise ConfigError("must be " + ("non-negative" if allow_zero else "positive"), f"{name}.{key}")


def parse_config(doc):
    """Validate a parsed TOML mapping into a :class:`ScenarioConfig`."""
    for name in doc:
        if name not in SCHEMA:
            raise ConfigError("unknown section", name)
    s = {name: _section(doc, name) for name in SCHEMA}

    geo = s["geometry"]
    _positive(geo, "geometry", "rho")
    _positive(geo, "geometry", "l")
    _positive(geo, "geometry", "r", allow_zero=True)
    geom = CarGeometry(geo["l"], geo["r"], geo["rho"])

    ref = s["reference"]
    if ref["kind"] not in REFERENCE_KINDS:
        raise ConfigError(f"expected one of {REFERENCE_KINDS}", "reference.kind")
    if abs(np.linalg.norm(ref["axis"]) - 1.0) > 1e-9:
        raise ConfigError("must be a unit vector", "reference.axis")
    if not 0.0 < ref["psi"] < math.pi:
        raise ConfigError("colatitude must lie strictly between 0 and pi", "reference.psi")
    if ref["kind"] == "flat-curve":
        bound = sum(map(abs, ref["cos_coeffs"])) + sum(map(abs, ref["sin_coeffs"]))
        if not bound < ref["psi0"] < math.pi - bound:
            raise ConfigError("colatitude profile must stay strictly between the poles", "reference.psi0")

    for key in ("c_sigma", "c_delta1", "c_delta0"):
        _positive(s["controller"], "controller", key)
    gains = ControllerGains(**s["controller"])

    pol = s["policy"]
    for key in ("eps_den", "eps_err", "eps_delta", "eps_affine", "kappa_max", "phi_max", "secant_tol", "sigma_hold"):
        _positive(pol, "policy", key)
    if not pol["phi_max"] < 0.5 * math.pi:
        raise ConfigError("must be below pi/2", "policy.phi_max")
    if pol["secant_iterations"] < 1:
        raise ConfigError("must be at least 1", "policy.secant_iterations")
    policy = SingularityPolicy(**pol)

    obs = s["observer"]
    explicit = [obs[k] is not None for k in ("l11", "l22", "l31")]
    if obs["poles"] is not None and any(explicit):
        raise ConfigError("give either poles or explicit gains, not both", "observer.poles")
    if any(explicit) and not all(explicit):
        raise ConfigError("explicit gains need l11, l22 and l31", "observer.l11")
    if obs["l22"] is not None and not obs["l22"] < 0.0:
        raise ConfigError("must be negative", "observer.l22")
    _positive(obs, "observer", "initial_error", allow_zero=True)
    _positive(obs, "observer", "max_initial_error")
    if obs["initial_axis"] != "random" and abs(np.linalg.norm(obs["initial_axis"]) - 1.0) > 1e-9:
        raise ConfigError("must be a unit vector or \"random\"", "observer.initial_axis")
    has_observer = obs["poles"] is not None or all(explicit)

    ini = s["initial"]
    if ini["y0"] is not None and ini["chart"] is not None:
        raise ConfigError("give either y0 or chart, not both", "initial.y0")
    _positive(ini, "initial", "sigma", allow_zero=True)
    _positive(ini, "initial", "perturbation", allow_zero=True)
    if ini["y0"] is not None:
        y0 = np.asarray(ini["y0"])
        dev = abs(np.linalg.norm(y0) - geom.rho)
        if dev > NORMALIZE_TOL * max(1.0, geom.rho):
            raise ConfigError(f"position is off the sphere by {dev:.3g}", "initial.y0")
        if dev > 0.0:
            warnings.warn(f"initial.y0 is off the sphere by {dev:.3g}; normalized", ConfigWarning, stacklevel=2)
        ini["y0"] = tuple(geom.rho * y0 / np.linalg.norm(y0))

    integ = s["integrator"]
    try:
        integrator = IntegratorConfig(**integ)
    except ValueError as err:
        msg = str(err)
        key = next((k for k in ("method", "renormalize_every", "renormalize_tol", "step") if k in msg), "method")
        raise ConfigError(str(err), f"integrator.{key}") from None

    run = s["run"]
    _positive(run, "run", "s_end")
    _positive(run, "run", "output_interval")
    _positive(run, "run", "converge_tol")
    run["seed"] = _check_seed(run["seed"], "run.seed")

    return ScenarioConfig(geom, ref, gains, policy, obs, ini, s["open_loop"], integrator, run,
                          s["output"], has_observer)


def load_config(path):
    """Read and validate a scenario file."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"parse error in {path}: {err}") from None
    return parse_config(doc)


def loads_config(text):
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"parse error: {err}") from None
    return parse_config(doc)


def make_reference(cfg):
    ref, geom = cfg.reference, cfg.geometry
    if ref["kind"] == "great-circle":
        return GreatCircle(geom.rho, ref["axis"], ref["start"])
    if ref["kind"] == "latitude-circle":
        return LatitudeCircle(ref["psi"], geom.rho)
    curve = ColatitudeCurve(geom.rho, ref["psi0"], ref["cos_coeffs"], ref["sin_coeffs"])
    return FlatCurve(curve, geom, (0.0, curve.period), periodic=True)


def make_rng(cfg):
    return np.random.Generator(np.random.PCG64(cfg.run["seed"]))


def chart_to_position(x, rho):
    """Inverse of the azimuthal equidistant chart about the north pole."""
    x = np.asarray(x, dtype=float)
    d = float(np.linalg.norm(x))
    if d == 0.0:
        return np.array([0.0, 0.0, rho])
    a = d / rho
    return rho * np.array([math.sin(a) * x[0] / d, math.sin(a) * x[1] / d, math.cos(a)])


def initial_configuration(cfg, reference, rng):
    ini, rho = cfg.initial, cfg.geometry.rho
    if ini["y0"] is not None:
        g = config_from_position(ini["y0"], ini["theta0"], rho)
    elif ini["chart"] is not None:
        g = config_from_position(chart_to_position(ini["chart"], rho), ini["theta0"], rho)
    else:
        g = offset_configuration(reference.sample(0.0).g, ini["sigma"], ini["delta"], ini["heading"])
    if ini["perturbation"] > 0.0:
        g = random_rotation(rng, ini["perturbation"]) @ g
    return g


def observer_gains(cfg):
    obs = cfg.observer
    if obs["poles"] is not None:
        return place_poles(obs["poles"], cfg.geometry.rho, obs["l32"])
    return ObserverGains(l11=obs["l11"], l22=obs["l22"], l31=obs["l31"], l32=obs["l32"])


def initial_estimate(cfg, g0, rng):
    obs = cfg.observer
    if obs["initial_error"] > obs["max_initial_error"]:
        raise OutOfRegimeError(
            f"initial estimate error {obs['initial_error']:g} rad exceeds the local regime "
            f"bound {obs['max_initial_error']:g} rad")
    axis = obs["initial_axis"]
    if axis == "random":
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
    return g0 @ exp_so3(axis, obs["initial_error"])


def output_grid(cfg):
    s_end = cfg.run["s_end"]
    interval = cfg.run["output_interval"] or cfg.integrator.step
    n = max(1, math.ceil(s_end / interval - 1e-9))
    return np.linspace(0.0, s_end, n + 1)


_G = [f"g{i}{j}" for i in range(1, 4) for j in range(1, 4)]
_GHAT = [f"ghat{i}{j}" for i in range(1, 4) for j in range(1, 4)]
_TAIL = ["y1", "y2", "y3", "sigma", "delta", "u", "phi", "kappa_g"]

COLUMNS = ["s_d"] + _G + _TAIL
OBSERVER_COLUMNS = ["s_d"] + _G + _GHAT + _TAIL + ["observer_error"]
COLS_OF = {name: i for i, name in enumerate(OBSERVER_COLUMNS)}
FLATNESS_COLUMNS = ["s_d", "y1", "y2", "y3", "v", "kappa_g", "dkappa_g", "phi"] + _G

SUMMARY_KEYS = {
    "common": ["mode", "status", "message", "exit_code", "seed", "generator", "s_end", "step",
               "method", "rows", "columns", "max_orthonormality_defect"],
    "simulate": ["final_position", "final_sigma"],
    "track": ["sigma0", "delta0", "sigma_decay_rate", "delta_ode_max_residual", "fallback_count",
              "mode_counts", "final_sigma"],
    "observe": ["poles", "gains", "eigenvalues", "convergence_length", "initial_error", "final_error"],
    "output-feedback": ["experimental", "gains", "tracking_converged", "final_sigma",
                        "final_observer_error", "fallback_count", "mode_counts"],
    "flatness": ["max_abs_phi", "max_abs_kappa_g"],
}


@dataclass
class RunResult:
    mode: str
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK


def _row(s, g, g_hat, rho, sigma, delta, u, phi, kappa, obs_err=None):
    row = [s] + list(np.asarray(g).ravel())
    if g_hat is not None:
        row += list(np.asarray(g_hat).ravel())
    row += list(rho * np.asarray(g)[:, 2]) + [sigma, delta, u, phi, kappa]
    if g_hat is not None:
        row.append(obs_err)
    return [float(x) for x in row]


def _base_summary(cfg, mode):
    return {
        "mode": mode,
        "status": "completed",
        "message": "",
        "exit_code": EXIT_OK,
        "seed": cfg.run["seed"],
        "generator": GENERATOR,
        "s_end": cfg.run["s_end"],
        "step": cfg.integrator.step,
        "method": cfg.integrator.method,
    }


def _fail(result, status, code, err):
    result.summary.update(status=status, exit_code=code, message=str(err))
    result.exit_code = code


_CONTROLLER_ERRORS = (InfeasibleSteeringError, SingularConfigurationError, AntipodalError)


def _finish(result, rotations):
    result.summary["rows"] = len(result.rows)
    result.summary["columns"] = list(result.columns)
    defect = 0.0
    for g in rotations:
        defect = max(defect, *rotation_defect(g))
    result.summary["max_orthonormality_defect"] = defect
    return result


def delta_oracle(s, delta0, ddelta0, gains):
    """Solution of delta'' + c1 delta' + c0 delta = 0 at stations ``s``."""
    M = np.array([[0.0, 1.0], [-gains.c_delta0, -gains.c_delta1]])
    x0 = np.array([delta0, ddelta0])
    return np.array([(expm(M * (si - s[0])) @ x0)[0] for si in s])


def decay_rate(s, sigma, floor=1e-12):
    """Least-squares rate r in log sigma = a - r s over samples above ``floor``."""
    s, sigma = np.asarray(s), np.asarray(sigma)
    keep = sigma > floor
    if keep.sum() < 2:
        return None
    slope = np.polyfit(s[keep], np.log(sigma[keep]), 1)[0]
    return float(-slope)


def _tracking_stats(result, diags, gains):
    s = np.array([r[0] for r in result.rows])
    sigma = np.array([d.sigma for d in diags])
    result.summary["sigma_decay_rate"] = decay_rate(s, sigma) if len(s) > 1 else None
    controlled = 0
    for d in diags:
        if d.mode not in ("affine", "secant"):
            break
        controlled += 1
    residual = None
    if controlled > 1:
        delta = np.unwrap([d.delta for d in diags[:controlled]])
        oracle = delta_oracle(s[:controlled], diags[0].delta, diags[0].ddelta, gains)
        residual = float(np.max(np.abs(delta - oracle)))
    result.summary["delta_ode_max_residual"] = residual
    result.summary["final_sigma"] = float(sigma[-1]) if len(sigma) else None


def _mode_counter(counter):
    return {"fallback_count": counter.get("fallback", 0), "mode_counts": dict(sorted(counter.items()))}


def run_tracking(cfg):
    """Closed-loop tracking of the configured reference."""
    geom, gains, policy = cfg.geometry, cfg.gains, cfg.policy
    ref = make_reference(cfg)
    rng = make_rng(cfg)
    g0 = initial_configuration(cfg, ref, rng)
    result = RunResult("track", COLUMNS, summary=_base_summary(cfg, "track"))
    diags, states, counter = [], [], Counter()

    def rate(s, g):
        w, diag = closed_loop_rate(s, g, ref, gains, policy, geom)
        counter[diag.mode] += 1
        return w

    def record(s, g):
        d = feedback(g, ref.sample(s), gains, policy, geom)
        diags.append(d)
        states.append(g)
        result.rows.append(_row(s, g, None, geom.rho, d.sigma, d.delta, d.u, d.phi, d.kappa_g))

    init = error_angles(g0, ref.sample(0.0).g)
    result.summary.update(sigma0=init.sigma, delta0=init.delta)
    try:
        integrate_trajectory(g0, rate, output_grid(cfg), cfg.integrator, record)
    except _CONTROLLER_ERRORS as err:
        _fail(result, "infeasible", EXIT_INFEASIBLE, err)
    result.summary.update(_mode_counter(counter))
    _tracking_stats(result, diags, gains)
    return _finish(result, states)


def run_simulate(cfg):
    """Open-loop run under constant-plus-sinusoid inputs or the reference feedforward."""
    geom = cfg.geometry
    ref = make_reference(cfg)
    rng = make_rng(cfg)
    g0 = initial_configuration(cfg, ref, rng)
    ol = cfg.open_loop
    result = RunResult("simulate", COLUMNS, summary=_base_summary(cfg, "simulate"))
    states = []

    def inputs(s):
        if ol["feedforward"]:
            return 1.0, ref.sample(s).kappa
        phi = ol["steering"] + ol["amplitude"] * math.sin(ol["frequency"] * s)
        return ol["speed"], math.tan(phi) / geom.ell

    def rate(s, g):
        u, kappa = inputs(s)
        return (0.0, u / geom.rho, u * kappa)

    def record(s, g):
        u, kappa = inputs(s)
        e = error_angles(g, ref.sample(s).g)
        states.append(g)
        result.rows.append(_row(s, g, None, geom.rho, e.sigma, e.delta, u,
                                steering_from_curvature(kappa, geom), kappa))

    try:
        integrate_trajectory(g0, rate, output_grid(cfg), cfg.integrator, record)
    except AntipodalError as err:
        _fail(result, "antipodal", EXIT_INFEASIBLE, err)
    if result.rows:
        result.summary["final_position"] = result.rows[-1][10:13]
        result.summary["final_sigma"] = result.rows[-1][13]
    return _finish(result, states)


def _eigen_summary(gains, rho, kappa):
    ev = np.linalg.eigvals(error_linearization(kappa, rho, gains))
    ev = sorted(ev, key=lambda z: (z.real, z.imag))
    return [[float(z.real), float(z.imag)] for z in ev]


def run_observer(cfg):
    """Observer driven by the position of a vehicle moving exactly along the reference."""
    if not cfg.has_observer:
        raise ConfigError("observer poles or gains are required", "observer.poles")
    geom = cfg.geometry
    rho = geom.rho
    ref = make_reference(cfg)
    rng = make_rng(cfg)
    obs_gains = observer_gains(cfg)
    result = RunResult("observe", OBSERVER_COLUMNS, summary=_base_summary(cfg, "observe"))
    s0 = ref.sample(0.0)
    result.summary.update(
        poles=None if cfg.observer["poles"] is None else [[p.real, p.imag] for p in cfg.observer["poles"]],
        gains=obs_gains.as_dict(),
        eigenvalues=_eigen_summary(obs_gains, rho, s0.kappa),
        initial_error=cfg.observer["initial_error"],
    )
    states, angles = [], []
    try:
        g_hat0 = initial_estimate(cfg, s0.g, rng)
    except OutOfRegimeError as err:
        _fail(result, "out-of-regime", EXIT_REGIME, err)
        return _finish(result, states)

    def rate(s, g_hat):
        sample = ref.sample(s)
        return observer_body_rate(g_hat, (rho * sample.g[:, 2]).tolist(), sample.kappa, rho, obs_gains)

    def record(s, g_hat):
        sample = ref.sample(s)
        err = observation_error(sample.g, g_hat).angle
        angles.append(err)
        states.append(g_hat)
        result.rows.append(_row(s, sample.g, g_hat, rho, 0.0, 0.0, 1.0,
                                steering_from_curvature(sample.kappa, geom), sample.kappa, err))

    try:
        integrate_trajectory(g_hat0, rate, output_grid(cfg), cfg.integrator, record)
    except OutOfRegimeError as err:
        _fail(result, "out-of-regime", EXIT_REGIME, err)
    s = [r[0] for r in result.rows]
    result.summary["convergence_length"] = _convergence(s, angles, 1e-6)
    result.summary["final_error"] = angles[-1] if angles else None
    return _finish(result, states)


def _convergence(s, angles, threshold):
    above = [i for i, a in enumerate(angles) if a >= threshold]
    if not angles:
        return None
    if not above:
        return s[0]
    return None if above[-1] == len(angles) - 1 else s[above[-1] + 1]


def run_output_feedback(cfg):
    """Experimental: the tracking controller fed with the observer estimate."""
    if not cfg.has_observer:
        raise ConfigError("observer poles or gains are required", "observer.poles")
    geom, gains, policy = cfg.geometry, cfg.gains, cfg.policy
    rho = geom.rho
    ref = make_reference(cfg)
    rng = make_rng(cfg)
    obs_gains = observer_gains(cfg)
    result = RunResult("output-feedback", OBSERVER_COLUMNS, summary=_base_summary(cfg, "output-feedback"))
    result.summary.update(experimental=True, gains=obs_gains.as_dict())
    g0 = initial_configuration(cfg, ref, rng)
    states, counter = [], Counter()
    try:
        g_hat0 = initial_estimate(cfg, g0, rng)
    except OutOfRegimeError as err:
        _fail(result, "out-of-regime", EXIT_REGIME, err)
        result.summary.update(_mode_counter(counter))
        return _finish(result, states)

    def rate(s, G):
        g, g_hat = G[0], G[1]
        diag = feedback(g_hat, ref.sample(s), gains, policy, geom)
        counter[diag.mode] += 1
        u, kappa = diag.u, diag.kappa_g
        w_hat = observer_body_rate(g_hat, (rho * g[:, 2]).tolist(), kappa, rho, obs_gains, speed=u)
        return np.array([[0.0, u / rho, u * kappa], w_hat])

    def record(s, G):
        g, g_hat = G[0], G[1]
        sample = ref.sample(s)
        d = feedback(g_hat, sample, gains, policy, geom)
        e = error_angles(g, sample.g)
        obs_err = observation_error(g, g_hat).angle
        states.append(G)
        result.rows.append(_row(s, g, g_hat, rho, e.sigma, e.delta, d.u, d.phi, d.kappa_g, obs_err))
        if e.sigma > 0.5 * math.pi:
            raise DivergenceError(f"tracking error {e.sigma:.3f} rad exceeds pi/2; run diverged")

    try:
        integrate_trajectory(np.stack([g0, g_hat0]), rate, output_grid(cfg), cfg.integrator, record)
    except _CONTROLLER_ERRORS as err:
        _fail(result, "infeasible", EXIT_INFEASIBLE, err)
    except OutOfRegimeError as err:
        status = "diverged" if isinstance(err, DivergenceError) else "out-of-regime"
        _fail(result, status, EXIT_REGIME, err)
    result.summary.update(_mode_counter(counter))
    final_sigma = result.rows[-1][COLS_OF["sigma"]] if result.rows else None
    result.summary.update(
        final_sigma=final_sigma,
        final_observer_error=result.rows[-1][-1] if result.rows else None,
        tracking_converged=bool(result.exit_code == EXIT_OK and final_sigma is not None
                                and final_sigma < cfg.run["converge_tol"]),
    )
    return _finish(result, states)


def run_flatness(cfg):
    """Inputs recovered from the reference curve through the flat output."""
    geom = cfg.geometry
    ref = make_reference(cfg)
    result = RunResult("flatness", FLATNESS_COLUMNS, summary=_base_summary(cfg, "flatness"))
    states = []
    for s in output_grid(cfg):
        sample = ref.sample(s)
        phi = steering_from_curvature(sample.kappa, geom)
        v = 1.0 if sample.v is None else sample.v
        states.append(sample.g)
        result.rows.append([float(s)] + list(geom.rho * sample.g[:, 2]) + [v, sample.kappa, sample.dkappa, phi]
                           + list(sample.g.ravel()))
    result.summary["max_abs_phi"] = max(abs(r[7]) for r in result.rows)
    result.summary["max_abs_kappa_g"] = max(abs(r[5]) for r in result.rows)
    return _finish(result, states)


RUNNERS = {
    "simulate": run_simulate,
    "track": run_tracking,
    "observe": run_observer,
    "output-feedback": run_output_feedback,
    "flatness": run_flatness,
}


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


def format_number(x):
    return format(x, ".17g")


def emit_outputs(result, out_dir, csv_name="run.csv", summary_name="summary.json"):
    """Write the CSV rows and the JSON summary; returns both paths."""
    csv_path = os.path.join(out_dir, csv_name)
    summary_path = os.path.join(out_dir, summary_name)
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(result.columns)
            for row in result.rows:
                writer.writerow([format_number(x) for x in row])
        with open(summary_path, "w") as fh:
            json.dump(_json_safe(result.summary), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    except OSError as err:
        path = err.filename or out_dir
        raise OSError(err.errno, f"cannot write output {path}: {err.strerror}") from None
    return csv_path, summary_path


def read_csv(path):
    """Header and float rows of an emitted CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [[float(x) for x in row] for row in reader]


def run_scenario(mode, cfg):
    try:
        runner = RUNNERS[mode]
    except KeyError:
        raise ConfigError(f"unknown mode {mode!r}") from None
    return runner(cfg)
