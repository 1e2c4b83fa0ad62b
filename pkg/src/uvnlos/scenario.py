"""Scenario files: JSON descriptions of a link budget computation.

A scenario file collects everything one computation needs: transceiver
pose, optional obstacle, atmosphere, reflection properties, source energy
and per-model numerical settings.  Key names carry their unit (``_rad``,
``_m``, ``_cm2``, ``_per_km``) so a file never depends on out-of-band
unit conventions.

Obstacle scalars may be coupled to the link range instead of fixed:

* any of ``w_m``, ``s_m``, ``kappa_m``, ``y_o_m``, ``x_o_m`` accepts either
  a plain number or ``{"times_range": k}`` meaning ``k * range_m``;
* ``x_o_m`` additionally accepts ``{"offset_from_max": v}`` placing the
  center ``v`` meters inside the admissible limit, where ``v`` is again a
  number or ``{"times_range": k}``.

Coupled fields re-resolve every time the scenario is parsed, so sweeping
``range_m`` moves a coupled obstacle along with it.  The raw, unresolved
dictionary is kept on the parsed object and is what serialization emits;
parse -> serialize -> parse is therefore an exact identity.

Validation failures raise :class:`ScenarioError` whose message starts with
the dotted path of the offending field.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

from .atmosphere import Atmosphere
from .geometry import DomainError, Obstacle, TransceiverGeometry, obstacle_vertices
from .mcpt import McptConfig
from .reflection import ReflectionParams
from .scattering import ScatterIntegralConfig

CM2_TO_M2 = 1e-4

# Canonical model tokens accepted by the command line and by sweep blocks.
# "obstacle" and "total" have long-form aliases spelling out what they add.
MODEL_ALIASES = {
    "exact+obstacle": "obstacle",
    "exact+obstacle+reflection": "total",
}
MODEL_NAMES = ("exact", "obstacle", "reflection", "total", "simplified", "mcpt")

SWEEP_VARIABLES = (
    "range_r", "beta_t", "beta_r", "theta_t", "theta_r", "alpha", "x_o")

# scenario key -> sweep variable location, used by apply_sweep_value
_SWEEP_KEYS = {
    "range_r": ("geometry", "range_m"),
    "beta_t": ("geometry", "beta_t_rad"),
    "beta_r": ("geometry", "beta_r_rad"),
    "theta_t": ("geometry", "theta_t_rad"),
    "theta_r": ("geometry", "theta_r_rad"),
    "alpha": ("obstacle", "alpha_rad"),
    "x_o": ("obstacle", "x_o_m"),
}


class ScenarioError(ValueError):
    """A scenario file failed validation; message names the field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class SweepSpec:
    """Default sweep settings bundled inside a scenario file."""

    variable: str
    values: tuple
    models: tuple


@dataclass(frozen=True)
class Scenario:
    """A fully resolved scenario plus the raw dictionary it came from."""

    geometry: TransceiverGeometry
    obstacle: Obstacle | None
    atmosphere: Atmosphere
    reflection: ReflectionParams
    source_energy: float
    scatter_config: ScatterIntegralConfig
    sampling_beta_fraction: float
    legendre_u: int
    mcpt_config: McptConfig
    sweep: SweepSpec | None
    raw: dict

    @property
    def sampling_beta(self):
        return self.sampling_beta_fraction * self.geometry.beta_t


def canonical_model_name(token):
    """Map a model token or alias to its canonical name."""
    name = MODEL_ALIASES.get(token, token)
    if name not in MODEL_NAMES:
        raise ScenarioError(
            "models", f"unknown model {token!r}; choose from "
            f"{', '.join(MODEL_NAMES)} (aliases: "
            f"{', '.join(sorted(MODEL_ALIASES))})")
    return name


def _require_mapping(obj, path):
    if not isinstance(obj, dict):
        raise ScenarioError(path, f"expected an object, got {type(obj).__name__}")
    return obj


def _child(path, key):
    return f"{path}.{key}" if path else str(key)


def _reject_unknown(obj, allowed, path):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ScenarioError(
            f"{path}.{unknown[0]}" if path else unknown[0],
            f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(obj, key, path, default=None, required=False):
    if key not in obj:
        if required:
            raise ScenarioError(_child(path, key), "missing required key")
        return default
    v = obj[key]
    # bool is an int subclass; a bare true/false is never a valid quantity
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(_child(path, key), f"expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ScenarioError(_child(path, key), f"expected a finite number, got {v!r}")
    return float(v)


def _integer(obj, key, path, default=None, required=False):
    if key not in obj:
        if required:
            raise ScenarioError(_child(path, key), "missing required key")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(_child(path, key), f"expected an integer, got {v!r}")
    return v


def _flag(obj, key, path, default):
    v = obj.get(key, default)
    if not isinstance(v, bool):
        raise ScenarioError(_child(path, key), f"expected true/false, got {v!r}")
    return v


def _coupled_length(obj, key, path, range_m, required=True):
    """Resolve a number-or-{"times_range": k} obstacle scalar."""
    if key not in obj:
        if required:
            raise ScenarioError(_child(path, key), "missing required key")
        return None
    v = obj[key]
    if isinstance(v, dict):
        _reject_unknown(v, ("times_range",), _child(path, key))
        k = _number(v, "times_range", _child(path, key), required=True)
        return k * range_m
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(
            _child(path, key),
            f'expected a number or {{"times_range": k}}, got {v!r}')
    if not math.isfinite(v):
        raise ScenarioError(_child(path, key), f"expected a finite number, got {v!r}")
    return float(v)


def _resolve_x_o(obj, path, range_m, w, s, alpha):
    """x_o_m also accepts {"offset_from_max": v}: v meters inside the limit."""
    v = obj.get("x_o_m")
    if isinstance(v, dict) and "offset_from_max" in v:
        _reject_unknown(v, ("offset_from_max",), f"{path}.x_o_m")
        inner = v["offset_from_max"]
        if isinstance(inner, dict):
            _reject_unknown(inner, ("times_range",), f"{path}.x_o_m.offset_from_max")
            off = _number(inner, "times_range",
                          f"{path}.x_o_m.offset_from_max", required=True) * range_m
        elif isinstance(inner, bool) or not isinstance(inner, (int, float)):
            raise ScenarioError(
                f"{path}.x_o_m.offset_from_max",
                f'expected a number or {{"times_range": k}}, got {inner!r}')
        else:
            off = float(inner)
        half_diagonal = math.hypot(w, s) / 2.0
        alpha_th = math.atan2(s, w)
        x_o_max = -half_diagonal * math.sin(alpha_th + abs(alpha))
        return x_o_max - off
    return _coupled_length(obj, "x_o_m", path, range_m)


_GEOMETRY_KEYS = ("beta_t_rad", "beta_r_rad", "theta_t_rad", "theta_r_rad",
                  "alpha_t_rad", "alpha_r_rad", "range_m", "aperture_cm2",
                  "strict_pointing")


def _parse_geometry(obj):
    obj = _require_mapping(obj, "geometry")
    _reject_unknown(obj, _GEOMETRY_KEYS, "geometry")
    kwargs = dict(
        beta_t=_number(obj, "beta_t_rad", "geometry", required=True),
        beta_r=_number(obj, "beta_r_rad", "geometry", required=True),
        theta_t=_number(obj, "theta_t_rad", "geometry", required=True),
        theta_r=_number(obj, "theta_r_rad", "geometry", required=True),
        alpha_t=_number(obj, "alpha_t_rad", "geometry", required=True),
        alpha_r=_number(obj, "alpha_r_rad", "geometry", required=True),
        range_r=_number(obj, "range_m", "geometry", required=True),
        aperture_area=_number(obj, "aperture_cm2", "geometry",
                              required=True) * CM2_TO_M2,
        strict_pointing=_flag(obj, "strict_pointing", "geometry", True),
    )
    try:
        return TransceiverGeometry(**kwargs)
    except DomainError as exc:
        raise ScenarioError("geometry", str(exc)) from exc


_OBSTACLE_KEYS = ("w_m", "s_m", "kappa_m", "x_o_m", "y_o_m", "alpha_rad",
                  "enforce_pose_bounds")


def _parse_obstacle(obj, range_m):
    if obj is None:
        return None
    obj = _require_mapping(obj, "obstacle")
    _reject_unknown(obj, _OBSTACLE_KEYS, "obstacle")
    # resolution order: extents and tilt first, then x_o (whose admissible
    # limit depends on them), then y_o
    w = _coupled_length(obj, "w_m", "obstacle", range_m)
    s = _coupled_length(obj, "s_m", "obstacle", range_m)
    kappa = _coupled_length(obj, "kappa_m", "obstacle", range_m)
    alpha = _number(obj, "alpha_rad", "obstacle", required=True)
    if "x_o_m" not in obj:
        raise ScenarioError("obstacle.x_o_m", "missing required key")
    x_o = _resolve_x_o(obj, "obstacle", range_m, w, s, alpha)
    y_o = _coupled_length(obj, "y_o_m", "obstacle", range_m)
    enforce = _flag(obj, "enforce_pose_bounds", "obstacle", True)
    try:
        return obstacle_vertices(w, s, kappa, x_o, y_o, alpha,
                                 range_r=range_m, enforce_pose_bounds=enforce)
    except DomainError as exc:
        raise ScenarioError("obstacle", str(exc)) from exc


_ATMOSPHERE_KEYS = ("ks_ray_per_km", "ks_mie_per_km", "ka_per_km",
                    "gamma", "g", "f")


def _parse_atmosphere(obj):
    obj = _require_mapping(obj, "atmosphere")
    _reject_unknown(obj, _ATMOSPHERE_KEYS, "atmosphere")
    try:
        return Atmosphere(
            ks_ray=_number(obj, "ks_ray_per_km", "atmosphere", required=True),
            ks_mie=_number(obj, "ks_mie_per_km", "atmosphere", required=True),
            ka=_number(obj, "ka_per_km", "atmosphere", required=True),
            gamma=_number(obj, "gamma", "atmosphere", required=True),
            g=_number(obj, "g", "atmosphere", required=True),
            f=_number(obj, "f", "atmosphere", required=True),
        )
    except DomainError as exc:
        raise ScenarioError("atmosphere", str(exc)) from exc


_REFLECTION_KEYS = ("r_r", "m_s", "eta")


def _parse_reflection(obj):
    if obj is None:
        return ReflectionParams(r_r=0.1, m_s=5.0, eta=0.5)
    obj = _require_mapping(obj, "reflection")
    _reject_unknown(obj, _REFLECTION_KEYS, "reflection")
    try:
        return ReflectionParams(
            r_r=_number(obj, "r_r", "reflection", required=True),
            m_s=_number(obj, "m_s", "reflection", required=True),
            eta=_number(obj, "eta", "reflection", required=True),
        )
    except DomainError as exc:
        raise ScenarioError("reflection", str(exc)) from exc


_SCATTER_KEYS = ("n_theta", "n_varpi", "n_tau", "tau_truncation_factor",
                 "quadrature_kind")
_MCPT_KEYS = ("n_photons", "survival_threshold", "collision_order",
              "rng_seed", "enable_reflection", "tau_truncation_factor")
_MODELS_KEYS = ("scatter_grid", "sampling_beta_fraction", "legendre_u", "mcpt")


def _parse_scatter_config(obj):
    if obj is None:
        return ScatterIntegralConfig()
    obj = _require_mapping(obj, "models.scatter_grid")
    _reject_unknown(obj, _SCATTER_KEYS, "models.scatter_grid")
    path = "models.scatter_grid"
    kind = obj.get("quadrature_kind", "gauss")
    if not isinstance(kind, str):
        raise ScenarioError(f"{path}.quadrature_kind",
                            f"expected a string, got {kind!r}")
    try:
        return ScatterIntegralConfig(
            n_theta=_integer(obj, "n_theta", path, default=64),
            n_varpi=_integer(obj, "n_varpi", path, default=64),
            n_tau=_integer(obj, "n_tau", path, default=64),
            tau_truncation_factor=_number(obj, "tau_truncation_factor", path,
                                          default=10.0),
            quadrature_kind=kind,
        )
    except ScenarioError:
        raise
    except (DomainError, ValueError) as exc:
        raise ScenarioError(path, str(exc)) from exc


def _parse_mcpt_config(obj):
    if obj is None:
        return McptConfig(n_photons=1_000_000)
    obj = _require_mapping(obj, "models.mcpt")
    _reject_unknown(obj, _MCPT_KEYS, "models.mcpt")
    path = "models.mcpt"
    try:
        return McptConfig(
            n_photons=_integer(obj, "n_photons", path, default=1_000_000),
            survival_threshold=_number(obj, "survival_threshold", path,
                                       default=1e-10),
            collision_order=_integer(obj, "collision_order", path, default=1),
            rng_seed=_integer(obj, "rng_seed", path, default=0),
            enable_reflection=_flag(obj, "enable_reflection", path, True),
            tau_truncation_factor=_number(obj, "tau_truncation_factor", path,
                                          default=10.0),
        )
    except ScenarioError:
        raise
    except (DomainError, ValueError) as exc:
        raise ScenarioError(path, str(exc)) from exc


_SWEEP_KEYS_ALLOWED = ("variable", "values", "models")


def _parse_sweep(obj):
    if obj is None:
        return None
    obj = _require_mapping(obj, "sweep")
    _reject_unknown(obj, _SWEEP_KEYS_ALLOWED, "sweep")
    variable = obj.get("variable")
    if variable not in SWEEP_VARIABLES:
        raise ScenarioError(
            "sweep.variable",
            f"expected one of {', '.join(SWEEP_VARIABLES)}, got {variable!r}")
    values = obj.get("values")
    if not isinstance(values, list) or not values:
        raise ScenarioError("sweep.values", "expected a non-empty array")
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) \
                or not math.isfinite(v):
            raise ScenarioError(f"sweep.values[{i}]",
                                f"expected a finite number, got {v!r}")
        out.append(float(v))
    models = obj.get("models")
    if not isinstance(models, list) or not models:
        raise ScenarioError("sweep.models", "expected a non-empty array")
    canon = tuple(canonical_model_name(m) for m in models)
    return SweepSpec(variable=variable, values=tuple(out), models=canon)


_TOP_KEYS = ("geometry", "obstacle", "atmosphere", "reflection",
             "source_energy_j", "models", "sweep")


def parse_scenario(raw):
    """Parse and validate a scenario dictionary.

    Returns a :class:`Scenario` holding both the resolved objects and the
    untouched input dictionary.  Raises :class:`ScenarioError` on any
    validation failure.
    """
    raw = _require_mapping(raw, "")
    _reject_unknown(raw, _TOP_KEYS, "")
    for key in ("geometry", "atmosphere"):
        if key not in raw:
            raise ScenarioError(key, "missing required section")
    geometry = _parse_geometry(raw["geometry"])
    obstacle = _parse_obstacle(raw.get("obstacle"), geometry.range_r)
    atmosphere = _parse_atmosphere(raw["atmosphere"])
    reflection = _parse_reflection(raw.get("reflection"))
    source_energy = _number(raw, "source_energy_j", "", default=1.0)
    if source_energy <= 0.0:
        raise ScenarioError("source_energy_j",
                            f"must be positive, got {source_energy!r}")

    models = raw.get("models")
    if models is None:
        models = {}
    models = _require_mapping(models, "models")
    _reject_unknown(models, _MODELS_KEYS, "models")
    scatter_config = _parse_scatter_config(models.get("scatter_grid"))
    beta_fraction = _number(models, "sampling_beta_fraction", "models",
                            default=0.02)
    if not 0.0 < beta_fraction < 1.0:
        raise ScenarioError("models.sampling_beta_fraction",
                            f"must lie in (0, 1), got {beta_fraction!r}")
    legendre_u = _integer(models, "legendre_u", "models", default=30)
    if legendre_u < 1:
        raise ScenarioError("models.legendre_u",
                            f"must be a positive integer, got {legendre_u!r}")
    mcpt_config = _parse_mcpt_config(models.get("mcpt"))
    sweep = _parse_sweep(raw.get("sweep"))

    return Scenario(
        geometry=geometry,
        obstacle=obstacle,
        atmosphere=atmosphere,
        reflection=reflection,
        source_energy=source_energy,
        scatter_config=scatter_config,
        sampling_beta_fraction=beta_fraction,
        legendre_u=legendre_u,
        mcpt_config=mcpt_config,
        sweep=sweep,
        raw=copy.deepcopy(raw),
    )


def load_scenario(path):
    """Read and parse a scenario file.

    I/O failures propagate as OSError; malformed JSON and validation
    failures become ScenarioError.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("", f"invalid JSON: {exc}") from exc
    return parse_scenario(raw)


def serialize_scenario(scenario):
    """Return the scenario as a JSON-ready dictionary.

    Emits the preserved raw dictionary, so couplings like times_range
    survive a round trip unresolved.
    """
    return copy.deepcopy(scenario.raw)


def apply_sweep_value(raw, variable, value):
    """Return a copy of a raw scenario dict with one swept field replaced.

    Coupled obstacle fields re-resolve against the new value on the next
    parse; assigning to x_o overwrites any coupling with a plain number.
    """
    if variable not in _SWEEP_KEYS:
        raise ScenarioError(
            "sweep.variable",
            f"expected one of {', '.join(SWEEP_VARIABLES)}, got {variable!r}")
    section, key = _SWEEP_KEYS[variable]
    out = copy.deepcopy(raw)
    if section == "obstacle" and not isinstance(out.get("obstacle"), dict):
        raise ScenarioError(
            "sweep.variable",
            f"{variable!r} requires the scenario to define an obstacle")
    block = out.setdefault(section, {})
    block[key] = float(value)
    return out
