"""Obstacle-face reflection energy and the combined two-term path loss.

Up to three vertical faces of the cuboid can return energy toward the
receiver, selected by the sign of the orientation angle: the front face
always, one side face when the cuboid is rotated.  Each face is integrated
over its (y, z) footprint with the Phong reflection pattern; visibility is
a direct cone-membership plus self-occlusion test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .geometry import DomainError
from .scattering import (ScatterIntegralConfig, _pathloss_db,
                         integrate_scattering)

_EPS_FLOOR = 1e-12


@dataclass(frozen=True)
class ReflectionParams:
    """Phong surface parameters: reflection coefficient r_r, specular
    directivity m_s, diffuse fraction eta."""

    r_r: float
    m_s: float
    eta: float

    def __post_init__(self):
        if not 0.0 <= self.r_r <= 1.0:
            raise DomainError(f"r_r must lie in [0, 1], got {self.r_r!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta!r}")
        if not self.m_s >= 0.0:
            raise DomainError(f"m_s must be >= 0, got {self.m_s!r}")


@dataclass(frozen=True)
class ReflectionSurface:
    """One candidate reflecting face, parameterized over (y, z).

    The face is the vertical strip x = x_ref + slope*(y - y_ref) for
    y in [y_lo, y_hi], z in [0, z_hi].  normal is the outward unit normal
    on the transmitter side.
    """

    label: str
    normal: np.ndarray = field(repr=False)
    active: bool
    y_lo: float
    y_hi: float
    x_ref: float
    y_ref: float
    slope: float
    z_hi: float

    def x_at(self, y):
        return self.x_ref + self.slope * (np.asarray(y, dtype=float)
                                          - self.y_ref)


def _edge_surface(label, obstacle, i_from, i_to, width):
    """Face between top vertices i_from -> i_to (indices into A,B,C,D)."""
    v = obstacle.vertices_top
    x0, y0 = v[i_from, 0], v[i_from, 1]
    x1, y1 = v[i_to, 0], v[i_to, 1]
    if abs(y1 - y0) <= _EPS_FLOOR:
        raise DomainError(f"face {label} is degenerate in y")
    n = np.array([y1 - y0, x0 - x1, 0.0]) / width
    return ReflectionSurface(
        label=label, normal=n, active=True,
        y_lo=min(y0, y1), y_hi=max(y0, y1),
        x_ref=x0, y_ref=y0, slope=(x1 - x0) / (y1 - y0),
        z_hi=obstacle.kappa)


def reflection_surfaces(obstacle):
    """Candidate reflecting faces admitted by the orientation sign.

    The front face (between vertices C and D) always reflects; a rotation
    uncovers exactly one side face: D-A for negative angles, B-C for
    positive ones.
    """
    A, B, C, D = 0, 1, 2, 3
    out = []
    if abs(obstacle.alpha) <= _EPS_FLOOR:
        # untilted front face: constant x, outward normal +x
        v = obstacle.vertices_top
        out.append(ReflectionSurface(
            label="front", normal=np.array([1.0, 0.0, 0.0]), active=True,
            y_lo=float(min(v[C, 1], v[D, 1])),
            y_hi=float(max(v[C, 1], v[D, 1])),
            x_ref=float(v[C, 0]), y_ref=float(v[C, 1]), slope=0.0,
            z_hi=obstacle.kappa))
        return out
    out.append(_edge_surface("front", obstacle, C, D, obstacle.w))
    if obstacle.alpha < 0.0:
        out.append(_edge_surface("side_high", obstacle, D, A, obstacle.s))
    else:
        out.append(_edge_surface("side_low", obstacle, B, C, obstacle.s))
    return out


def phong_intensity(params, theta1, theta2):
    """Reflected intensity (per steradian) for exit angle theta1 off the
    normal and angle theta2 off the specular direction.  The specular lobe
    is clamped to zero past 90 degrees."""
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    diff = params.eta * np.cos(theta1) / math.pi
    spec_cos = np.maximum(np.cos(theta2), 0.0)
    spec = ((1.0 - params.eta) * (params.m_s + 1.0) / (2.0 * math.pi)
            * spec_cos ** params.m_s)
    out = diff + spec
    if out.ndim == 0:
        return float(out)
    return out


def reflection_weight(geom, obstacle, surface, point):
    """0/1 visibility of one surface point U: inside the transmitter beam,
    inside the receiver field of view, and with both legs clear of the rest
    of the cuboid."""
    u = np.asarray(point, dtype=float)
    tau = float(np.linalg.norm(u))
    if tau <= _EPS_FLOOR:
        return 0.0
    if float(u @ geom.tx_axis) < tau * math.cos(geom.beta_t):
        return 0.0
    rel = u - geom.rx_position
    eps = float(np.linalg.norm(rel))
    if eps <= _EPS_FLOOR:
        return 0.0
    if float(rel @ geom.rx_axis) < eps * math.cos(geom.beta_r):
        return 0.0
    if geo.segment_occluded(np.zeros(3), u, obstacle):
        return 0.0
    if geo.segment_occluded(u, geom.rx_position, obstacle):
        return 0.0
    return 1.0


def _face_sum(geom, obstacle, atm, params, q_t, surface, n_y, n_z, config):
    rule_y = config._rule(n_y)
    rule_z = config._rule(n_z)
    y, w_y = rule_y.mapped(surface.y_lo, surface.y_hi)
    z, w_z = rule_z.mapped(0.0, surface.z_hi)
    yy = y[:, None]
    zz = z[None, :]
    pts = np.stack([np.broadcast_to(surface.x_at(y)[:, None], (n_y, n_z)),
                    np.broadcast_to(yy, (n_y, n_z)),
                    np.broadcast_to(zz, (n_y, n_z))], axis=-1)
    tau = np.maximum(np.sqrt(np.einsum("...i,...i->...", pts, pts)),
                     _EPS_FLOOR)
    d_in = pts / tau[..., None]
    rel = pts - geom.rx_position
    eps = np.maximum(np.sqrt(np.einsum("...i,...i->...", rel, rel)),
                     _EPS_FLOOR)

    in_beam = (pts @ geom.tx_axis) >= tau * math.cos(geom.beta_t)
    in_fov = (rel @ geom.rx_axis) >= eps * math.cos(geom.beta_r)
    blocked_t = geo._segments_occluded(np.zeros(3), pts, obstacle)
    blocked_r = geo._segments_occluded(pts, geom.rx_position, obstacle)
    keep = in_beam & in_fov & ~blocked_t & ~blocked_r

    n = surface.normal
    cos_inc = np.maximum(-(d_in @ n), 0.0)
    to_rx = -rel / eps[..., None]
    cos1 = np.maximum(to_rx @ n, 0.0)
    mirror = d_in - 2.0 * (d_in @ n)[..., None] * n
    cos2 = np.maximum(np.einsum("...i,...i->...", mirror, to_rx), 0.0)
    intensity = (params.eta * cos1 / math.pi
                 + (1.0 - params.eta) * (params.m_s + 1.0) / (2.0 * math.pi)
                 * cos2 ** params.m_s)

    cos_view = np.maximum((rel @ geom.rx_axis) / eps, 0.0)
    _, ke_m = atm.per_meter()
    omega = 2.0 * math.pi * (1.0 - math.cos(geom.beta_t))
    z_kernel = (intensity * cos_view * cos_inc
                * np.exp(-ke_m * (tau + eps))
                / (omega * tau * tau * eps * eps))
    integrand = params.r_r * q_t * geom.aperture_area * z_kernel
    cell = np.where(keep, integrand * w_y[:, None] * w_z[None, :], 0.0)
    return math.fsum(np.sum(cell, axis=1))


def integrate_reflection(geom, obstacle, atm, params, q_t, config=None):
    """Received energy after one bounce off the admitted cuboid faces.

    The (y, z) grid reuses the config's n_theta x n_tau node counts per
    face.  Returns a plain energy (>= 0)."""
    if config is None:
        config = ScatterIntegralConfig()
    if obstacle is None or params.r_r == 0.0 or q_t == 0.0:
        return 0.0
    total = 0.0
    for surface in reflection_surfaces(obstacle):
        if not surface.active:
            continue
        total += _face_sum(geom, obstacle, atm, params, q_t, surface,
                           config.n_theta, config.n_tau, config)
    return total


@dataclass(frozen=True)
class PathLossResult:
    """Combined two-term energy budget and its path loss.

    tiled_energy is set only by the sub-beam model: the summed sub-beam
    energies used in its loss numerator."""

    q_r_sca: float
    q_r_ref: float
    q_r: float
    pathloss_db: float
    resolution_used: tuple
    richardson_error_estimate: float
    empty_overlap: bool = False
    tiled_energy: float | None = None


def total_pathloss(geom, obstacle, atm, params, q_t, config=None):
    """Scattered plus reflected received energy and the resulting loss.

    empty_overlap is set only when both terms vanish."""
    if config is None:
        config = ScatterIntegralConfig()
    sca = integrate_scattering(geom, obstacle, atm, q_t, config)
    ref = 0.0
    if obstacle is not None:
        ref = integrate_reflection(geom, obstacle, atm, params, q_t, config)
    q_r = sca.q_r_sca + ref
    return PathLossResult(
        q_r_sca=sca.q_r_sca, q_r_ref=ref, q_r=q_r,
        pathloss_db=_pathloss_db(q_t, q_r),
        resolution_used=sca.resolution_used,
        richardson_error_estimate=sca.richardson_error_estimate,
        empty_overlap=bool(sca.empty_overlap and ref <= 0.0))
