"""Single-scatter received-energy integral over the beam / field-of-view
overlap volume, with optional obstacle shadowing.

The integral runs in beam-frame coordinates (vartheta, varpi, tau).  The
volume element contributes tau^2 * cos(varpi); the tau^2 cancels against
the inverse square in the collected-energy kernel, so the integrand is
evaluated in that reduced form throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .atmosphere import phase_function
from .geometry import DomainError
from .quadrature import legendre_rule, midpoint_rule

_EPS_FLOOR = 1e-12
_MAX_BLOCK_VALUES = 1 << 21


@dataclass(frozen=True)
class ScatterIntegralConfig:
    """Resolution knobs for the overlap integral.

    n_theta, n_varpi, n_tau are the node counts per axis (>= 8 each);
    tau_truncation_factor (>= 2) bounds half-infinite in-view intervals at
    anchor*factor; quadrature_kind is "gauss" or "midpoint".
    """

    n_theta: int = 64
    n_varpi: int = 64
    n_tau: int = 64
    tau_truncation_factor: float = 10.0
    quadrature_kind: str = "gauss"

    def __post_init__(self):
        for name in ("n_theta", "n_varpi", "n_tau"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 8):
                raise DomainError(f"{name} must be an integer >= 8, got {v!r}")
        if not self.tau_truncation_factor >= 2.0:
            raise DomainError(
                "tau_truncation_factor must be >= 2, got "
                f"{self.tau_truncation_factor!r}")
        if self.quadrature_kind not in ("gauss", "midpoint"):
            raise DomainError(
                f"quadrature_kind must be 'gauss' or 'midpoint', got "
                f"{self.quadrature_kind!r}")

    def _rule(self, n):
        if self.quadrature_kind == "gauss":
            return legendre_rule(n)
        return midpoint_rule(n)


@dataclass(frozen=True)
class ScatterResult:
    """Outcome of the overlap integral."""

    q_r_sca: float
    pathloss_db: float
    resolution_used: tuple
    richardson_error_estimate: float
    empty_overlap: bool = False


def _pathloss_db(q_t, q_r):
    if q_r <= 0.0:
        return math.inf
    return 10.0 * math.log10(q_t / q_r)


def kernel_K(geom, atm, point, q_t):
    """Reduced scatter integrand at one beam-frame point.

    Value is the energy density with respect to d(vartheta) d(varpi) d(tau),
    the tau^2 of the volume element already cancelled against the collection
    inverse square.  Raises DomainError when the point coincides with the
    receiver.
    """
    p = point.position
    rel = p - geom.rx_position
    eps = float(np.linalg.norm(rel))
    if eps <= _EPS_FLOOR:
        raise DomainError("scatter point coincides with the receiver")
    if point.tau <= 0.0:
        raise DomainError("scatter point sits on the transmitter apex")
    d = p / point.tau
    cos_view = float(rel @ geom.rx_axis) / eps
    mu = float(d @ (-rel)) / eps
    ks_m, ke_m = atm.per_meter()
    ph = float(phase_function(atm, mu))
    omega = 2.0 * math.pi * (1.0 - math.cos(geom.beta_t))
    return (q_t * max(cos_view, 0.0) * ph
            * math.exp(-ke_m * (point.tau + eps))
            * geom.aperture_area * ks_m * math.cos(point.varpi)
            / (omega * eps * eps))


def weighting_factor(geom, obstacle, point):
    """0/1 visibility of one scatter point: inside the receiver cone and
    with both legs (T to P, P to R) clear of the obstacle."""
    p = point.position
    rel = p - geom.rx_position
    eps = float(np.linalg.norm(rel))
    dot = float(rel @ geom.rx_axis)
    if dot < 0.0 or dot < eps * math.cos(geom.beta_r):
        return 0.0
    if obstacle is not None:
        if geo.segment_occluded(np.zeros(3), p, obstacle):
            return 0.0
        if geo.segment_occluded(p, geom.rx_position, obstacle):
            return 0.0
    return 1.0


def _scatter_sum(geom, obstacle, atm, q_t, n_theta, n_varpi, n_tau, config):
    """Fixed-resolution tensor quadrature of the overlap integral.

    Returns (q_r, any_valid_ray).  Summation is per vartheta row with a
    final fsum, so the result does not depend on internal blocking.
    """
    rule_t = config._rule(n_theta)
    rule_w = config._rule(n_varpi)
    rule_tau = config._rule(n_tau)
    bt = geom.beta_t
    vt, w_t = rule_t.mapped(-bt, bt)
    wmax = geo.varpi_max(bt, vt)

    ks_m, ke_m = atm.per_meter()
    omega = 2.0 * math.pi * (1.0 - math.cos(bt))
    base = q_t * geom.aperture_area * ks_m / omega
    rx_pos = geom.rx_position
    rx_axis = geom.rx_axis

    rows_per_block = max(1, _MAX_BLOCK_VALUES // max(1, n_varpi * n_tau))
    partials = []
    any_valid = False
    for start in range(0, n_theta, rows_per_block):
        stop = min(start + rows_per_block, n_theta)
        vt_b = vt[start:stop]
        wm_b = wmax[start:stop]
        vp = wm_b[:, None] * rule_w.nodes[None, :]
        w_w = wm_b[:, None] * rule_w.weights[None, :]
        dirs = geo.beam_direction(geom, vt_b[:, None], vp)
        lo, hi, valid, unbounded = geo._classified_intervals(geom, dirs)
        anchor = np.where(lo > 0.0, lo, geom.range_r)
        hi = np.where(unbounded, anchor * config.tau_truncation_factor, hi)
        valid = valid & (hi > lo)
        any_valid = any_valid or bool(valid.any())
        lo_s = np.where(valid, lo, 0.0)
        hi_s = np.where(valid, hi, 1.0)
        tau, w_tau = rule_tau.mapped(lo_s, hi_s)
        pts = tau[..., None] * dirs[:, :, None, :]
        rel = pts - rx_pos
        eps = np.sqrt(np.einsum("...i,...i->...", rel, rel))
        eps = np.maximum(eps, _EPS_FLOOR)
        mu = -np.einsum("...i,...i->...", dirs[:, :, None, :], rel) / eps
        cos_view = (rel @ rx_axis) / eps
        integ = (base * np.maximum(cos_view, 0.0) * phase_function(atm, mu)
                 * np.exp(-ke_m * (tau + eps)) * np.cos(vp)[..., None]
                 / (eps * eps))
        keep = valid[..., None]
        if obstacle is not None:
            occ_t = geo._segments_occluded(np.zeros(3), pts, obstacle)
            occ_r = geo._segments_occluded(pts, rx_pos, obstacle)
            keep = keep & ~occ_t & ~occ_r
        contrib = np.where(keep, integ * w_tau, 0.0)
        row = np.sum(np.sum(contrib, axis=2) * w_w, axis=1) * w_t[start:stop]
        partials.extend(row.tolist())
    return math.fsum(partials), any_valid


def integrate_scattering(geom, obstacle, atm, q_t, config=None):
    """Single-scatter received energy and path loss.

    Parameters
    ----------
    geom : TransceiverGeometry
    obstacle : Obstacle or None
    atm : Atmosphere
    q_t : float
        Emitted pulse energy.
    config : ScatterIntegralConfig, optional

    Returns
    -------
    ScatterResult
        With q_r_sca = 0 and pathloss_db = +inf when the beam and the
        field of view do not overlap at this resolution.
    """
    if config is None:
        config = ScatterIntegralConfig()
    if not q_t > 0.0:
        raise DomainError(f"q_t must be positive, got {q_t!r}")
    res = (config.n_theta, config.n_varpi, config.n_tau)
    q_full, seen = _scatter_sum(geom, obstacle, atm, q_t, *res, config)
    if not seen:
        return ScatterResult(q_r_sca=0.0, pathloss_db=math.inf,
                             resolution_used=res,
                             richardson_error_estimate=0.0,
                             empty_overlap=True)
    half = tuple(max(8, n // 2) for n in res)
    q_half, _ = _scatter_sum(geom, obstacle, atm, q_t, *half, config)
    loss = _pathloss_db(q_t, q_full)
    loss_half = _pathloss_db(q_t, q_half)
    est = abs(loss - loss_half) if math.isfinite(loss_half) else math.inf
    return ScatterResult(q_r_sca=q_full, pathloss_db=loss,
                         resolution_used=res,
                         richardson_error_estimate=est,
                         empty_overlap=False)
