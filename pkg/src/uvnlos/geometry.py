"""Transceiver and obstacle geometry for short-range NLoS ultraviolet links.

Frame convention: the transmitter T sits at the origin, the receiver R at
(0, range_r, 0), Z points up. All lengths are meters, all angles radians.
The transmitter beam is a solid cone of half-angle beta_t around an axis at
elevation theta_t and azimuth alpha_t; the receiver field of view is a cone
of half-angle beta_r around an axis at elevation theta_r and azimuth alpha_r.
The obstacle is an upright cuboid standing on the ground plane z = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """An input lies outside the model's admissible domain."""


class UnclassifiableError(ValueError):
    """A pose fits none of the recognized ordering patterns."""

    def __init__(self, message, thetas=None):
        super().__init__(message)
        self.thetas = thetas


class NoIntersectionError(ValueError):
    """A requested plane/edge intersection does not exist on the edge."""


_TIE_TOL = 1e-12


# ---------------------------------------------------------------------------
# transceiver pose


@dataclass(frozen=True)
class TransceiverGeometry:
    """Pointing and aperture description of one transmitter/receiver pair.

    Parameters
    ----------
    beta_t, beta_r : float
        Cone half-angles of the beam and the field of view, rad.
    theta_t, theta_r : float
        Elevation angles of the two axes above the ground plane, rad.
    alpha_t, alpha_r : float
        Azimuths of the two axes, rad.  With strict pointing the
        transmitter azimuth lies in [pi/2, pi) and the receiver azimuth in
        (-pi, -pi/2], which places both axes on the same side of the
        baseline.
    range_r : float
        Baseline length T -> R, m.
    aperture_area : float
        Receiver aperture area, m^2.
    strict_pointing : bool
        When True (default) the lower beam/FoV edge must stay above the
        horizontal (theta - beta > 0) and the azimuth windows are enforced.
        When False only the parametrization limits are kept.
    """

    beta_t: float
    beta_r: float
    theta_t: float
    theta_r: float
    alpha_t: float
    alpha_r: float
    range_r: float
    aperture_area: float
    strict_pointing: bool = True

    def __post_init__(self):
        for name in ("beta_t", "beta_r", "theta_t", "theta_r"):
            v = getattr(self, name)
            if not 0.0 < v < math.pi / 2:
                raise DomainError(f"{name} must lie in (0, pi/2), got {v!r}")
        if not self.range_r > 0.0:
            raise DomainError(f"range_r must be positive, got {self.range_r!r}")
        if not self.aperture_area > 0.0:
            raise DomainError(
                f"aperture_area must be positive, got {self.aperture_area!r}")
        # upper cone edges must stay below the zenith for the beam-frame
        # parametrization to be single valued
        if not self.delta_t_high < math.pi / 2:
            raise DomainError(
                "theta_t + beta_t must stay below pi/2 "
                f"(delta_t_high = {self.delta_t_high:.6f})")
        if not self.delta_r_high < math.pi / 2:
            raise DomainError(
                "theta_r + beta_r must stay below pi/2 "
                f"(delta_r_high = {self.delta_r_high:.6f})")
        if self.strict_pointing:
            if not self.delta_t_low > 0.0:
                raise DomainError(
                    "theta_t - beta_t must be positive "
                    f"(delta_t_low = {self.delta_t_low:.6f})")
            if not self.delta_r_low > 0.0:
                raise DomainError(
                    "theta_r - beta_r must be positive "
                    f"(delta_r_low = {self.delta_r_low:.6f})")
            if not math.pi / 2 <= self.alpha_t < math.pi:
                raise DomainError(
                    f"alpha_t must lie in [pi/2, pi), got {self.alpha_t!r}")
            if not -math.pi < self.alpha_r <= -math.pi / 2:
                raise DomainError(
                    f"alpha_r must lie in (-pi, -pi/2], got {self.alpha_r!r}")

    # derived quantities -----------------------------------------------------

    @property
    def delta_t_low(self):
        return self.theta_t - self.beta_t

    @property
    def delta_t_high(self):
        return self.theta_t + self.beta_t

    @property
    def delta_r_low(self):
        return self.theta_r - self.beta_r

    @property
    def delta_r_high(self):
        return self.theta_r + self.beta_r

    @property
    def tx_axis(self):
        ct = math.cos(self.theta_t)
        return np.array([ct * math.cos(self.alpha_t),
                         ct * math.sin(self.alpha_t),
                         math.sin(self.theta_t)])

    @property
    def rx_axis(self):
        cr = math.cos(self.theta_r)
        return np.array([cr * math.cos(self.alpha_r),
                         cr * math.sin(self.alpha_r),
                         math.sin(self.theta_r)])

    @property
    def rx_position(self):
        return np.array([0.0, self.range_r, 0.0])


# ---------------------------------------------------------------------------
# obstacle


@dataclass(frozen=True)
class Obstacle:
    """Upright cuboid obstacle standing on the ground plane.

    w is the footprint extent along the local cross axis, s the extent along
    the local depth axis (w > s > 0), kappa the height, (x_o, y_o) the
    footprint center, alpha the footprint rotation about the vertical
    (|alpha| <= alpha_th = atan(s/w)).
    """

    w: float
    s: float
    kappa: float
    x_o: float
    y_o: float
    alpha: float

    def __post_init__(self):
        if not self.w > self.s > 0.0:
            raise DomainError(
                f"need w > s > 0, got w={self.w!r}, s={self.s!r}")
        if not self.kappa > 0.0:
            raise DomainError(f"kappa must be positive, got {self.kappa!r}")
        if abs(self.alpha) > self.alpha_th + _TIE_TOL:
            raise DomainError(
                f"|alpha| must not exceed atan(s/w) = {self.alpha_th:.6f}, "
                f"got {self.alpha!r}")

    @property
    def half_diagonal(self):
        return 0.5 * math.hypot(self.w, self.s)

    @property
    def alpha_th(self):
        return math.atan2(self.s, self.w)

    @property
    def x_o_max(self):
        return -self.half_diagonal * math.sin(self.alpha_th + abs(self.alpha))

    @property
    def y_o_min(self):
        return self.half_diagonal * math.sin(
            math.pi / 2 - self.alpha_th + abs(self.alpha))

    @property
    def center(self):
        return np.array([self.x_o, self.y_o, 0.5 * self.kappa])

    @property
    def axis_u(self):
        # local depth axis, half extent s/2
        return np.array([math.cos(self.alpha), math.sin(self.alpha), 0.0])

    @property
    def axis_v(self):
        # local cross axis, half extent w/2
        return np.array([-math.sin(self.alpha), math.cos(self.alpha), 0.0])

    @property
    def half_extents(self):
        return np.array([0.5 * self.s, 0.5 * self.w, 0.5 * self.kappa])

    @property
    def vertices_top(self):
        """Roof corners in label order A, B, C, D, shape (4, 3)."""
        rp = self.half_diagonal
        ath = self.alpha_th
        al = self.alpha
        pts = np.array([
            [-rp * math.sin(al + ath), rp * math.cos(al + ath)],
            [-rp * math.sin(-al + ath), -rp * math.cos(-al + ath)],
            [rp * math.sin(al + ath), -rp * math.cos(al + ath)],
            [rp * math.sin(-al + ath), rp * math.cos(-al + ath)],
        ])
        pts = pts + np.array([self.x_o, self.y_o])
        out = np.empty((4, 3))
        out[:, :2] = pts
        out[:, 2] = self.kappa
        return out

    @property
    def vertices_ground(self):
        out = self.vertices_top.copy()
        out[:, 2] = 0.0
        return out

    def contains(self, point, pad=0.0):
        """True when the point lies inside the (closed) box, padded by pad."""
        rel = np.asarray(point, dtype=float) - self.center
        h = self.half_extents + pad
        for ax, hx in zip((self.axis_u, self.axis_v, np.array([0., 0., 1.])), h):
            if abs(float(rel @ ax)) > hx:
                return False
        return True


def obstacle_vertices(w, s, kappa, x_o, y_o, alpha,
                      range_r=None, enforce_pose_bounds=True):
    """Build an Obstacle, checking the admissible-pose bounds.

    The pose bounds keep the cuboid strictly on the negative-x side of the
    baseline and strictly between the terminals: x_o < x_o_max and
    y_o_min < y_o (< range_r - y_o_min when range_r is given).  Pass
    enforce_pose_bounds=False to accept any pose that does not contain a
    terminal, e.g. oversized calibration walls.

    Returns
    -------
    Obstacle
    """
    obs = Obstacle(w=w, s=s, kappa=kappa, x_o=x_o, y_o=y_o, alpha=alpha)
    if enforce_pose_bounds:
        if not x_o < obs.x_o_max:
            raise DomainError(
                f"x_o must be below x_o_max = {obs.x_o_max:.6f}, got {x_o!r}")
        if not y_o > obs.y_o_min:
            raise DomainError(
                f"y_o must exceed y_o_min = {obs.y_o_min:.6f}, got {y_o!r}")
        if range_r is not None and not y_o < range_r - obs.y_o_min:
            raise DomainError(
                f"y_o must stay below range_r - y_o_min = "
                f"{range_r - obs.y_o_min:.6f}, got {y_o!r}")
    if obs.contains((0.0, 0.0, 0.0)):
        raise DomainError("obstacle contains the transmitter")
    if range_r is not None and obs.contains((0.0, range_r, 0.0)):
        raise DomainError("obstacle contains the receiver")
    return obs


# ---------------------------------------------------------------------------
# beam-frame parametrization


def varpi_max(beta_t, vartheta):
    """Half-width of the in-plane angle at plane angle vartheta."""
    vartheta = np.asarray(vartheta, dtype=float)
    rad = np.tan(beta_t) ** 2 - np.tan(vartheta) ** 2
    return np.arctan(np.cos(vartheta) * np.sqrt(np.maximum(rad, 0.0)))


def beam_direction(geom, vartheta, varpi):
    """Unit direction of the beam ray with plane angle vartheta and
    in-plane angle varpi.  Broadcasts over array inputs."""
    vartheta = np.asarray(vartheta, dtype=float)
    varpi = np.asarray(varpi, dtype=float)
    delta = geom.theta_t + vartheta
    cd = np.cos(delta)
    phi = np.arctan(np.tan(varpi) / cd)
    cw = np.cos(varpi)
    az = geom.alpha_t + phi
    base = cw * cd / np.cos(phi)
    return np.stack([base * np.cos(az), base * np.sin(az), cw * np.sin(delta)],
                    axis=-1)


def scatter_point(geom, tau, varpi, vartheta):
    """Scatter point at distance tau along the (vartheta, varpi) beam ray."""
    d = beam_direction(geom, vartheta, varpi)
    return ScatterPoint(tau=float(tau), varpi=float(varpi),
                        vartheta=float(vartheta),
                        position=float(tau) * d)


@dataclass(frozen=True)
class ScatterPoint:
    tau: float
    varpi: float
    vartheta: float
    position: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.tau >= 0.0:
            raise DomainError(f"tau must be nonnegative, got {self.tau!r}")


def beam_coordinates(geom, position):
    """Invert beam_direction: cartesian point -> (tau, varpi, vartheta)."""
    p = np.asarray(position, dtype=float)
    tau = float(np.linalg.norm(p))
    if tau == 0.0:
        raise DomainError("cannot assign beam coordinates to the apex")
    ca, sa = math.cos(geom.alpha_t), math.sin(geom.alpha_t)
    along = p[0] * ca + p[1] * sa
    delta = math.atan2(p[2], along)
    vartheta = delta - geom.theta_t
    f_dir = np.array([math.cos(delta) * ca, math.cos(delta) * sa,
                      math.sin(delta)])
    c = min(1.0, max(-1.0, float(p @ f_dir) / tau))
    lateral = p[1] * ca - p[0] * sa
    varpi = math.copysign(math.acos(c), lateral) if lateral != 0.0 \
        else math.acos(c)
    return tau, varpi, vartheta


def jacobian_j3(tau, varpi):
    """Volume element magnitude of the beam-frame map, tau^2 * cos(varpi)."""
    return np.asarray(tau, dtype=float) ** 2 * np.cos(varpi)


# ---------------------------------------------------------------------------
# swept planes through the two axes


def tx_plane_coefficients(geom, vartheta):
    """Coefficients (a, b, c) of the transmitter-side swept plane
    a*x + b*y + c*z = 0 at plane angle vartheta in (-beta_t, beta_t)."""
    rad = math.tan(geom.beta_t) ** 2 - math.tan(vartheta) ** 2
    if rad <= 0.0:
        raise DomainError(
            f"vartheta must lie strictly inside (-beta_t, beta_t), "
            f"got {vartheta!r}")
    delta = geom.theta_t + vartheta
    cv = math.cos(vartheta)
    phi_t = math.atan(math.sqrt(rad) * cv / math.cos(delta))
    tf = math.tan(phi_t)
    sec2 = 1.0 / cv ** 2
    a = -math.cos(geom.alpha_t) * sec2 * math.sin(2.0 * delta) * tf
    b = -math.sin(geom.alpha_t) * sec2 * math.sin(2.0 * delta) * tf
    c = 2.0 * sec2 * math.cos(delta) ** 2 * tf
    return a, b, c


def rx_plane_coefficients(geom, sigma):
    """Coefficients (a, b, c) of the receiver-side swept plane
    a*x + b*(y - range_r) + c*z = 0 at plane angle sigma."""
    rad = math.tan(geom.beta_r) ** 2 - math.tan(sigma) ** 2
    if rad <= 0.0:
        raise DomainError(
            f"sigma must lie strictly inside (-beta_r, beta_r), got {sigma!r}")
    delta = geom.theta_r + sigma
    cs = math.cos(sigma)
    phi_r = math.atan(math.sqrt(rad) * cs / math.cos(delta))
    tf = math.tan(phi_r)
    sec2 = 1.0 / cs ** 2
    a = -math.cos(geom.alpha_r) * sec2 * math.sin(2.0 * delta) * tf
    b = -math.sin(geom.alpha_r) * sec2 * math.sin(2.0 * delta) * tf
    c = 2.0 * sec2 * math.cos(delta) ** 2 * tf
    return a, b, c


def _psi_about(origin, plane_b, plane_c, point, sense=1.0):
    """In-plane angle at origin between the swept plane's reference ray and
    the direction to point.  The reference ray is the plane's trace in the
    baseline plane x = 0; sense=+1 orients it toward +y (transmitter side),
    sense=-1 toward -y (receiver side)."""
    p = np.asarray(point, dtype=float) - origin
    num = sense * (p[1] * plane_c - p[2] * plane_b)
    den = math.hypot(plane_b, plane_c) * float(np.linalg.norm(p))
    if den == 0.0:
        raise DomainError("undefined in-plane angle at the apex")
    return math.acos(min(1.0, max(-1.0, num / den)))


def psi_angle_tx(geom, vartheta, edge):
    """In-plane angle of the transmitter plane's crossing of one obstacle
    edge.

    Parameters
    ----------
    geom : TransceiverGeometry
    vartheta : float
        Plane angle in (-beta_t, beta_t).
    edge : tuple of two 3-vectors
        Edge endpoints; a vertical edge has equal (x, y), a roof edge has
        equal z.

    Returns
    -------
    float
        Angle between the plane's horizontal trace through T and the
        crossing point, rad.

    Raises
    ------
    NoIntersectionError
        When the plane misses the finite edge.
    """
    a, b, c = tx_plane_coefficients(geom, vartheta)
    p = _plane_edge_point(a, b, c, 0.0, edge)
    return _psi_about(np.zeros(3), b, c, p)


def psi_angle_rx(geom, sigma, edge):
    """Receiver-side twin of psi_angle_tx, about R with plane angle sigma."""
    a, b, c = rx_plane_coefficients(geom, sigma)
    p = _plane_edge_point(a, b, c, geom.range_r, edge)
    return _psi_about(np.array([0.0, geom.range_r, 0.0]), b, c, p, sense=-1.0)


def _plane_edge_point(a, b, c, y_shift, edge):
    """Intersection of the plane a*x + b*(y - y_shift) + c*z = 0 with a
    finite box edge.  Vertical and roof edges get the closed-form branches;
    anything else falls back to generic line-plane intersection."""
    p0 = np.asarray(edge[0], dtype=float)
    p1 = np.asarray(edge[1], dtype=float)
    tol = 1e-9 * (1.0 + float(np.linalg.norm(p1 - p0)))
    if abs(p0[0] - p1[0]) <= tol and abs(p0[1] - p1[1]) <= tol:
        # vertical edge: solve for z on the line x = x0, y = y0
        if c == 0.0:
            raise NoIntersectionError("plane is vertical, edge is vertical")
        z = -(a * p0[0] + b * (p0[1] - y_shift)) / c
        z_lo, z_hi = sorted((p0[2], p1[2]))
        if not z_lo - tol <= z <= z_hi + tol:
            raise NoIntersectionError(
                f"plane crosses the vertical edge at z = {z:.6f}, outside "
                f"[{z_lo:.6f}, {z_hi:.6f}]")
        return np.array([p0[0], p0[1], z])
    if abs(p0[2] - p1[2]) <= tol:
        # roof edge at constant z
        zc = p0[2]
        xm, ym = p1[0], p1[1]
        xn, yn = p0[0], p0[1]
        rhs = -c * zc + b * y_shift
        if abs(xm - xn) <= tol:
            if b == 0.0:
                raise NoIntersectionError("plane parallel to the roof edge")
            x = xn
            y = (rhs - a * xn) / b
        elif abs(ym - yn) <= tol:
            if a == 0.0:
                raise NoIntersectionError("plane parallel to the roof edge")
            y = yn
            x = (rhs - b * yn) / a
        else:
            slope = (ym - yn) / (xm - xn)
            den = a + slope * b
            if den == 0.0:
                raise NoIntersectionError("plane parallel to the roof edge")
            y = (yn * a + slope * (rhs - a * xn)) / den
            x = (y - yn) / slope + xn
        t_axis = 0 if abs(xm - xn) > tol else 1
        lo, hi = sorted((p0[t_axis], p1[t_axis]))
        val = (x, y)[t_axis]
        if not lo - tol <= val <= hi + tol:
            raise NoIntersectionError(
                "plane crosses the roof line outside the finite edge")
        return np.array([x, y, zc])
    raise NoIntersectionError("edge must be vertical or lie in a roof plane")


# ---------------------------------------------------------------------------
# vertex elevation orders and scenario labels


def _vertex_elevations(obstacle, foot_x, foot_y, axis_azimuth):
    """Elevation of each roof corner's swept plane seen from a terminal
    whose axis has the given azimuth and whose foot is at (foot_x, foot_y).

    Equals atan(kappa / d) where d is the corner's horizontal distance to
    the axis's ground trace through the foot."""
    tops = obstacle.vertices_top
    ca, sa = math.cos(axis_azimuth), math.sin(axis_azimuth)
    den = np.abs((tops[:, 0] - foot_x) * ca + (tops[:, 1] - foot_y) * sa)
    return np.arctan2(obstacle.kappa, den)


def tx_vertex_elevations(geom, obstacle):
    return _vertex_elevations(obstacle, 0.0, 0.0, geom.alpha_t)


def rx_vertex_elevations(geom, obstacle):
    return _vertex_elevations(obstacle, 0.0, geom.range_r, geom.alpha_r)


def _eq(x, y):
    return abs(x - y) <= _TIE_TOL


def _gt(x, y):
    return x - y > _TIE_TOL


def _ge(x, y):
    return x - y > -_TIE_TOL


def classify_tx_scenario(geom, obstacle):
    """Label the transmitter-side pose by the ordering of the four roof
    corner elevations.  Raises UnclassifiableError when no pattern fits."""
    ta, tb, tc, td = tx_vertex_elevations(geom, obstacle)
    if _eq(tc, td) and _eq(ta, tb) and _gt(tc, tb):
        return "T3"
    if _eq(tb, tc) and _eq(ta, td) and _gt(tb, ta):
        return "T5"
    if _gt(tc, tb) and _gt(tb, td) and _gt(td, ta):
        return "T1"
    if _gt(tc, td) and _ge(td, tb) and _gt(tb, ta):
        return "T2"
    if _gt(tb, tc) and _gt(tc, ta) and _gt(ta, td):
        return "T4"
    if _gt(td, tc) and _gt(tc, ta) and _gt(ta, tb):
        return "T6"
    raise UnclassifiableError(
        "transmitter-side corner elevations fit no recognized ordering: "
        f"a={ta:.12f}, b={tb:.12f}, c={tc:.12f}, d={td:.12f}",
        thetas=(ta, tb, tc, td))


def classify_rx_scenario(geom, obstacle):
    """Receiver-side twin of classify_tx_scenario."""
    ta, tb, tc, td = rx_vertex_elevations(geom, obstacle)
    if _eq(td, tc) and _eq(ta, tb) and _gt(td, ta):
        return "R3"
    if _eq(ta, td) and _eq(tb, tc) and _gt(ta, tb):
        return "R5"
    if _gt(td, ta) and _gt(ta, tc) and _gt(tc, tb):
        return "R1"
    if _gt(td, tc) and _ge(tc, ta) and _gt(ta, tb):
        return "R2"
    if _gt(ta, td) and _gt(td, tb) and _gt(tb, tc):
        return "R4"
    if _gt(tc, td) and _gt(td, tb) and _gt(tb, ta):
        return "R6"
    raise UnclassifiableError(
        "receiver-side corner elevations fit no recognized ordering: "
        f"a={ta:.12f}, b={tb:.12f}, c={tc:.12f}, d={td:.12f}",
        thetas=(ta, tb, tc, td))


def psi_extrema_rx(geom, obstacle, sigma):
    """Angular span of the obstacle inside the receiver plane at angle sigma.

    Follows the four-interval ladder on delta_r = theta_r + sigma against the
    roof corner elevations (valid for the ordering where corner d tops the
    list).  Returns (psi_min, psi_max, interval_label).

    Raises
    ------
    DomainError
        When the plane passes above every corner (delta_r >= elevation of d)
        or below the lowest admissible plane.
    """
    a, b, c = rx_plane_coefficients(geom, sigma)
    delta_r = geom.theta_r + sigma
    th_a, th_b, th_c, th_d = rx_vertex_elevations(geom, obstacle)
    if delta_r >= th_d:
        raise DomainError(
            f"plane at delta_r = {delta_r:.6f} clears the obstacle "
            f"(top corner elevation {th_d:.6f})")
    tops = obstacle.vertices_top
    grounds = obstacle.vertices_ground
    origin = np.array([0.0, geom.range_r, 0.0])

    def psi_vert(i):
        return _psi_about(origin, b, c, _plane_edge_point(
            a, b, c, geom.range_r, (grounds[i], tops[i])), sense=-1.0)

    def psi_roof(i, j):
        return _psi_about(origin, b, c, _plane_edge_point(
            a, b, c, geom.range_r, (tops[i], tops[j])), sense=-1.0)

    A, B, C, D = 0, 1, 2, 3
    if delta_r <= th_b:
        lab = "below_b"
        pmin = min(psi_vert(B), psi_vert(C), psi_vert(D))
        pmax = max(psi_vert(A), psi_vert(B), psi_vert(D))
    elif delta_r <= th_c:
        lab = "b_to_c"
        pmin = min(psi_roof(B, C), psi_vert(C), psi_vert(D))
        pmax = max(psi_vert(A), psi_roof(A, B), psi_vert(D))
    elif delta_r <= th_a:
        lab = "c_to_a"
        pmin = min(psi_roof(C, D), psi_vert(D))
        pmax = max(psi_vert(A), psi_roof(A, B), psi_vert(D))
    else:
        lab = "a_to_d"
        pmin = min(psi_roof(C, D), psi_vert(D))
        pmax = max(psi_roof(A, D), psi_vert(D))
    return pmin, pmax, lab


# ---------------------------------------------------------------------------
# ray / receiver-cone intersection


@dataclass(frozen=True)
class ConeRayRoots:
    """Classified receiver-cone crossing of one beam ray.

    The quadratic in the ray parameter tau has up to two real roots; the
    integration interval is read off their sign pattern:

      kind "segment":             tau1 > 0 -> [tau1, tau2]
      kind "half_line_from_tau2": tau1 < 0 < tau2 -> [tau2, +inf)
      kind "half_line_from_tau0": degenerate linear crossing
                                  tau0 > 0 -> [tau0, +inf) (stored in tau1)
      kind "empty":               every other pattern

    This sign-pattern rule equals geometric cone membership whenever the
    transmitter lies outside the receiver cone (any strict-pointing pose);
    with relaxed pointing it stays the model's definition of the acceptance
    interval even where it differs from raw membership, so every consumer
    (full integral, sub-beam model, Monte Carlo estimator) agrees.
    """

    kind: str
    tau1: float | None = None
    tau2: float | None = None

    def bounded(self, truncation_factor, fallback_span):
        """Concrete (lo, hi) for integration, or None when empty.  Half
        lines start at the stored root and are cut at start*truncation_factor
        (fallback_span stands in for a non-positive start)."""
        if self.kind == "empty":
            return None
        if self.kind == "segment":
            return self.tau1, self.tau2
        start = self.tau1 if self.kind == "half_line_from_tau0" else self.tau2
        anchor = start if start > 0.0 else fallback_span
        return start, anchor * truncation_factor


def _cone_quadratic(geom, dirs):
    """Coefficients of the per-ray quadratic whose roots bound the in-FoV
    interval; dirs has shape (..., 3)."""
    n = geom.rx_axis
    r = geom.range_r
    cb2 = math.cos(geom.beta_r) ** 2
    dn = dirs @ n
    s1 = dn * dn - cb2
    s2 = 2.0 * r * (cb2 * dirs[..., 1] - n[1] * dn)
    s3 = r * r * (n[1] * n[1] - cb2)
    return s1, s2, s3, dn


def _cone_member(geom, dirs, t):
    """Membership of the point t*dir in the forward receiver cone."""
    n = geom.rx_axis
    r = geom.range_r
    cb2 = math.cos(geom.beta_r) ** 2
    q = t * (dirs @ n) - r * n[1]
    eps2 = t * t - 2.0 * r * t * dirs[..., 1] + r * r
    return (q >= 0.0) & (q * q >= cb2 * eps2)

def _cone_intervals(geom, dirs):
    """Vectorized geometric in-FoV intervals for unit directions from T.

    Reference implementation: the exact forward-cone membership set, merged
    to one interval per ray.  The model integrals use _classified_intervals
    instead (identical on strict-pointing poses); this one backs the test
    oracles.  Returns (lo, hi, valid); hi is +inf for half-infinite
    intervals."""
    dirs = np.asarray(dirs, dtype=float)
    s1, s2, s3, dn = _cone_quadratic(geom, dirs)
    r = geom.range_r
    shape = s1.shape

    lead_ok = np.abs(s1) > 1e-13
    disc = s2 * s2 - 4.0 * s1 * s3
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.maximum(disc, 0.0))
        # numerically stable root pair
        qq = -0.5 * (s2 + np.sign(s2) * sq)
        qq = np.where(s2 == 0.0, -0.5 * sq, qq)
        ra = np.where(lead_ok, qq / s1, np.nan)
        rb = np.where(lead_ok & (qq != 0.0), s3 / qq, np.nan)
        lin = (~lead_ok) & (np.abs(s2) > 1e-13)
        r0 = np.where(lin, -s3 / np.where(lin, s2, 1.0), np.nan)
    two = lead_ok & (disc > 0.0)
    ra = np.where(two, ra, np.where(lin, r0, np.nan))
    rb = np.where(two, rb, np.nan)
    lo_r = np.fmin(ra, rb)
    hi_r = np.fmax(ra, rb)
    # keep only positive breakpoints, compacted to (b1 <= b2)
    b1 = np.where(lo_r > 0.0, lo_r, np.where(hi_r > 0.0, hi_r, np.nan))
    b2 = np.where((lo_r > 0.0) & (hi_r > 0.0) & (hi_r > lo_r), hi_r, np.nan)

    tail_in = dn > math.cos(geom.beta_r)
    has1 = ~np.isnan(b1)
    has2 = ~np.isnan(b2)
    mid1 = np.where(has1, 0.5 * np.where(has1, b1, 1.0), r)
    m1 = _cone_member(geom, dirs, mid1)
    mid2 = np.where(has2, 0.5 * (np.where(has1, b1, 0.0)
                                 + np.where(has2, b2, 0.0)), r)
    m2 = _cone_member(geom, dirs, mid2)

    lo = np.full(shape, np.nan)
    hi = np.full(shape, np.nan)
    # no positive breakpoints: uniform membership decided by the far limit
    none_ = ~has1
    lo = np.where(none_ & tail_in, 0.0, lo)
    hi = np.where(none_ & tail_in, np.inf, hi)
    # one breakpoint b1: pieces (0, b1) and (b1, inf)
    one = has1 & ~has2
    lo = np.where(one & m1, 0.0, lo)
    hi = np.where(one & m1, np.where(one & tail_in, np.inf, b1), hi)
    lo = np.where(one & ~m1 & tail_in, b1, lo)
    hi = np.where(one & ~m1 & tail_in, np.inf, hi)
    # two breakpoints: pieces (0,b1), (b1,b2), (b2,inf); the in-cone set is
    # convex so passing pieces are consecutive
    lo = np.where(has2 & m1, 0.0, lo)
    lo = np.where(has2 & ~m1 & m2, b1, lo)
    lo = np.where(has2 & ~m1 & ~m2 & tail_in, b2, lo)
    hi = np.where(has2 & tail_in, np.inf, hi)
    hi = np.where(has2 & ~tail_in & m2, b2, hi)
    hi = np.where(has2 & ~tail_in & ~m2 & m1, b1, hi)
    valid = ~np.isnan(lo)
    return lo, hi, valid


_LEAD_TOL = 1e-13


def _classified_intervals(geom, dirs):
    """Vectorized sign-pattern intervals for unit directions from T.

    Applies the ConeRayRoots root-sign rules to every ray at once.
    Returns (lo, hi, valid, unbounded); unbounded rows carry lo only and
    must be truncated by the caller.
    """
    dirs = np.asarray(dirs, dtype=float)
    s1, s2, s3, _ = _cone_quadratic(geom, dirs)
    shape = s1.shape
    disc = s2 * s2 - 4.0 * s1 * s3
    lin = np.abs(s1) <= _LEAD_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        tau0 = np.where(lin & (np.abs(s2) > _LEAD_TOL),
                        -s3 / np.where(s2 == 0.0, 1.0, s2), np.nan)
        sq = np.sqrt(np.maximum(disc, 0.0))
        qq = -0.5 * (s2 + np.where(s2 == 0.0, 1.0, np.sign(s2)) * sq)
        den1 = np.where(lin, 1.0, s1)
        ra = qq / den1
        rb = np.where(qq != 0.0, s3 / np.where(qq == 0.0, 1.0, qq), ra)
    t1 = np.fmin(ra, rb)
    t2 = np.fmax(ra, rb)

    lo = np.zeros(shape)
    hi = np.zeros(shape)
    valid = np.zeros(shape, dtype=bool)
    unbounded = np.zeros(shape, dtype=bool)

    deg = lin & (tau0 > 0.0)
    lo = np.where(deg, tau0, lo)
    valid |= deg
    unbounded |= deg

    quad = (~lin) & (disc >= 0.0)
    far = quad & (t1 < 0.0) & (t2 > 0.0)
    lo = np.where(far, t2, lo)
    valid |= far
    unbounded |= far

    chord = quad & (t1 > 0.0)
    lo = np.where(chord, t1, lo)
    hi = np.where(chord, t2, hi)
    valid |= chord
    return lo, hi, valid, unbounded


def ray_cone_roots(geom, vartheta, varpi):
    """Classify the receiver-cone crossing of one beam ray.

    Returns the ConeRayRoots for the ray cast from T along the
    (vartheta, varpi) beam direction.
    """
    d = beam_direction(geom, float(vartheta), float(varpi))
    s1, s2, s3, _ = _cone_quadratic(geom, d)
    s1, s2, s3 = float(s1), float(s2), float(s3)
    if abs(s1) <= _LEAD_TOL:
        if abs(s2) <= _LEAD_TOL:
            return ConeRayRoots(kind="empty")
        tau0 = -s3 / s2
        if tau0 > 0.0:
            return ConeRayRoots(kind="half_line_from_tau0", tau1=tau0)
        return ConeRayRoots(kind="empty")
    disc = s2 * s2 - 4.0 * s1 * s3
    if disc < 0.0:
        return ConeRayRoots(kind="empty")
    sq = math.sqrt(disc)
    qq = -0.5 * (s2 + (sq if s2 >= 0.0 else -sq))
    if qq != 0.0:
        ra, rb = qq / s1, s3 / qq
    else:
        ra = rb = 0.0
    t1, t2 = min(ra, rb), max(ra, rb)
    if t1 > 0.0:
        return ConeRayRoots(kind="segment", tau1=t1, tau2=t2)
    if t1 < 0.0 and t2 > 0.0:
        return ConeRayRoots(kind="half_line_from_tau2", tau1=t1, tau2=t2)
    return ConeRayRoots(kind="empty")


# ---------------------------------------------------------------------------
# occlusion


_Z_AXIS = np.array([0.0, 0.0, 1.0])


def _segments_occluded(p0, p1, obstacle, shrink=1e-9):
    """Vectorized open-segment vs closed-box intersection test.

    p0, p1 broadcast to (..., 3).  The parameter window is shrunk by
    `shrink` at both ends so endpoints sitting exactly on the box surface
    do not count as blocked.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d = p1 - p0
    rel = p0 - obstacle.center
    t_enter = np.full(d.shape[:-1], -np.inf)
    t_exit = np.full(d.shape[:-1], np.inf)
    axes = (obstacle.axis_u, obstacle.axis_v, _Z_AXIS)
    for ax, h in zip(axes, obstacle.half_extents):
        po = rel @ ax
        pd = d @ ax
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-h - po) / pd
            t2 = (h - po) / pd
        lo = np.fmin(t1, t2)
        hi = np.fmax(t1, t2)
        par = pd == 0.0
        inside = np.abs(po) <= h
        lo = np.where(par, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(par, np.where(inside, np.inf, -np.inf), hi)
        t_enter = np.maximum(t_enter, lo)
        t_exit = np.minimum(t_exit, hi)
    return (t_enter <= t_exit) & (t_exit > shrink) & (t_enter < 1.0 - shrink)


def segment_occluded(p0, p1, obstacle):
    """True when the open segment p0 -> p1 meets the closed obstacle box."""
    return bool(_segments_occluded(np.asarray(p0, dtype=float),
                                   np.asarray(p1, dtype=float), obstacle))


# face codes for first-hit queries
FACE_FRONT = 0       # +depth face, corners C, D
FACE_BACK = 1        # -depth face, corners A, B
FACE_SIDE_HIGH = 2   # +cross face, corners D, A
FACE_SIDE_LOW = 3    # -cross face, corners B, C
FACE_TOP = 4
FACE_BOTTOM = 5


def _ray_box_first_hit(origins, dirs, obstacle):
    """First forward intersection of rays with the closed box.

    Returns (t_hit, face) with t_hit = +inf and face = -1 for misses.
    Origins must lie outside the box.
    """
    origins = np.asarray(origins, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    rel = origins - obstacle.center
    shape = np.broadcast_shapes(rel.shape[:-1], dirs.shape[:-1])
    t_enter = np.full(shape, -np.inf)
    t_exit = np.full(shape, np.inf)
    enter_axis = np.zeros(shape, dtype=np.int8)
    axes = (obstacle.axis_u, obstacle.axis_v, _Z_AXIS)
    pds = []
    for k, (ax, h) in enumerate(zip(axes, obstacle.half_extents)):
        po = rel @ ax
        pd = dirs @ ax
        pds.append(pd)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-h - po) / pd
            t2 = (h - po) / pd
        lo = np.fmin(t1, t2)
        hi = np.fmax(t1, t2)
        par = pd == 0.0
        inside = np.abs(po) <= h
        lo = np.where(par, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(par, np.where(inside, np.inf, -np.inf), hi)
        upd = lo > t_enter
        t_enter = np.where(upd, lo, t_enter)
        enter_axis = np.where(upd, np.int8(k), enter_axis)
        t_exit = np.minimum(t_exit, hi)
    hit = (t_enter <= t_exit) & (t_enter > 0.0) & np.isfinite(t_enter)
    t_hit = np.where(hit, t_enter, np.inf)
    # entering against the axis crosses the + boundary of that slab
    pd_at = np.choose(enter_axis, pds)
    face = np.where(pd_at < 0.0, 2 * enter_axis.astype(np.int64),
                    2 * enter_axis.astype(np.int64) + 1)
    face = np.where(hit, face, -1)
    return t_hit, face


# ---------------------------------------------------------------------------
# edge-of-cone rays


def boundary_rays(geom):
    """Origin/direction pairs of the lower beam-edge ray and the two
    in-plane FoV edge rays, as swept-plane/cone intersections."""
    sec_bt = 1.0 / math.cos(geom.beta_t)
    sec_br = 1.0 / math.cos(geom.beta_r)
    dl = geom.delta_t_low
    out = {
        "beam_lower": (np.zeros(3), sec_bt * np.array([
            math.cos(dl) * math.cos(geom.alpha_t),
            math.cos(dl) * math.sin(geom.alpha_t),
            math.sin(dl)])),
    }
    for key, dr in (("fov_lower", geom.delta_r_low),
                    ("fov_upper", geom.delta_r_high)):
        out[key] = (np.array([0.0, geom.range_r, 0.0]), sec_br * np.array([
            math.cos(dr) * math.cos(geom.alpha_r),
            math.cos(dr) * math.sin(geom.alpha_r),
            math.sin(dr)]))
    return out
