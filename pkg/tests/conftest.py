"""Shared builders for the benchmark link configurations used across tests."""

import math

from hypothesis import HealthCheck, settings

from uvnlos import Atmosphere, ReflectionParams, TransceiverGeometry, \
    obstacle_vertices

settings.register_profile(
    "suite", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("suite")

# verdict lines collected by the acceptance tests; printed after capture
# ends so they show up even for passing tests
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def bench_atmosphere():
    return Atmosphere(ks_ray=0.24, ks_mie=0.25, ka=0.90,
                      gamma=0.017, g=0.72, f=0.5)


def quasi_los_geometry(theta_deg=25.0, range_r=100.0):
    """Wide-beam pose with 30 deg half-angles; theta below beta needs the
    relaxed pointing mode."""
    th = math.radians(theta_deg)
    return TransceiverGeometry(
        beta_t=math.pi / 6, beta_r=math.pi / 6, theta_t=th, theta_r=th,
        alpha_t=19 * math.pi / 36, alpha_r=-19 * math.pi / 36,
        range_r=range_r, aperture_area=1.92e-4, strict_pointing=False)


def calibration_wall(range_r):
    """Oversized wall flanking the link, scaled with the range."""
    w = 2.0 * range_r
    s = range_r / 10.0
    rp = 0.5 * math.hypot(w, s)
    ath = math.atan2(s, w)
    x_o = -rp * math.sin(ath) - s
    return obstacle_vertices(w, s, 2.0 * range_r, x_o, range_r / 2.0, 0.0,
                             range_r=range_r, enforce_pose_bounds=False)


def tilted_pose_geometry(range_r=100.0):
    """Narrow-beam pose with 15 deg half-angles and 120 deg azimuth."""
    return TransceiverGeometry(
        beta_t=math.pi / 12, beta_r=math.pi / 12,
        theta_t=math.pi / 9, theta_r=math.pi / 9,
        alpha_t=2 * math.pi / 3, alpha_r=-2 * math.pi / 3,
        range_r=range_r, aperture_area=1.92e-4)


def tilted_block(range_r=100.0, alpha_deg=0.0):
    """Fixed-size block whose center tracks the admissible x limit."""
    w, s, kappa = 40.0, 30.0, 80.0
    alpha = math.radians(alpha_deg)
    rp = 0.5 * math.hypot(w, s)
    ath = math.atan2(s, w)
    x_o = -rp * math.sin(ath + abs(alpha)) - s
    return obstacle_vertices(w, s, kappa, x_o, range_r / 2.0, alpha,
                             range_r=range_r, enforce_pose_bounds=False)


def sweep_pose_geometry(range_r=100.0, beta_t=None, beta_r=None,
                        theta_t=None, theta_r=None):
    base = math.pi / 9
    return TransceiverGeometry(
        beta_t=base if beta_t is None else beta_t,
        beta_r=base if beta_r is None else beta_r,
        theta_t=math.pi / 4 if theta_t is None else theta_t,
        theta_r=math.pi / 4 if theta_r is None else theta_r,
        alpha_t=19 * math.pi / 36, alpha_r=-19 * math.pi / 36,
        range_r=range_r, aperture_area=1.92e-4)


def bench_reflection():
    return ReflectionParams(r_r=0.1, m_s=5.0, eta=0.5)
