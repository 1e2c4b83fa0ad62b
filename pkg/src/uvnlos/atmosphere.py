"""Scattering medium description: extinction coefficients and the mixed
molecular/aerosol phase function.

Coefficients are stored per kilometer (the customary tabulated unit);
integration code converts once at the boundary via per_meter().
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import DomainError


@dataclass(frozen=True)
class Atmosphere:
    """Homogeneous atmosphere for a UV link.

    ks_ray, ks_mie, ka : float
        Molecular scattering, aerosol scattering and absorption
        coefficients, km^-1.
    gamma : float
        Molecular anisotropy parameter.
    g : float
        Aerosol asymmetry factor, |g| < 1.
    f : float
        Aerosol backscatter fraction parameter.
    """

    ks_ray: float
    ks_mie: float
    ka: float
    gamma: float
    g: float
    f: float

    def __post_init__(self):
        for name in ("ks_ray", "ks_mie", "ka"):
            if getattr(self, name) < 0.0:
                raise DomainError(
                    f"{name} must be nonnegative, got {getattr(self, name)!r}")
        if not abs(self.g) < 1.0:
            raise DomainError(f"|g| must be below 1, got {self.g!r}")

    @property
    def k_s(self):
        return self.ks_ray + self.ks_mie

    @property
    def k_e(self):
        return self.k_s + self.ka

    def per_meter(self):
        """(k_s, k_e) converted to m^-1."""
        return self.k_s * 1e-3, self.k_e * 1e-3


def extinction(atm):
    """Total scattering and extinction coefficients (k_s, k_e), km^-1."""
    return atm.k_s, atm.k_e


def _phase_molecular(gamma, mu):
    return 3.0 * (1.0 + 3.0 * gamma + (1.0 - gamma) * mu * mu) \
        / (16.0 * math.pi * (1.0 + 2.0 * gamma))


def _phase_aerosol(g, f, mu):
    g2 = g * g
    return (1.0 - g2) / (4.0 * math.pi) * (
        (1.0 + g2 - 2.0 * g * mu) ** -1.5
        + f * (3.0 * mu * mu - 1.0) / (2.0 * (1.0 + g2) ** 1.5))


def phase_function(atm, mu):
    """Mixed scattering phase function at cos(scatter angle) mu, sr^-1.

    Weighted by the component scattering coefficients; each component and
    hence the mixture integrates to one over the sphere.
    """
    if atm.k_s <= 0.0:
        raise DomainError("phase function undefined with k_s = 0")
    mu = np.asarray(mu, dtype=float)
    w_ray = atm.ks_ray / atm.k_s
    w_mie = atm.ks_mie / atm.k_s
    out = np.zeros_like(mu)
    if w_ray > 0.0:
        out = out + w_ray * _phase_molecular(atm.gamma, mu)
    if w_mie > 0.0:
        out = out + w_mie * _phase_aerosol(atm.g, atm.f, mu)
    return out
