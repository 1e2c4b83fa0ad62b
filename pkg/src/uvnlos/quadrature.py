"""Gauss-Legendre quadrature built from scratch on the three-term
recurrence, plus interval mapping helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import DomainError

_NEWTON_TOL = 1e-14
_NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on the reference interval [-1, 1]."""

    u: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.u < 1:
            raise DomainError(f"rule order must be >= 1, got {self.u!r}")
        if abs(float(np.sum(self.weights)) - 2.0) > 1e-12:
            raise DomainError("weights must sum to 2")

    def mapped(self, a, b):
        """Nodes and weights affinely mapped onto [a, b].  a and b may be
        arrays (broadcast against each other); the node axis is appended."""
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights


def _legendre_pair(u, x):
    """(P_u(x), P_{u-1}(x)) by upward recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, u + 1):
        p, p_prev = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k, p
    return p, p_prev


def legendre_rule(u):
    """Gauss-Legendre rule of order u via Newton iteration on the
    recurrence-evaluated polynomial (no library node tables)."""
    if u < 1:
        raise DomainError(f"rule order must be >= 1, got {u!r}")
    if u == 1:
        return QuadratureRule(u=1, nodes=np.zeros(1), weights=np.full(1, 2.0))
    k = np.arange(1, u + 1)
    x = np.cos(math.pi * (4.0 * k - 1.0) / (4.0 * u + 2.0))
    for _ in range(_NEWTON_MAX_ITER):
        p, p_prev = _legendre_pair(u, x)
        dp = u * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    p, p_prev = _legendre_pair(u, x)
    dp = u * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return QuadratureRule(u=u, nodes=x[order], weights=w[order])


def midpoint_rule(u):
    """Composite midpoint rule on [-1, 1] with u panels, same interface."""
    if u < 1:
        raise DomainError(f"rule order must be >= 1, got {u!r}")
    h = 2.0 / u
    nodes = -1.0 + h * (np.arange(u) + 0.5)
    return QuadratureRule(u=u, nodes=nodes, weights=np.full(u, h))
