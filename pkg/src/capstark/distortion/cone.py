"""The undeformed cone and its smoothed convex closure.

The smoothed set is the Minkowski sum of a narrower cone ``K'`` with a ball.
``K'`` has the same half-angle ``alpha`` (``tan(alpha) = kappa``) and its apex
on the axis at distance ``1 + kappa**2`` beyond the original apex, and the
ball radius ``kappa*sqrt(1+kappa**2)`` makes the lateral faces of the sum
coincide with those of the original cone.  The two sets agree on
``y_1 >= -rho + 1`` and the sum has a spherical cap behind that plane, so
distances and depths have closed forms.

In one dimension the cone is the half-line ``[-rho, inf)`` and needs no
smoothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConeParams:
    """Aperture ``kappa`` and offset ``rho`` of ``{|y'| <= kappa (y_1 + rho)}``."""

    kappa: float = 2.0
    rho: float = 2.0

    def __post_init__(self):
        if not self.kappa >= 1.0:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")
        if not self.rho > 1.0:
            raise ValueError(f"rho must be > 1, got {self.rho}")

    def prefactor(self, d: int) -> float:
        """Bound ``sqrt(1 + kappa**-2)`` on ``|v|``; 1 in one dimension."""
        return 1.0 if d == 1 else float(np.sqrt(1.0 + self.kappa**-2))

    @property
    def sin_alpha(self) -> float:
        return self.kappa / np.sqrt(1.0 + self.kappa**2)

    @property
    def cos_alpha(self) -> float:
        return 1.0 / np.sqrt(1.0 + self.kappa**2)

    @property
    def inner_apex_shift(self) -> float:
        return 1.0 + self.kappa**2

    @property
    def ball_radius(self) -> float:
        return self.kappa * np.sqrt(1.0 + self.kappa**2)


def _meridian(y, cone: ConeParams):
    y = np.asarray(y, dtype=float)
    t = y[..., 0] + cone.rho - cone.inner_apex_shift
    s = np.linalg.norm(y[..., 1:], axis=-1)
    return y, t, s


def signed_distance(y, cone: ConeParams) -> np.ndarray:
    """Distance to the smoothed set outside, minus the depth inside.

    This is a convex function of ``y``.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] == 1:
        return -cone.rho - y[..., 0]
    y, t, s = _meridian(y, cone)
    sa, ca, k, r = cone.sin_alpha, cone.cos_alpha, cone.kappa, cone.ball_radius
    inside_k = s <= k * t
    polar = t * ca + s * sa <= 0
    out = np.where(polar, np.hypot(t, s), s * ca - t * sa)
    # inside K' the lateral expression is minus the depth in K'
    out = np.where(inside_k, s * ca - t * sa, out)
    return out - r


def smoothed_cone_distance(y, cone: ConeParams) -> np.ndarray:
    """Euclidean distance from ``y`` (shape ``(..., d)``) to the smoothed cone; 0 inside."""
    return np.maximum(signed_distance(y, cone), 0.0)


def cone_depth(y, cone: ConeParams) -> np.ndarray:
    """Distance from ``y`` to the complement of the smoothed cone; 0 outside."""
    return np.maximum(-signed_distance(y, cone), 0.0)


def signed_distance_gradient(y, cone: ConeParams) -> np.ndarray:
    """A subgradient of :func:`signed_distance` (the outward unit normal off the axis)."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] == 1:
        return -np.ones_like(y)
    y, t, s = _meridian(y, cone)
    sa, ca, k = cone.sin_alpha, cone.cos_alpha, cone.kappa
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = np.where(s[..., None] > 0, y[..., 1:] / s[..., None], 0.0)
        rho_p = np.hypot(t, s)
        polar = (t * ca + s * sa <= 0) & ~(s <= k * t)
        g = np.empty_like(y)
        g[..., 0] = np.where(polar, t / np.where(rho_p > 0, rho_p, 1.0), -sa)
        g[..., 1:] = np.where(polar[..., None], radial * (s / np.where(rho_p > 0, rho_p, 1.0))[..., None],
                              ca * radial)
    return g


def smoothed_cone_distance_gradient(y, cone: ConeParams) -> np.ndarray:
    """Almost-everywhere gradient of the distance (zero inside the set)."""
    g = signed_distance_gradient(y, cone)
    return np.where((signed_distance(y, cone) > 0)[..., None], g, 0.0)


def rho_for_clearance(clearance: float, kappa: float, d: int) -> float:
    """Offset ``rho`` giving the origin depth ``clearance`` inside the smoothed cone."""
    if clearance <= 0:
        raise ValueError("clearance must be positive")
    if d == 1:
        return max(float(clearance), 1.0 + 1e-12)
    probe = ConeParams(kappa, 2.0)
    a, r, sa = probe.inner_apex_shift, probe.ball_radius, probe.sin_alpha
    # origin on the axis: depth r + t' sin(alpha) inside K', r + t' behind its apex
    rho = a + (clearance - r) / sa if clearance >= r else a + clearance - r
    return float(max(rho, 1.0 + 1e-12))
