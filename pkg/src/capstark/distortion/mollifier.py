"""Compactly supported smooth bump used to mollify the cone distance."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gamma


@lru_cache(maxsize=None)
def bump_normalization(d: int) -> float:
    """Integral of ``exp(-1/(1-|t|^2))`` over the unit ball of ``R^d``."""
    sphere = 2.0 * np.pi ** (d / 2) / gamma(d / 2)
    radial, _ = integrate.quad(lambda r: r ** (d - 1) * np.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0,
                               epsabs=1e-14, epsrel=1e-13, limit=200)
    return float(sphere * radial)


def bump(t, d: int | None = None, derivatives: int = 0):
    """Normalized bump at points ``t`` of shape ``(..., d)``.

    Returns ``phi`` and, for ``derivatives >= 1``, the gradient ``(..., d)``
    and for ``derivatives >= 2`` the Hessian ``(..., d, d)``.
    """
    t = np.asarray(t, dtype=float)
    d = t.shape[-1] if d is None else d
    r2 = np.sum(t * t, axis=-1)
    inside = r2 < 1.0
    w = np.where(inside, 1.0 - r2, 1.0)
    phi = np.where(inside, np.exp(-1.0 / w), 0.0) / bump_normalization(d)
    if derivatives == 0:
        return phi
    # d phi = phi * g with g = -2 t / w^2
    g = -2.0 * t / (w * w)[..., None]
    grad = phi[..., None] * g
    if derivatives == 1:
        return phi, grad
    eye = np.eye(d)
    hess = phi[..., None, None] * (g[..., :, None] * g[..., None, :]
                                   - 2.0 * eye / (w * w)[..., None, None]
                                   - 8.0 * t[..., :, None] * t[..., None, :] / (w**3)[..., None, None])
    return phi, grad, hess


@dataclass(frozen=True)
class MollifierParams:
    """Scale ``tau`` of ``phi_tau(y) = tau**-d * phi(y / tau)``; support radius ``tau``."""

    tau: float = 4.0

    def __post_init__(self):
        if not self.tau > 1.0:
            raise ValueError(f"tau must be > 1, got {self.tau}")

    @property
    def support_radius(self) -> float:
        return self.tau

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return bump(y / self.tau) / self.tau ** y.shape[-1]
