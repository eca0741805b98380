"""Built-in potentials evaluable at complex points.

Every potential takes an array of shape ``(..., d)`` (real or complex) and
returns values of shape ``(...)``.  Squares are complex bilinear
(``y.y``, not ``|y|^2``) so that each potential is the analytic continuation
of its real restriction and obeys ``conj(V(y)) == V(conj(y))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np


def _sq(y):
    y = np.asarray(y)
    return np.sum(y * y, axis=-1)


@dataclass(frozen=True)
class Potential:
    name = "base"

    def __call__(self, y):
        raise NotImplementedError

    def support_radius(self, rtol: float = 1e-6) -> float:
        """Radius outside which ``|V|`` drops below ``rtol`` times its scale."""
        return 0.0

    def params(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Zero(Potential):
    name = "zero"

    def __call__(self, y):
        y = np.asarray(y)
        return np.zeros(y.shape[:-1], dtype=y.dtype)


@dataclass(frozen=True)
class Constant(Potential):
    value: float = 0.0
    name = "constant"

    def __call__(self, y):
        y = np.asarray(y)
        return np.full(y.shape[:-1], self.value, dtype=np.result_type(y.dtype, float))


@dataclass(frozen=True)
class GaussianWell(Potential):
    """``-depth * exp(-y.y / width**2)``; a negative depth gives a barrier."""

    depth: float = 1.0
    width: float = 1.0
    name = "gaussian_well"

    def __call__(self, y):
        return -self.depth * np.exp(-_sq(y) / self.width**2)

    def support_radius(self, rtol=1e-6):
        return self.width * np.sqrt(np.log(1.0 / rtol))


@dataclass(frozen=True)
class SoftCore(Potential):
    """``strength / sqrt(y.y + core**2)``; analytic for ``|Im y| < core``."""

    strength: float = 1.0
    core: float = 1.0
    name = "soft_core"

    def __call__(self, y):
        return self.strength / np.sqrt(_sq(y) + self.core**2)

    def support_radius(self, rtol=1e-6):
        return abs(self.strength) / rtol


@dataclass(frozen=True)
class CosineDamped(Potential):
    """``amplitude * cos(wavenumber * sqrt(y.y)) * exp(-y.y / width**2)``.

    ``cos(k sqrt(u))`` is entire in ``u``, so the branch of the root is irrelevant.
    """

    amplitude: float = 1.0
    wavenumber: float = 1.0
    width: float = 1.0
    name = "cosine_damped"

    def __call__(self, y):
        u = _sq(y)
        return self.amplitude * _cos_sqrt(self.wavenumber**2 * u) * np.exp(-u / self.width**2)

    def support_radius(self, rtol=1e-6):
        return self.width * np.sqrt(np.log(1.0 / rtol))


def _cos_sqrt(u):
    # cos(sqrt(u)) without branch choice: cosh(sqrt(-u)) for u < 0 agrees.
    u = np.asarray(u)
    if np.iscomplexobj(u):
        return np.cos(np.sqrt(u))
    out = np.empty_like(u, dtype=float)
    pos = u >= 0
    out[pos] = np.cos(np.sqrt(u[pos]))
    out[~pos] = np.cosh(np.sqrt(-u[~pos]))
    return out


@dataclass(frozen=True)
class SmoothSquareWell(Potential):
    """Tanh-smoothed square well of depth ``depth`` on ``|y_1| < half_width``.

    Poles sit at ``Im y_1 = pi * smoothing / 2``, which bounds the usable
    analyticity strip.  Only the first coordinate enters.
    """

    depth: float = 1.0
    half_width: float = 1.0
    smoothing: float = 0.1
    name = "smooth_square_well"

    def __call__(self, y):
        x = np.asarray(y)[..., 0]
        a, w = self.half_width, self.smoothing
        return -0.5 * self.depth * (np.tanh((x + a) / w) - np.tanh((x - a) / w))

    def support_radius(self, rtol=1e-6):
        return self.half_width + 0.5 * self.smoothing * np.log(2.0 / rtol)


REGISTRY: Mapping[str, type[Potential]] = {
    cls.name: cls for cls in (Zero, Constant, GaussianWell, SoftCore, CosineDamped, SmoothSquareWell)
}


def make_potential(name: str, **params) -> Potential:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; known: {sorted(REGISTRY)}") from None
    return cls(**params)


@dataclass(frozen=True)
class AnalyticRegion:
    """Declared analyticity data ``(R0, delta0, c0)``.

    ``bound`` optionally claims ``|V| <= bound`` on the region, which the
    assumption screen then checks.
    """

    R0: float = 1.0
    delta0: float = 1.0
    c0: float = 1.0
    bound: float | None = None

    def __post_init__(self):
        if min(self.R0, self.delta0, self.c0) <= 0:
            raise ValueError("R0, delta0 and c0 must be positive")


@dataclass(frozen=True)
class PotentialSpec:
    """One-body potentials ``V_j`` and pair potentials ``V_jk`` (``j < k``, zero-based)."""

    one_body: tuple[Callable, ...]
    pair: Mapping[tuple[int, int], Callable] = field(default_factory=dict)
    region: AnalyticRegion = field(default_factory=AnalyticRegion)

    def __post_init__(self):
        object.__setattr__(self, "one_body", tuple(self.one_body))
        object.__setattr__(self, "pair", dict(self.pair))
        for j, k in self.pair:
            if not 0 <= j < k:
                raise ValueError(f"pair index ({j}, {k}) must satisfy 0 <= j < k")

    @classmethod
    def uniform(cls, N: int, one_body: Callable, pair: Callable | None = None,
                region: AnalyticRegion | None = None) -> "PotentialSpec":
        pairs = {} if pair is None else {(j, k): pair for j in range(N) for k in range(j + 1, N)}
        return cls((one_body,) * N, pairs, region or AnalyticRegion())

    @property
    def N(self) -> int:
        return len(self.one_body)

    def support_radius(self, rtol: float = 1e-6) -> float:
        radii = [getattr(V, "support_radius", lambda r: 0.0)(rtol) for V in self.one_body]
        return float(max(radii, default=0.0))
