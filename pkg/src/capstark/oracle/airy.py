"""Airy-function matching for a square well in a constant field (1D, one particle).

Solves ``-psi''/(2m) + (V(x) + q x) psi = z psi`` with ``V = -V0`` on
``|x| < a``.  In every region the equation becomes ``w'' = s w`` in the
scaled variable ``s = (2mq)^{1/3} (x + (V - z)/q)``.  The solution is ``Ai``
to the right (decay against the field) and ``Bi + i Ai`` to the left, which
carries outgoing flux towards ``x -> -inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import airy


@dataclass(frozen=True)
class PiecewiseProblem:
    V0: float
    a: float
    q: float
    mass: float = 1.0

    def __post_init__(self):
        if min(self.V0, self.a, self.q, self.mass) <= 0:
            raise ValueError("V0, a, q and mass must be positive")

    @property
    def scale(self) -> float:
        return (2.0 * self.mass * self.q) ** (1.0 / 3.0)

    def s(self, x: float, V: float, z: complex) -> complex:
        return self.scale * (x + (V - z) / self.q)


def wronskian_defect(s) -> np.ndarray:
    """``|Ai Bi' - Ai' Bi - 1/pi|`` relative to the size of the two products."""
    ai, aip, bi, bip = airy(np.asarray(s, dtype=complex))
    scale = 1.0 / math.pi + np.abs(ai * bip) + np.abs(aip * bi)
    return np.abs(ai * bip - aip * bi - 1.0 / math.pi) / scale


def _outgoing(s):
    ai, aip, bi, bip = airy(s)
    return bi + 1j * ai, bip + 1j * aip


def matching_matrix(prob: PiecewiseProblem, z: complex) -> np.ndarray:
    """Continuity of value and slope at ``+a`` and ``-a``.

    Unknowns are the coefficients of ``Ai`` on the right, ``Ai, Bi`` in the
    well and the outgoing solution on the left.  Slopes are taken in ``s``;
    the common factor ``ds/dx`` cancels.  Each exterior column is divided
    by its value entry, so the determinant stays analytic in ``z`` and only
    logarithmic derivatives of the exterior solutions enter.
    """
    a, V0 = prob.a, prob.V0
    sr = prob.s(a, 0.0, z)
    sw_r, sw_l = prob.s(a, -V0, z), prob.s(-a, -V0, z)
    sl = prob.s(-a, 0.0, z)
    ar, arp, _, _ = airy(sr)
    a1, a1p, b1, b1p = airy(sw_r)
    a2, a2p, b2, b2p = airy(sw_l)
    cl, clp = _outgoing(sl)
    return np.array([[1.0, -a1, -b1, 0.0],
                     [arp / ar, -a1p, -b1p, 0.0],
                     [0.0, a2, b2, -1.0],
                     [0.0, a2p, b2p, -clp / cl]], dtype=complex)


def matching_determinant(prob: PiecewiseProblem, z: complex) -> complex:
    return complex(np.linalg.det(matching_matrix(prob, z)))


def _ddet(prob, z, h=1e-6):
    return (matching_determinant(prob, z + h) - matching_determinant(prob, z - h)) / (2 * h)


class AiryResult(list):
    """Certified roots, plus diagnostics for runs that found nothing."""


    def __init__(self, roots=(), diagnostics=()):
        super().__init__(roots)
        self.diagnostics = list(diagnostics)


def _newton(prob, z, tol, max_iter=60):
    with np.errstate(all="ignore"):
        return _newton_steps(prob, z, tol, max_iter)


def _newton_steps(prob, z, tol, max_iter):
    for _ in range(max_iter):
        f = matching_determinant(prob, z)
        df = _ddet(prob, z)
        if df == 0 or not (np.isfinite(df) and np.isfinite(f)):
            return None
        step = f / df
        z = z - step
        if abs(step) < tol * max(1.0, abs(z)):
            return z
    return None


def airy_matching(prob: PiecewiseProblem, window, lattice: tuple[int, int] = (12, 6), det_tol: float = 1e-10,
                  deriv_floor: float = 1e-8, dedupe: float = 1e-8) -> AiryResult:
    """Roots of the matching determinant inside ``window`` by Newton from a start lattice.

    A root is kept when ``|det| < det_tol`` and ``|d det/dz| > deriv_floor``
    (simple root).  Roots closer than ``dedupe`` are merged; the result is
    sorted by real then imaginary part.
    """
    re = np.linspace(window.re_min, window.re_max, lattice[0])
    im = np.linspace(window.im_min, window.im_max, lattice[1] + 2)[1:-1]
    roots, notes = [], []
    for x in re:
        for y in im:
            r = _newton(prob, complex(x, y), 1e-14)
            if r is None or not np.isfinite(r) or not window.contains(r):
                continue
            f, df = abs(matching_determinant(prob, r)), abs(_ddet(prob, r))
            if f >= det_tol or df <= deriv_floor:
                continue
            if all(abs(r - q) > dedupe for q in roots):
                roots.append(complex(r))
    if not roots:
        notes.append(f"no certified root from {lattice[0] * lattice[1]} starts")
    roots.sort(key=lambda z: (round(z.real, 9), round(z.imag, 9)))
    return AiryResult(roots, notes)
