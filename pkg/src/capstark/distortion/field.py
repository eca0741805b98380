"""The mollified distance field ``F`` and the distortion vector field ``v = grad F``.

``F = -c (dist * phi_tau)`` with ``c`` the cone prefactor.  Derivatives are
moved onto the mollifier, so ``v`` and its Jacobian are convolutions of the
(continuous) distance with ``grad phi_tau`` and ``hess phi_tau``.

* ``d = 1``: closed forms in the scaled variable ``u = (y + rho) / tau`` with
  Gauss-Legendre quadrature of the bump on ``[u, 1]``.
* ``d = 2``: outside the set the distance gradient is a constant normal in
  two lateral wedges and radial in the cap sector, so each quantity is a sum
  of three integrals in polar coordinates about the region vertices.  All
  breakpoints are analytic and tanh-sinh rules handle the flat edge of the
  bump, giving about 1e-9 accuracy.
* ``d >= 3``: composite tensor Gauss-Legendre without kink resolution; the
  achieved error is reported with each sample.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .cone import ConeParams, cone_depth, rho_for_clearance, signed_distance, signed_distance_gradient
from .mollifier import MollifierParams, bump


@dataclass(frozen=True)
class FieldSample:
    """Field values at a batch of points (leading shape ``(M,)``)."""

    F: np.ndarray
    v: np.ndarray
    jacobian: np.ndarray
    error: np.ndarray


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


# ---------------------------------------------------------------- d = 1

def _field_1d(y, cone: ConeParams, tau: float, nodes: int = 64) -> FieldSample:
    y = np.asarray(y, dtype=float)[..., 0]
    u = np.clip((y + cone.rho) / tau, -1.0, 1.0)
    x, w = _gl(nodes)
    half = 0.5 * (1.0 - u)
    t = 0.5 * (1.0 + u)[:, None] + half[:, None] * x[None, :]
    phi = bump(t[..., None], 1)
    # normalize by the same rule's full integral so S(-1) = 1 exactly
    total = bump(x[:, None], 1) @ w
    S = half * (phi @ w) / total
    tail = half * (((t - u[:, None]) * phi) @ w) / total
    # left of the window the distance is affine: F = -(dist at y) exactly
    far = (y + cone.rho) / tau <= -1.0
    F = np.where(far, (y + cone.rho), -tau * tail)
    v = np.where(far, 1.0, S)
    jac = -bump(u[:, None], 1) / tau
    jac = np.where(np.abs(u) >= 1.0, 0.0, jac)
    return FieldSample(F, v[:, None], jac[:, None, None], np.zeros_like(S))


# ---------------------------------------------------------------- d = 2

def _de_rule(n: int, kmax: float = 2.6):
    """Tanh-sinh rule with ``2n+1`` nodes on ``[-1, 1]``."""
    h = kmax / n
    k = np.arange(-n, n + 1) * h
    u = 0.5 * np.pi * np.sinh(k)
    return np.tanh(u), h * 0.5 * np.pi * np.cosh(k) / np.cosh(u) ** 2


def _wedge(y, X, th_a, th_b, rmin, tau, n, normal=None, R=0.0):
    """Integrals over ``{X + r e(th) : th_a <= th <= th_b, r >= rmin}`` against the window at ``y``.

    With ``normal`` given the region is a lateral wedge where the distance is
    ``(z - X).normal``; otherwise it is the polar sector where the distance is
    ``|z - X| - R`` and the normal is radial.  Returns integrals of
    ``dist * phi_tau``, ``normal * phi_tau`` and ``normal x grad phi_tau``.
    """
    P = len(y)
    d = y - X
    D = np.linalg.norm(d, axis=1)
    Dsafe = np.maximum(D, 1e-300)
    base = np.arctan2(d[:, 1], d[:, 0])
    # angular breakpoints: tangents to the window and crossings of the inner circle
    cuts = [np.full(P, th_a), np.full(P, th_b)]
    g = np.arcsin(np.clip(tau / Dsafe, -1.0, 1.0))
    far = D > tau
    cuts += [np.where(far, base + g, th_a), np.where(far, base - g, th_a)]
    if rmin > 0:
        cosg = (D**2 + rmin**2 - tau**2) / (2.0 * rmin * Dsafe)
        ok = np.abs(cosg) < 1.0
        gg = np.arccos(np.clip(cosg, -1.0, 1.0))
        cuts += [np.where(ok, base + gg, th_a), np.where(ok, base - gg, th_a)]
    B = np.stack(cuts, axis=1)
    B = th_a + np.mod(B - th_a, 2.0 * np.pi)
    B = np.sort(np.clip(B, th_a, th_b), axis=1)
    lo, hi = B[:, :-1], B[:, 1:]
    x, w = _de_rule(n)
    th = ((0.5 * (lo + hi))[..., None] + (0.5 * (hi - lo))[..., None] * x).reshape(P, -1)
    wth = ((0.5 * (hi - lo))[..., None] * w).reshape(P, -1)
    e = np.stack([np.cos(th), np.sin(th)], axis=-1)
    # radial chord of the window along each ray, clipped to r >= rmin
    b = -np.einsum("pkx,px->pk", e, d)
    disc = b * b - (D**2 - tau**2)[:, None]
    sq = np.sqrt(np.maximum(disc, 0.0))
    r0 = np.maximum(-b - sq, rmin)
    r1 = np.where(disc > 0, np.maximum(-b + sq, rmin), r0)
    r = 0.5 * (r0 + r1)[..., None] + 0.5 * (r1 - r0)[..., None] * x
    wr = 0.5 * (r1 - r0)[..., None] * w
    z = X + r[..., None] * e[:, :, None, :]
    phi, grad = bump((y[:, None, None, :] - z) / tau, 2, derivatives=1)
    phi = phi / tau**2
    grad = grad / tau**3
    wt = r * wr * wth[..., None]
    if normal is not None:
        dist = np.einsum("pkqx,x->pkq", z - X, normal)
        I1 = np.einsum("pkq->p", wt * phi)[:, None] * normal
        I2 = normal[None, :, None] * np.einsum("pkq,pkqb->pb", wt, grad)[:, None, :]
    else:
        dist = r - R
        I1 = np.einsum("pkq,pkx->px", wt * phi, e)
        I2 = np.einsum("pkq,pka,pkqb->pab", wt, e, grad)
    return np.einsum("pkq,pkq->p", wt * dist, phi), I1, I2


def _field_2d_raw(y, cone: ConeParams, tau: float, n: int):
    a, R, sa, ca = cone.inner_apex_shift, cone.ball_radius, cone.sin_alpha, cone.cos_alpha
    alpha = np.arctan2(sa, ca)
    A = np.array([-cone.rho + a, 0.0])
    F = np.zeros(len(y))
    V = np.zeros((len(y), 2))
    J = np.zeros((len(y), 2, 2))
    # lateral wedges beyond each face, with vertex at the face/cap junction
    for sgn in (1.0, -1.0):
        nrm = np.array([-sa, sgn * ca])
        lo, hi = (alpha, alpha + 0.5 * np.pi) if sgn > 0 else (-alpha - 0.5 * np.pi, -alpha)
        parts = _wedge(y, A + R * nrm, lo, hi, 0.0, tau, n, normal=nrm)
        F, V, J = F + parts[0], V + parts[1], J + parts[2]
    parts = _wedge(y, A, alpha + 0.5 * np.pi, 1.5 * np.pi - alpha, R, tau, n, R=R)
    c = cone.prefactor(2)
    return -c * (F + parts[0]), -c * (V + parts[1]), -c * (J + parts[2])


def _field_2d(y, cone: ConeParams, tau: float, n: int = 22) -> FieldSample:
    """Distortion field in two dimensions by exact region decomposition.

    Outside the set the distance gradient is a constant normal in the two
    lateral wedges and radial in the cap sector, so ``v`` and its Jacobian are
    integrals of the bump (and its gradient) over three piecewise-polar
    regions; each is computed with tanh-sinh rules between analytic
    breakpoints.  The reported error is the difference from a coarser rule, a
    conservative bound on the error of the finer one.
    """
    y = np.asarray(y, dtype=float)
    F = np.zeros(len(y))
    V = np.zeros((len(y), 2))
    J = np.zeros((len(y), 2, 2))
    err = np.zeros(len(y))
    # windows inside the set contribute exactly zero
    live = cone_depth(y, cone) < tau
    if np.any(live):
        yl = y[live]
        f, vv, jj = _field_2d_raw(yl, cone, tau, n)
        f2, v2, j2 = _field_2d_raw(yl, cone, tau, max(6, n - 6))
        err[live] = np.maximum.reduce([np.abs(f - f2) / tau, np.linalg.norm(vv - v2, axis=1),
                                       tau * np.linalg.norm((jj - j2).reshape(len(yl), -1), axis=1)])
        F[live], V[live], J[live] = f, vv, 0.5 * (jj + np.swapaxes(jj, 1, 2))
    return FieldSample(F, V, J, err)


# ---------------------------------------------------------------- d >= 3

def _field_tensor(y, cone: ConeParams, tau: float, cells: int = 6, q: int = 8) -> FieldSample:
    """Composite tensor Gauss-Legendre over the mollifier window.

    The distance kink is not resolved, so accuracy is limited (a few digits);
    the error is the difference from a rule of order ``q - 2``.
    """
    y = np.asarray(y, dtype=float)
    d = y.shape[1]
    c = cone.prefactor(d)

    def rule(qq):
        x, w = _gl(qq)
        edges = np.linspace(-1.0, 1.0, cells + 1)
        h = 0.5 * (edges[1] - edges[0])
        xs = (0.5 * (edges[:-1] + edges[1:])[:, None] + h * x[None, :]).ravel()
        ws = np.tile(h * w, cells)
        grids = np.meshgrid(*([xs] * d), indexing="ij")
        nodes = np.stack([gg.ravel() for gg in grids], axis=-1)
        wts = np.prod(np.stack(np.meshgrid(*([ws] * d), indexing="ij"), axis=-1).reshape(-1, d), axis=1)
        inside = np.sum(nodes**2, axis=1) < 1.0
        return nodes[inside], wts[inside]

    def integrate(nodes, wts):
        phi, grad, hess = bump(nodes, d, derivatives=2)
        F = np.zeros(len(y))
        V = np.zeros((len(y), d))
        J = np.zeros((len(y), d, d))
        for i in range(len(y)):
            dist = np.maximum(signed_distance(y[i] - tau * nodes, cone), 0.0) * wts
            F[i] = dist @ phi
            V[i] = dist @ grad
            J[i] = np.einsum("k,kab->ab", dist, hess)
        return -c * F, -c / tau * V, -c / tau**2 * J

    F, V, J = integrate(*rule(q))
    F2, V2, J2 = integrate(*rule(q - 2))
    err = np.maximum(np.linalg.norm(V - V2, axis=1), np.abs(F - F2) / tau)
    inner = cone_depth(y, cone) >= tau
    F[inner], V[inner], J[inner], err[inner] = 0.0, 0.0, 0.0, 0.0
    return FieldSample(F, V, J, err)


# ---------------------------------------------------------------- public API

@dataclass(frozen=True)
class DistortionField:
    """Distortion field ``v = grad F`` for a cone, a mollifier and a dimension.

    Parameters
    ----------
    cone, mollifier
        Geometry and smoothing scale.
    d
        Spatial dimension of one particle.
    nodes
        Half-size of the tanh-sinh rules used in two dimensions.
    """

    cone: ConeParams
    mollifier: MollifierParams
    d: int = 1
    nodes: int = 22

    @property
    def tau(self) -> float:
        return self.mollifier.tau

    @property
    def bound(self) -> float:
        return self.cone.prefactor(self.d)

    def sample(self, y) -> FieldSample:
        """Evaluate ``F``, ``v``, the Jacobian and the cubature error at points ``(..., d)``."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.d:
            raise ValueError(f"points have dimension {y.shape[-1]}, field has d={self.d}")
        lead = y.shape[:-1]
        flat = y.reshape(-1, self.d)
        if self.d == 1:
            s = _field_1d(flat, self.cone, self.tau)
        else:
            s = self._sample_batched(flat)
        return FieldSample(s.F.reshape(lead), s.v.reshape(lead + (self.d,)),
                           s.jacobian.reshape(lead + (self.d, self.d)), s.error.reshape(lead))

    def _sample_batched(self, flat, batch: int = 256) -> FieldSample:
        if self.d == 2:
            fn = lambda chunk: _field_2d(chunk, self.cone, self.tau, self.nodes)
        else:
            fn = lambda chunk: _field_tensor(chunk, self.cone, self.tau)
            batch = 16
        parts = [fn(flat[i:i + batch]) for i in range(0, len(flat), batch)]
        if not parts:
            z = np.zeros(0)
            return FieldSample(z, np.zeros((0, self.d)), np.zeros((0, self.d, self.d)), z)
        return FieldSample(*(np.concatenate([getattr(p, k) for p in parts]) for k in ("F", "v", "jacobian", "error")))

    def F(self, y):
        return self.sample(y).F

    def v(self, y):
        return self.sample(y).v

    def jacobian(self, y):
        return self.sample(y).jacobian

    def certified_interior(self, y) -> np.ndarray:
        """Points whose mollifier window lies inside the smoothed cone (``v = 0`` there)."""
        return cone_depth(np.asarray(y, float), self.cone) >= self.tau

    def saturation_threshold(self) -> float:
        """Distance to the set beyond which the window sees only one face, so ``v_1 >= 1``.

        Beyond ``tau`` outside the set the distance is affine on the window
        in the half-space behind the apex; elsewhere the bound is attained
        asymptotically.  Used only to pick probes for the saturation check.
        """
        return self.tau


def build_field(cone: ConeParams, moll: MollifierParams, d: int = 1, **kw) -> DistortionField:
    """Construct the distortion field for the given cone and mollifier."""
    return DistortionField(cone, moll, d, **kw)


def lipschitz_estimate(field: DistortionField, probes) -> float:
    """Largest spectral norm of the sampled Jacobian of ``v`` over the probes."""
    J = field.jacobian(np.asarray(probes, dtype=float))
    if J.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(J.reshape(-1, field.d, field.d), ord=2, axis=(1, 2))))


def dump_field_csv(field: DistortionField, points, path) -> None:
    """Write ``y_*``, ``F``, ``v_*`` and the Jacobian norm at the points as CSV."""
    pts = np.asarray(points, dtype=float).reshape(-1, field.d)
    s = field.sample(pts)
    jn = np.linalg.norm(s.jacobian, ord=2, axis=(1, 2)) if len(pts) else np.zeros(0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"y{i + 1}" for i in range(field.d)] + ["F"] + [f"v{i + 1}" for i in range(field.d)] + ["jac_norm"])
        for k in range(len(pts)):
            w.writerow([repr(float(x)) for x in pts[k]] + [repr(float(s.F[k]))]
                       + [repr(float(x)) for x in s.v[k]] + [repr(float(jn[k]))])


def default_tau(box_width: float) -> float:
    """Mollifier scale ``max(4, box_width / 8)``."""
    return max(4.0, box_width / 8.0)


def default_field(box_width: float, d: int, R0: float, kappa: float = 2.0, tau: float | None = None,
                  rho: float | None = None, **kw) -> DistortionField:
    """Field whose certified interior covers the ball of radius ``R0`` around the origin."""
    tau = default_tau(box_width) if tau is None else tau
    rho = rho_for_clearance(R0 + tau, kappa, d) if rho is None else rho
    return build_field(ConeParams(kappa, rho), MollifierParams(tau), d, **kw)
