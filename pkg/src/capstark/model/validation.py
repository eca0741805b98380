"""Sampling screen for the analyticity and decay assumptions on potentials.

Analyticity cannot be certified from finitely many samples; this module only
looks for evidence against the declared region (non-finite values, bound
violations, non-real values at real points, non-decaying gradients).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .potentials import AnalyticRegion, PotentialSpec


@dataclass(frozen=True)
class SamplingPlan:
    """Probe points for :func:`validate_assumption`.

    Attributes
    ----------
    real_points : (M, d) array
        Real probes for realness, boundedness and finite-difference gradients.
    complex_points : (K, d) complex array
        Probes declared to lie inside the analyticity region.
    ray_directions : (R, d) array
        Unit directions for the decay check.
    ray_radii : (L,) array
        Increasing radii along each ray; only radii beyond ``R0`` are used.
    fd_step : float
        Step of the central finite differences.
    """

    real_points: np.ndarray
    complex_points: np.ndarray
    ray_directions: np.ndarray
    ray_radii: np.ndarray
    fd_step: float = 1e-5

    @classmethod
    def default(cls, region: AnalyticRegion, d: int, n_real: int = 200, n_complex: int = 200,
                n_rays: int = 8, extent: float | None = None, seed: int = 0) -> "SamplingPlan":
        """Random probes: real points in a box, complex points in the one-body region."""
        rng = np.random.default_rng(seed)
        L = extent if extent is not None else 4.0 * region.R0 + 4.0
        real = rng.uniform(-L, L, size=(n_real, d))
        re = rng.uniform(-L, L, size=(n_complex, d))
        # push the real part outside the R0-ball, keep the imaginary part inside delta0
        norms = np.linalg.norm(re, axis=1, keepdims=True)
        re = np.where(norms > region.R0, re, re / np.maximum(norms, 1e-12) * (region.R0 * 1.01 + norms))
        im = rng.normal(size=(n_complex, d))
        im *= (0.99 * region.delta0 * rng.uniform(size=(n_complex, 1))) / np.linalg.norm(im, axis=1, keepdims=True)
        dirs = rng.normal(size=(n_rays, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = np.linspace(region.R0 * 1.01, region.R0 + 6.0 * max(1.0, region.R0), 40)
        return cls(real, re + 1j * im, dirs, radii)


@dataclass
class TermReport:
    label: str
    max_abs: float
    max_grad: float
    max_imag_at_real: float
    decay_ok: bool
    bound_violated: bool


@dataclass
class ValidationReport:
    terms: list[TermReport] = field(default_factory=list)

    @property
    def max_abs(self) -> float:
        return max((t.max_abs for t in self.terms), default=0.0)

    @property
    def max_grad(self) -> float:
        return max((t.max_grad for t in self.terms), default=0.0)

    @property
    def decay_ok(self) -> bool:
        return all(t.decay_ok for t in self.terms)

    @property
    def real_valued(self) -> bool:
        return all(t.max_imag_at_real <= 1e-12 * max(1.0, t.max_abs) for t in self.terms)

    @property
    def bound_violated(self) -> bool:
        return any(t.bound_violated for t in self.terms)

    @property
    def ok(self) -> bool:
        return self.decay_ok and self.real_valued and not self.bound_violated

    def to_dict(self) -> dict:
        return {"ok": self.ok, "terms": [vars(t) for t in self.terms]}


def _fd_grad_norm(V, pts, h):
    d = pts.shape[1]
    g = np.zeros(pts.shape[0])
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        g += np.abs((np.asarray(V(pts + e)) - np.asarray(V(pts - e))) / (2 * h)) ** 2
    return np.sqrt(g)


def _check_term(label, V, plan: SamplingPlan, region: AnalyticRegion, check_decay: bool) -> TermReport:
    vr = np.asarray(V(plan.real_points))
    vc = np.asarray(V(plan.complex_points)) if len(plan.complex_points) else np.zeros(0)
    for name, vals, pts in (("real", vr, plan.real_points), ("complex", vc, plan.complex_points)):
        bad = ~np.isfinite(vals)
        if np.any(bad):
            raise ValueError(f"{label}: non-finite value at in-region {name} probe {pts[np.argmax(bad)]}")
    grad = _fd_grad_norm(V, plan.real_points, plan.fd_step)
    max_abs = float(np.max(np.abs(np.concatenate([vr.ravel(), vc.ravel()])), initial=0.0))
    decay_ok = True
    if check_decay:
        radii = plan.ray_radii[plan.ray_radii > region.R0]
        for u in plan.ray_directions:
            g = _fd_grad_norm(V, radii[:, None] * u[None, :], plan.fd_step)
            scale = max(1e-14, float(np.max(g)))
            # gradients must end small and never grow along the ray beyond round-off
            if np.any(np.diff(g) > 1e-8 * scale) and g[-1] > 1e-3 * scale:
                decay_ok = False
    bound_violated = region.bound is not None and max_abs > region.bound
    return TermReport(label, max_abs, float(np.max(grad, initial=0.0)),
                      float(np.max(np.abs(np.imag(vr)), initial=0.0)), decay_ok, bound_violated)


def validate_assumption(pot: PotentialSpec, samples: SamplingPlan) -> ValidationReport:
    """Screen every one-body and pair term of ``pot`` on the probes in ``samples``.

    One-body terms get the ray decay check; pair terms only need bounded
    values and gradients on the real probes, which the report records.
    """
    report = ValidationReport()
    seen = {}
    for j, V in enumerate(pot.one_body):
        key = id(V)
        if key not in seen:
            seen[key] = _check_term(f"V_{j}", V, samples, pot.region, True)
        t = seen[key]
        report.terms.append(TermReport(f"V_{j}", t.max_abs, t.max_grad, t.max_imag_at_real, t.decay_ok, t.bound_violated))
    for (j, k), V in pot.pair.items():
        report.terms.append(_check_term(f"V_{j}{k}", V, samples, pot.region, False))
    return report
