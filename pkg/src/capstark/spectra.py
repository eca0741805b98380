"""Windowed non-Hermitian eigensolves, Riesz-projector multiplicities and resolvent probes."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .model.operators import OperatorMatrix

DENSE_THRESHOLD = 3000


def _mat(A):
    return A.matrix if isinstance(A, OperatorMatrix) else A


def _size(A):
    return _mat(A).shape[0]


@dataclass(frozen=True)
class SpectralWindow:
    """Rectangle ``[re_min, re_max] x (im_min, im_max)`` in the complex plane.

    ``delta1`` (optional) is the depth bound: the window must satisfy
    ``im_min >= -delta1``.  ``delta0`` (optional) is the hard limit
    ``im_min > -delta0``.
    """

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    delta1: float | None = None
    delta0: float | None = None

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise ValueError("empty spectral window")
        if self.delta1 is not None and self.im_min < -self.delta1:
            raise ValueError(f"window reaches Im z = {self.im_min} below -delta1 = {-self.delta1}")
        if self.delta0 is not None and not self.im_min > -self.delta0:
            raise ValueError(f"window reaches Im z = {self.im_min}, needs > -delta0 = {-self.delta0}")
        if self.delta1 is not None and self.delta0 is not None and not self.delta1 < self.delta0:
            raise ValueError("need delta1 < delta0")

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        return ((z.real >= self.re_min) & (z.real <= self.re_max)
                & (z.imag > self.im_min) & (z.imag < self.im_max))

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    @property
    def diameter(self) -> float:
        return float(math.hypot(self.re_max - self.re_min, self.im_max - self.im_min))

    def padded(self, re_pad: float = 0.0, im_pad: float = 0.0) -> "SpectralWindow":
        """Larger window without the depth constraints (used for tracking)."""
        return SpectralWindow(self.re_min - re_pad, self.re_max + re_pad, self.im_min - im_pad, self.im_max + im_pad)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("re_min", "re_max", "im_min", "im_max", "delta1", "delta0")}


@dataclass
class Eigenpair:
    value: complex
    vector: np.ndarray | None
    residual: float

    def to_dict(self) -> dict:
        return {"re": float(np.real(self.value)), "im": float(np.imag(self.value)), "residual": float(self.residual)}


class EigenList(list):
    """List of :class:`Eigenpair` carrying solver warnings."""

    def __init__(self, items=(), warnings_=()):
        super().__init__(items)
        self.warnings = list(warnings_)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self], dtype=complex)


def _sorted(pairs):
    return sorted(pairs, key=lambda e: (round(float(np.real(e.value)), 12), round(float(np.imag(e.value)), 12)))


def _pair(M, z, u):
    u = u / np.linalg.norm(u)
    return Eigenpair(complex(z), u, float(np.linalg.norm(M @ u - z * u)))


@dataclass
class EigConfig:
    """Solver settings for :func:`eigs_in_window`."""

    dense_threshold: int = DENSE_THRESHOLD
    shifts: tuple[int, int] | None = None
    k_initial: int = 8
    k_max: int = 256
    tol: float = 0.0
    vectors: bool = True
    edge_band: float = 0.02
    edge_density: int = 50
    seed: int = 0


def eigs_in_window(A, window: SpectralWindow, config: EigConfig | None = None) -> EigenList:
    """All eigenvalues of ``A`` inside ``window`` with residual certificates.

    Dense LAPACK below ``config.dense_threshold`` rows, otherwise shift-invert
    Arnoldi on a shift lattice covering the window; the number of requested
    eigenvalues grows at each shift until its covering disc is exhausted.
    Results are deduplicated and sorted by real then imaginary part.
    """
    cfg = config or EigConfig()
    M = sp.csr_matrix(_mat(A))
    n = M.shape[0]
    notes = []
    if n <= cfg.dense_threshold:
        dense = M.toarray()
        if cfg.vectors:
            w, V = la.eig(dense)
        else:
            w, V = la.eigvals(dense), None
        pairs = []
        for i in np.flatnonzero(window.contains(w)):
            if V is not None:
                pairs.append(_pair(M, w[i], V[:, i]))
            else:
                pairs.append(Eigenpair(complex(w[i]), None, float("nan")))
        out = _sorted(pairs)
    else:
        out = _sorted(_shift_invert_window(M, window, cfg, notes))
    result = EigenList(out, notes)
    _edge_warning(result, window, cfg)
    return result


def _shift_lattice(window: SpectralWindow, shifts):
    W = window.re_max - window.re_min
    H = window.im_max - window.im_min
    if shifts is None:
        ny = max(1, int(math.ceil(H / max(W, H) * 2)))
        nx = max(1, int(math.ceil(W / (H / ny))))
    else:
        nx, ny = shifts
    xs = window.re_min + (np.arange(nx) + 0.5) * W / nx
    ys = window.im_min + (np.arange(ny) + 0.5) * H / ny
    radius = 0.5 * math.hypot(W / nx, H / ny) * 1.05
    return [complex(x, y) for y in ys for x in xs], radius


def _shift_invert_window(M, window, cfg, notes):
    shifts, radius = _shift_lattice(window, cfg.shifts)
    n = M.shape[0]
    # fixed random start vector: reproducible and not orthogonal to any symmetry sector
    rng = np.random.default_rng(cfg.seed)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    found_vals, found_vecs = [], []
    for sigma in shifts:
        k = min(cfg.k_initial, n - 2)
        while True:
            try:
                w, V = sla.eigs(M, k=k, sigma=sigma, which="LM", tol=cfg.tol, v0=v0)
            except (sla.ArpackNoConvergence, RuntimeError) as exc:
                notes.append(f"shift {sigma:.6g}: no convergence ({exc.__class__.__name__})")
                w, V = np.zeros(0, complex), np.zeros((n, 0), complex)
                break
            far = np.max(np.abs(w - sigma), initial=0.0)
            if far > radius or k >= min(cfg.k_max, n - 2):
                if far <= radius:
                    notes.append(f"shift {sigma:.6g}: k_max reached before covering radius")
                break
            k = min(2 * k, cfg.k_max, n - 2)
        sel = (np.abs(w - sigma) <= radius) & window.contains(w)
        found_vals.extend(w[sel])
        found_vecs.extend(V[:, sel].T)
    # deduplicate across overlapping discs
    tol = 1e-8 * window.diameter
    pairs = []
    for z, u in zip(found_vals, found_vecs):
        if any(abs(z - p.value) <= tol for p in pairs):
            continue
        pairs.append(_pair(M, z, u) if cfg.vectors else Eigenpair(complex(z), None, float(np.linalg.norm(M @ (u / np.linalg.norm(u)) - z * u / np.linalg.norm(u)))))
    return pairs


def _edge_warning(result: EigenList, window: SpectralWindow, cfg: EigConfig):
    if not len(result):
        return
    z = result.values
    band = cfg.edge_band * (window.im_max - window.im_min)
    near = np.sum(z.imag < window.im_min + band)
    if near > cfg.edge_density:
        msg = f"{near} eigenvalues within {band:.3g} of the lower window edge; continuum may touch the window"
        result.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=3)


# ------------------------------------------------------------------ multiplicity

class ContourProximityError(ValueError):
    """An eigenvalue lies (numerically) on the integration contour."""


class RankGapError(ValueError):
    """The numerical rank of the projector is ambiguous."""


@dataclass(frozen=True)
class MultiplicityCount:
    center: complex
    radius: float
    count: int
    quadrature_nodes: int
    rank_gap: float
    weights: tuple = field(default=(), repr=False)

    ACCEPT_GAP = 1e3

    @property
    def accepted(self) -> bool:
        return self.rank_gap > self.ACCEPT_GAP

    def to_dict(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "radius": self.radius, "count": self.count,
                "quadrature_nodes": self.quadrature_nodes, "rank_gap": _finite(self.rank_gap)}


def _finite(x):
    return float(x) if np.isfinite(x) else None


def contour_multiplicity(A, center: complex, radius: float, n_nodes: int = 32, rank_tol: float = 1e-8,
                         sketch: int | None = None, seed: int = 0, strict: bool = True,
                         dense_threshold: int = 600, max_nodes: int = 256) -> MultiplicityCount:
    """Algebraic multiplicity of the eigenvalues of ``A`` inside a circle.

    Forms the trapezoidal approximation ``P_N`` of the Riesz projector
    ``(1/2 pi i) \\oint (zeta - A)^-1 d zeta``.  ``P_N`` is a rational filter of
    ``A``: its eigenvalues are the weights ``1 / (1 - ((lam - c) / r)^N)``,
    close to 1 inside the circle and to 0 outside.  The count is the number
    of weights of modulus at least 1/2 and ``rank_gap`` is the ratio of the
    smallest retained to the largest discarded modulus.  Nodes are doubled
    (up to ``max_nodes``) while the gap is at most ``1e3``.

    Small matrices use the full projector.  Larger ones restrict ``P_N`` to
    the range of a random sketch ``P_N Y`` (``sketch`` columns, doubled while
    the sketch is rank-saturated; directions below ``rank_tol`` relative to
    the largest singular value are dropped) and take Ritz values there.

    Raises
    ------
    ContourProximityError
        If ``zeta - A`` is numerically singular at a quadrature node.
    RankGapError
        If ``strict`` and the rank gap is at most ``1e3``.
    """
    M = sp.csc_matrix(_mat(A)).astype(complex)
    n = M.shape[0]
    anorm = float(sla.norm(M, 1)) if n else 0.0
    floor = 10.0 * np.finfo(float).eps * max(anorm, 1.0)
    dense = n <= dense_threshold
    Ad = M.toarray() if dense else None
    I = sp.identity(n, dtype=complex, format="csc")
    N = n_nodes
    while True:
        nodes = center + radius * np.exp(2j * np.pi * (np.arange(N) + 0.5) / N)
        if dense:
            acc = np.zeros((n, n), dtype=complex)
            for zeta in nodes:
                B = zeta * np.eye(n) - Ad
                _check_node(la.svdvals(B)[-1], floor, zeta)
                acc += (zeta - center) * la.solve(B, np.eye(n))
            w = la.eigvals(acc / N) if n else np.zeros(0)
        else:
            lus = []
            for zeta in nodes:
                _check_node(min_singular_value(M, zeta, seed=seed), floor, zeta)
                lus.append(sla.splu(zeta * I - M))

            def apply(X):
                return sum((zeta - center) * lu.solve(X) for zeta, lu in zip(nodes, lus)) / N

            p = min(sketch or 16, n)
            while True:
                Y = np.random.default_rng(seed + p).standard_normal((n, p)) + 0j
                U, s, _ = la.svd(apply(Y), full_matrices=False)
                r = int(np.sum(s > rank_tol * max(s[0], floor))) if s.size else 0
                if r < p or p >= n:
                    break
                p = min(2 * p, n)
            Q = U[:, :r]
            w = la.eigvals(Q.conj().T @ apply(Q)) if r else np.zeros(0)
        mod = np.sort(np.abs(w))[::-1]
        m = int(np.sum(mod >= 0.5))
        top = mod[m - 1] if m > 0 else 1.0
        nxt = mod[m] if m < mod.size else 0.0
        gap = top / nxt if nxt > 0 else np.inf
        if gap > MultiplicityCount.ACCEPT_GAP or 2 * N > max_nodes:
            break
        N *= 2
    out = MultiplicityCount(complex(center), float(radius), m, N, float(gap), tuple(mod[: m + 3]))
    if strict and not out.accepted:
        raise RankGapError(f"rank gap {gap:.3g} below {MultiplicityCount.ACCEPT_GAP:g} (count {m})")
    return out


def _check_node(smin, floor, zeta):
    if smin <= floor:
        raise ContourProximityError(f"eigenvalue within {smin:.2e} of contour node {zeta:.6g}")


# ------------------------------------------------------------- singular values

def min_singular_value(A, z: complex = 0.0, dense_threshold: int = 500, tol: float = 1e-10, seed: int = 0) -> float:
    """Smallest singular value of ``A - z I``.

    Dense SVD for small matrices; otherwise Lanczos on
    ``((A - z)^H (A - z))^-1`` applied through one sparse LU factorization.
    Returns 0 when the shifted matrix is exactly singular.
    """
    M = _mat(A)
    n = M.shape[0]
    if n <= dense_threshold:
        B = (M.toarray() if sp.issparse(M) else np.asarray(M)) - z * np.eye(n)
        return float(la.svdvals(B)[-1])
    B = sp.csc_matrix(M, dtype=complex) - z * sp.identity(n, dtype=complex, format="csc")
    try:
        lu = sla.splu(B)
    except RuntimeError:
        return 0.0

    def matvec(x):
        return lu.solve(lu.solve(np.asarray(x, dtype=complex).ravel(), trans="H"))

    op = sla.LinearOperator((n, n), matvec=matvec, dtype=complex)
    try:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        lam = sla.eigsh(op, k=1, which="LM", tol=tol, return_eigenvectors=False, maxiter=5000, v0=v0)
    except sla.ArpackNoConvergence as exc:
        if len(exc.eigenvalues):
            lam = exc.eigenvalues
        else:
            raise
    lam = float(np.max(np.real(lam)))
    return 1.0 / math.sqrt(lam) if lam > 0 else 0.0


# ---------------------------------------------------------------------- output

def write_eigs_csv(path, pairs, source: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "residual"] + (["source"] if source else []))
        for e in pairs:
            w.writerow([repr(float(np.real(e.value))), repr(float(np.imag(e.value))), repr(float(e.residual))]
                       + ([source] if source else []))


def eigs_to_json(pairs, source: str | None = None) -> str:
    recs = [e.to_dict() | ({"source": source} if source else {}) for e in pairs]
    return json.dumps(recs, indent=2, sort_keys=True)
