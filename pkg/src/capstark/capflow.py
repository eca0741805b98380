"""The vanishing-CAP limit: eps sweeps, trajectory matching, extrapolation and checks."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.optimize import linear_sum_assignment

from .model.grid import Grid
from .model.operators import OperatorMatrix, second_difference, _embed_axis
from .spectra import EigConfig, Eigenpair, SpectralWindow, contour_multiplicity, eigs_in_window, min_singular_value


# ------------------------------------------------------------------ schedule

@dataclass(frozen=True)
class EpsSchedule:
    """Geometric sequence ``eps_max * ratio**k`` down to ``eps_min``."""

    eps_max: float = 1e-1
    eps_min: float = 1e-5
    ratio: float = 0.5

    def __post_init__(self):
        if not (0 < self.eps_min <= self.eps_max):
            raise ValueError("need 0 < eps_min <= eps_max")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")

    @property
    def values(self) -> np.ndarray:
        k = int(math.floor(math.log(self.eps_min / self.eps_max) / math.log(self.ratio) + 1e-9))
        return self.eps_max * self.ratio ** np.arange(k + 1)


# ------------------------------------------------------------------ trajectories

@dataclass
class Trajectory:
    """Eigenvalue path across decreasing ``eps``.

    ``status`` is ``"matched"`` while the path is followed to the end of the
    schedule, ``"lost"`` if it disappears or a solve fails, and
    ``"diverged"`` once :func:`detect_limit` rejects it.
    """

    points: list = field(default_factory=list)
    status: str = "matched"
    ambiguous: bool = False
    ident: int = 0

    @property
    def eps(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def z(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=complex)

    def __len__(self):
        return len(self.points)


@dataclass
class ResonanceEstimate:
    z: complex
    gamma: float
    multiplicity: int
    trajectory: Trajectory
    error_estimate: float
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"z": [self.z.real, self.z.imag], "gamma": self.gamma, "multiplicity": self.multiplicity,
                "error_estimate": self.error_estimate, "flags": sorted(self.flags),
                "trajectory_id": self.trajectory.ident}


class NonConvergentTrajectory(ValueError):
    """Raised by :func:`detect_limit` for trajectories that do not stabilize."""


def _spectrum(builder, eps, window, cfg):
    out = builder(eps)
    if isinstance(out, (OperatorMatrix,)) or sp.issparse(out) or (isinstance(out, np.ndarray) and out.ndim == 2):
        pairs = eigs_in_window(out, window, cfg)
        return [(p.value, p.residual) for p in pairs]
    vals = np.asarray(list(out), dtype=complex)
    vals = vals[window.contains(vals)]
    return [(complex(v), 0.0) for v in vals]


def sweep_eps(builder: Callable, schedule: EpsSchedule | Sequence[float], window: SpectralWindow,
              eig_config: EigConfig | None = None, initial_radius: float | None = None,
              floor: float = 1e-6, workers: int = 1) -> list[Trajectory]:
    """Follow eigenvalues of ``builder(eps)`` inside ``window`` as ``eps`` decreases.

    ``builder(eps)`` returns an operator (solved with :func:`eigs_in_window`)
    or directly an iterable of eigenvalues.  Consecutive spectra are linked by
    an optimal assignment to linearly predicted positions; a candidate is
    admissible for a trajectory if it lies within three times the predicted
    step plus ``floor``.  A trajectory with a single point uses
    ``initial_radius`` (default 5% of the window diameter).  With
    ``workers > 1`` the eigensolves run in a thread pool; matching is
    sequential, so the result does not depend on ``workers``.

    Returns trajectories sorted by their final value.
    """
    eps_values = np.asarray(schedule.values if isinstance(schedule, EpsSchedule) else schedule, dtype=float)
    if np.any(np.diff(eps_values) >= 0):
        raise ValueError("eps values must be strictly decreasing")
    cfg = eig_config or EigConfig(vectors=True)
    r0 = initial_radius if initial_radius is not None else 0.05 * window.diameter

    def solve(eps):
        try:
            return _spectrum(builder, float(eps), window, cfg)
        except Exception:  # noqa: BLE001 - a failed solve ends the affected paths
            return None

    # independent eigensolves, then a sequential matching pass in eps order
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(solve, eps_values))
    else:
        spectra = [solve(e) for e in eps_values]
    active: list[Trajectory] = []
    done: list[Trajectory] = []
    for eps, spec in zip(eps_values, spectra):
        if spec is None:
            for t in active:
                t.status = "lost"
            done.extend(active)
            active = []
            continue
        # canonical order makes the matching independent of solver output order
        spec.sort(key=lambda p: (p[0].real, p[0].imag))
        cand = np.array([p[0] for p in spec], dtype=complex)
        pred, rad = [], []
        for t in active:
            z = t.z
            if len(z) >= 2:
                e = t.eps
                vel = (z[-1] - z[-2]) / (e[-1] - e[-2])
                p = z[-1] + vel * (eps - e[-1])
                pred.append(p)
                rad.append(3.0 * abs(p - z[-1]) + floor)
            else:
                pred.append(z[-1])
                rad.append(r0)
        pred = np.array(pred, dtype=complex)
        rad = np.array(rad)
        matched_c = set()
        keep = []
        if len(active) and len(cand):
            dist = np.abs(pred[:, None] - cand[None, :])
            ok = dist <= rad[:, None]
            big = 1e6 * (1.0 + dist.max())
            rows, cols = linear_sum_assignment(np.where(ok, dist, big))
            assign = {r: c for r, c in zip(rows, cols) if ok[r, c]}
            for i, t in enumerate(active):
                if ok[i].sum() > 1:
                    t.ambiguous = True
            for j in range(len(cand)):
                if ok[:, j].sum() > 1:
                    for i in np.flatnonzero(ok[:, j]):
                        active[i].ambiguous = True
            for i, t in enumerate(active):
                if i in assign:
                    j = assign[i]
                    t.points.append((float(eps), complex(cand[j]), float(spec[j][1])))
                    matched_c.add(j)
                    keep.append(t)
                else:
                    t.status = "lost"
                    done.append(t)
        else:
            for t in active:
                t.status = "lost"
            done.extend(active)
        for j in range(len(cand)):
            if j not in matched_c:
                keep.append(Trajectory([(float(eps), complex(cand[j]), float(spec[j][1]))]))
        active = keep
    done.extend(active)
    done.sort(key=lambda t: (round(t.z[-1].real, 10), round(t.z[-1].imag, 10), -len(t)))
    for i, t in enumerate(done):
        t.ident = i
    return done


# ------------------------------------------------------------------ limits

def richardson(eps, z) -> np.ndarray:
    """Pairwise first-order extrapolants ``(e_{k-1} z_k - e_k z_{k-1}) / (e_{k-1} - e_k)``."""
    eps = np.asarray(eps, dtype=float)
    z = np.asarray(z, dtype=complex)
    return (eps[:-1] * z[1:] - eps[1:] * z[:-1]) / (eps[:-1] - eps[1:])


def detect_limit(t: Trajectory, gamma: float = 0.0, min_points: int = 4) -> ResonanceEstimate:
    """First-order Richardson limit of a matched trajectory.

    The estimate is the last pairwise extrapolant and ``error_estimate`` the
    change from the previous one.  The trajectory is accepted when
    ``|z_k - z0|`` decreases over its final three points and the change
    between successive extrapolants shrinks (monotone drifts such as
    ``1/eps`` or ``log eps`` pass the first test but not the second).

    Raises
    ------
    NonConvergentTrajectory
        If the trajectory is too short, lost, or not stabilizing (its status
        is then set to ``"diverged"`` unless it was lost).
    """
    if t.status == "lost":
        raise NonConvergentTrajectory("trajectory was lost before the end of the schedule")
    if len(t) < min_points:
        raise NonConvergentTrajectory(f"trajectory has {len(t)} points, need {min_points}")
    R = richardson(t.eps, t.z)
    z0 = complex(R[-1])
    err = float(abs(R[-1] - R[-2]))
    gap = np.abs(t.z[-3:] - z0)
    if not (gap[0] > gap[1] > gap[2]):
        t.status = "diverged"
        raise NonConvergentTrajectory("distance to the extrapolated limit does not decrease")
    step = np.abs(np.diff(R[-3:]))
    if not (step[1] < step[0] or step[1] <= 1e-12 * (1.0 + abs(z0))):
        t.status = "diverged"
        raise NonConvergentTrajectory("successive extrapolants do not settle")
    flags = ["ambiguous"] if t.ambiguous else []
    return ResonanceEstimate(z0, float(gamma), 1, t, err, flags)


def collect_estimates(trajectories, window: SpectralWindow | None = None) -> list[ResonanceEstimate]:
    """Limits of every converged trajectory, optionally restricted to a window."""
    out = []
    for t in trajectories:
        try:
            est = detect_limit(t)
        except NonConvergentTrajectory:
            continue
        if window is None or window.contains(est.z):
            out.append(est)
    return out


# ------------------------------------------------------------------ theorem check

@dataclass
class CheckEntry:
    z: complex
    multiplicity: int
    cap_count: int
    rank_gap: float | None = None


@dataclass
class Theorem1Report:
    passed: bool
    gamma: float
    entries: list = field(default_factory=list)
    unmatched: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "gamma": self.gamma,
                "entries": [{"z": [e.z.real, e.z.imag], "multiplicity": e.multiplicity, "cap_count": e.cap_count,
                             "rank_gap": e.rank_gap if e.rank_gap is None or np.isfinite(e.rank_gap) else None}
                            for e in self.entries],
                "unmatched": [[z.real, z.imag] for z in self.unmatched]}


def cluster_values(values, tol: float) -> list[tuple[complex, int]]:
    """Group values closer than ``tol`` (single linkage); returns (mean, size) pairs."""
    vals = sorted(np.asarray(values, dtype=complex).tolist(), key=lambda z: (z.real, z.imag))
    groups: list[list[complex]] = []
    for z in vals:
        for g in groups:
            if min(abs(z - w) for w in g) <= tol:
                g.append(z)
                break
        else:
            groups.append([z])
    return [(complex(np.mean(g)), len(g)) for g in groups]


def theorem1_check(distortion_eigs: Sequence[Eigenpair], cap_estimates: Sequence[ResonanceEstimate],
                   gamma: float | None = None, window: SpectralWindow | None = None, operator=None,
                   cluster_tol: float = 1e-6, gamma_max: float = 0.05) -> Theorem1Report:
    """Compare distortion eigenvalues (with multiplicity) against CAP limits.

    Each distinct distortion eigenvalue ``z`` gets the multiplicity of the
    Riesz projector of ``operator`` on the disc of radius ``gamma`` when an
    operator is given, otherwise its cluster size.  The check passes when the
    number of CAP limits (counted with multiplicity) within ``gamma`` of each
    ``z`` equals that multiplicity and no CAP limit in the window is left
    over.

    Raises
    ------
    ValueError
        If ``gamma`` is not below half the minimal separation.
    """
    vals = [e.value if isinstance(e, Eigenpair) else complex(e) for e in distortion_eigs]
    if window is not None:
        vals = [z for z in vals if window.contains(z)]
    clusters = cluster_values(vals, cluster_tol)
    if len(clusters) > 1:
        zs = np.array([c[0] for c in clusters])
        sep = np.abs(zs[:, None] - zs[None, :])
        min_sep = float(np.min(sep[np.triu_indices(len(zs), 1)]))
    else:
        min_sep = np.inf
    if gamma is None:
        gamma = min(0.4 * min_sep, gamma_max)
    if not gamma < 0.5 * min_sep:
        raise ValueError(f"gamma = {gamma} must be below half the minimal separation {min_sep}")
    caps = [c for c in cap_estimates if window is None or window.contains(c.z)]
    used = np.zeros(len(caps), dtype=bool)
    entries = []
    passed = True
    for z, size in clusters:
        gap = None
        m = size
        if operator is not None:
            mc = contour_multiplicity(operator, z, gamma, strict=False)
            m, gap = mc.count, mc.rank_gap
        near = [i for i, c in enumerate(caps) if abs(c.z - z) <= gamma]
        count = sum(caps[i].multiplicity for i in near)
        used[near] = True
        entries.append(CheckEntry(z, m, count, gap))
        passed &= count == m
    unmatched = [caps[i].z for i in np.flatnonzero(~used)]
    passed &= not unmatched
    for c in caps:
        c.gamma = float(gamma)
    return Theorem1Report(bool(passed), float(gamma), entries, unmatched)


# ------------------------------------------------------------------ cutoff

def _smooth_step(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def chi_profile(r) -> np.ndarray:
    """Smooth radial cutoff: 1 on ``r <= 2``, 0 on ``r >= 3``."""
    a = _smooth_step(3.0 - np.asarray(r, dtype=float))
    b = _smooth_step(np.asarray(r, dtype=float) - 2.0)
    return a / (a + b)


@dataclass(frozen=True)
class CutoffParams:
    R: float = 2.0

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")

    def values(self, x) -> np.ndarray:
        r = np.linalg.norm(np.atleast_2d(np.asarray(x, dtype=float)), axis=-1)
        return self.R * chi_profile(r / self.R)


def cutoff_matrix(params: CutoffParams, grid: Grid) -> OperatorMatrix:
    """Diagonal matrix of ``R * chi(|x| / R)`` at the grid nodes."""
    return OperatorMatrix(sp.diags(params.values(grid.coords)), grid, "K_R", {"R": params.R})


def default_cutoff_radius(support_radius: float) -> float:
    """``R`` with ``2R`` covering the potential's effective support (at least 1)."""
    return max(1.0, 0.5 * support_radius)


# ------------------------------------------------------------------ resolvent diagnostic

@dataclass
class DiagnosticReport:
    minimum: float
    argmin: tuple
    floor: float
    passed: bool
    table: list = field(default_factory=list)
    trend: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"minimum": self.minimum, "argmin": {"eps": self.argmin[0], "z": [self.argmin[1].real, self.argmin[1].imag]},
                "floor": self.floor, "passed": self.passed,
                "table": [{"eps": e, "z": [z.real, z.imag], "sigma_min": s} for e, z, s in self.table],
                "trend": self.trend}


def _sobolev_weight(grid: Grid, M: float, u, k: int = 2) -> float:
    """Discrete ``H^k`` norm (k = 0 or 2) of ``u`` restricted to ``|x| < M``."""
    mask = np.linalg.norm(grid.coords, axis=1) < M
    val = np.linalg.norm(u[mask]) ** 2
    if k >= 2:
        L = sp.csr_matrix((grid.size, grid.size))
        for a, ax in enumerate(grid.axes):
            L = L + _embed_axis(second_difference(ax.n, ax.h), grid.shape, a)
        val += np.linalg.norm((L @ u)[mask]) ** 2
    return math.sqrt(val * grid.cell_volume)


def main_estimate_diagnostic(builder: Callable, eps_grid: Sequence[float], z_grid: Sequence[complex],
                             params: CutoffParams, floor: float = 1e-3, M0: float | None = None,
                             n_probes: int = 4, seed: int = 0, k: int = 2) -> DiagnosticReport:
    """Scan ``sigma_min(P_{eps,theta} - z - i K^R)`` over ``eps_grid x z_grid``.

    Also estimates the growth of
    ``sup_u ||u||_{H^k(|x| < M)} / ||(P - z - iK) u||`` for ``M`` in
    ``{M0, 2 M0, 4 M0}`` on random probe vectors and the near-null vector at
    the minimizing point, reporting the fitted exponent against ``k/2``.
    """
    table = []
    best = (np.inf, None, None)
    A0 = builder(float(eps_grid[0]))
    grid = A0.grid
    K = cutoff_matrix(params, grid).matrix
    I = sp.identity(grid.size, format="csr")
    for eps in eps_grid:
        A = builder(float(eps))
        B = A.matrix - 1j * K
        for z in z_grid:
            s = min_singular_value(B, complex(z))
            table.append((float(eps), complex(z), float(s)))
            if s < best[0]:
                best = (s, float(eps), complex(z))
    # H^k growth on probe vectors at the minimizing point
    eps_b, z_b = best[1], best[2]
    B = sp.csc_matrix(builder(eps_b).matrix - 1j * K - z_b * I, dtype=complex)
    lu = sla.splu(B)
    rng = np.random.default_rng(seed)
    probes = [lu.solve(rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)) for _ in range(n_probes)]
    ext = max(max(abs(a.lo), abs(a.hi)) for a in grid.axes)
    M0 = M0 if M0 is not None else max(params.R, ext / 8.0)
    Ms = [M0, 2 * M0, 4 * M0]
    ratios = []
    for M in Ms:
        r = max(_sobolev_weight(grid, M, u, k) / (np.linalg.norm(B @ u) * math.sqrt(grid.cell_volume)) for u in probes)
        ratios.append(r)
    slope = float(np.polyfit(np.log(Ms), np.log(ratios), 1)[0])
    trend = {"M": Ms, "ratio": ratios, "exponent": slope, "bound": k / 2.0, "ok": bool(slope <= k / 2.0 + 0.25)}
    return DiagnosticReport(float(best[0]), (eps_b, z_b), float(floor), bool(best[0] > floor), table, trend)


def resonance_collapse(builder: Callable, z: complex) -> float:
    """``sigma_min(P_{0,theta} - z)`` without the cutoff (small at a resonance)."""
    return min_singular_value(builder(0.0), complex(z))


# ------------------------------------------------------------------ box robustness

def box_robustness(estimates: Sequence[ResonanceEstimate], rerun: Callable[[Grid], Sequence[ResonanceEstimate]],
                   grid: Grid, factor: float = 1.5, floor: float = 1e-6) -> list[dict]:
    """Flag estimates whose limit moves when the box is enlarged.

    ``rerun(grid)`` repeats the CAP pipeline on a grid.  An estimate is
    flagged ``"box_sensitive"`` when its nearest counterpart on the enlarged
    grid (same spacing) is farther than ``max(10 * error_estimate, floor)``.
    """
    bigger = grid.enlarged(factor)
    new = list(rerun(bigger))
    report = []
    for est in estimates:
        if new:
            d = np.array([abs(n.z - est.z) for n in new])
            j = int(np.argmin(d))
            moved, other = float(d[j]), new[j].z
        else:
            moved, other = float("inf"), None
        thr = max(10.0 * est.error_estimate, floor)
        spurious = moved > thr
        if spurious and "box_sensitive" not in est.flags:
            est.flags.append("box_sensitive")
        report.append({"z": [est.z.real, est.z.imag], "moved": moved, "threshold": thr, "spurious": bool(spurious),
                       "enlarged_z": None if other is None else [other.real, other.imag]})
    return report


# ------------------------------------------------------------------ output

def write_trajectories_csv(path, trajectories) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trajectory_id", "eps", "re_z", "im_z", "residual"])
        for t in trajectories:
            for e, z, r in t.points:
                w.writerow([t.ident, repr(e), repr(z.real), repr(z.imag), repr(r)])


def estimates_to_json(estimates) -> str:
    return json.dumps([e.to_dict() for e in estimates], indent=2, sort_keys=True)
