"""Pipeline orchestration and artifact writing."""
from __future__ import annotations

import datetime as _dt
import json
import platform
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..capflow import (CutoffParams, EpsSchedule, box_robustness, collect_estimates, default_cutoff_radius,
                       estimates_to_json, main_estimate_diagnostic, resonance_collapse, sweep_eps, theorem1_check,
                       write_trajectories_csv)
from ..distortion.cone import ConeParams, rho_for_clearance
from ..distortion.field import build_field, default_tau, dump_field_csv
from ..distortion.mollifier import MollifierParams
from ..distortion.operator import DistortedFactory, Theta
from ..model.grid import Axis, Grid
from ..model.potentials import AnalyticRegion, PotentialSpec, make_potential
from ..model.system import ParticleSystem
from ..oracle.control import free_stark_control
from ..oracle.dilation import DilationParams, dilation_resonances
from ..spectra import EigConfig, SpectralWindow, eigs_in_window, write_eigs_csv
from .config import ExperimentConfig, config_hash, default_delta

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

# oracle agreement tolerance on resonance positions
ORACLE_ATOL = 1e-3


class StageError(RuntimeError):
    """Failure inside a pipeline stage; the message names the stage."""

    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {exc.__class__.__name__}: {exc}")
        self.stage = stage


@dataclass
class ExitReport:
    code: int
    checks: dict = field(default_factory=dict)
    out_dir: Path | None = None
    error: str | None = None

    @property
    def status(self) -> str:
        return {EXIT_PASS: "PASS", EXIT_FAIL: "FAIL"}.get(self.code, "ERROR")


# ------------------------------------------------------------------ resolution

def _listify(v, n):
    return list(v) if isinstance(v, list) else [v] * n


def resolve(cfg: ExperimentConfig, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    """Fill every defaulted field so the result reproduces the run on its own."""
    raw = cfg.model_dump(mode="json")
    nd = cfg.system.N * cfg.system.d
    g = raw["grid"]
    g["lo"], g["hi"], g["n"] = _listify(g["lo"], nd), _listify(g["hi"], nd), _listify(g["n"], nd)
    widths = [h - l for l, h in zip(g["lo"], g["hi"])]
    raw["system"]["masses"] = cfg.system.mass_list()
    raw["system"]["couplings"] = cfg.system.coupling_list()
    ob = raw["potential"]["one_body"]
    raw["potential"]["one_body"] = ob if isinstance(ob, list) else [ob] * cfg.system.N
    dist = raw["distortion"]
    region = cfg.potential.region
    if dist["delta"] is None:
        dist["delta"] = default_delta(cfg.window.delta1, region.delta0)
    if dist["tau"] is None:
        dist["tau"] = default_tau(max(widths))
    if dist["rho"] is None:
        dist["rho"] = rho_for_clearance(region.R0 + dist["tau"], dist["kappa"], cfg.system.d)
    if raw["window"]["im_min"] is None:
        raw["window"]["im_min"] = -cfg.window.delta1
    if raw["cutoff"]["R"] is None:
        raw["cutoff"]["R"] = default_cutoff_radius(_potential(cfg).support_radius())
    if raw["oracles"]["grid_n"] is None:
        raw["oracles"]["grid_n"] = 1200
    if seed is not None:
        raw["seed"] = int(seed)
    if out is not None:
        raw["output"]["dir"] = str(out)
    return ExperimentConfig.model_validate(raw)


def _potential(cfg: ExperimentConfig) -> PotentialSpec:
    pc = cfg.potential
    terms = pc.one_body if isinstance(pc.one_body, list) else [pc.one_body] * cfg.system.N
    if len(terms) != cfg.system.N:
        raise ValueError(f"{len(terms)} one-body terms for N = {cfg.system.N}")
    one = tuple(make_potential(t.name, **t.params) for t in terms)
    pair = make_potential(pc.pair.name, **pc.pair.params) if pc.pair else None
    pairs = {} if pair is None else {(j, k): pair for j in range(cfg.system.N) for k in range(j + 1, cfg.system.N)}
    r = pc.region
    return PotentialSpec(one, pairs, AnalyticRegion(r.R0, r.delta0, r.c0, r.bound))


@dataclass
class Problem:
    system: ParticleSystem
    pot: PotentialSpec
    grid: Grid
    window: SpectralWindow
    track_window: SpectralWindow
    theta: Theta
    schedule: EpsSchedule
    cutoff: CutoffParams
    field: object

    def factory(self, grid: Grid | None = None) -> DistortedFactory:
        return DistortedFactory(self.system, self.pot, grid or self.grid, self.field, self.theta)


def build_problem(cfg: ExperimentConfig) -> Problem:
    """Instantiate all model objects from a resolved config."""
    s = cfg.system
    system = ParticleSystem(s.N, s.d, tuple(s.mass_list()), tuple(s.coupling_list()), allow_large=s.allow_large)
    pot = _potential(cfg)
    g = cfg.grid
    grid = Grid(tuple(Axis(float(l), float(h), int(n)) for l, h, n in zip(g.lo, g.hi, g.n)))
    w = cfg.window
    window = SpectralWindow(w.re_min, w.re_max, w.im_min, w.im_max, delta1=w.delta1, delta0=cfg.potential.region.delta0)
    pad_re = 0.1 * (w.re_max - w.re_min)
    pad_im = 0.25 * (w.im_max - w.im_min)
    track = window.padded(pad_re, pad_im)
    d = cfg.distortion
    fld = build_field(ConeParams(d.kappa, d.rho), MollifierParams(d.tau), s.d)
    return Problem(system, pot, grid, window, track, Theta.depth(d.delta),
                   EpsSchedule(cfg.eps.eps_max, cfg.eps.eps_min, cfg.eps.ratio), CutoffParams(cfg.cutoff.R), fld)


# ------------------------------------------------------------------ stages

def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except Exception as exc:  # noqa: BLE001 - rewrapped with the stage name
        raise StageError(name, exc) from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _field_section(prob: Problem, path: Path, n: int = 201):
    ax = prob.grid.axes[0]
    pts = np.zeros((n, prob.system.d))
    pts[:, 0] = np.linspace(ax.lo, ax.hi, n)
    dump_field_csv(prob.field, pts, path)


def _cap_stage(prob: Problem, factory, cfg, workers: int = 1):
    trajs = sweep_eps(factory, prob.schedule, prob.track_window, EigConfig(seed=cfg.seed), workers=workers)
    return trajs, collect_estimates(trajs, prob.window)


def _dilation_stage(prob: Problem, cfg: ExperimentConfig):
    o = cfg.oracles
    axes = tuple(Axis(o.grid_lo, o.grid_hi, o.grid_n) for _ in range(prob.grid.ndim))
    params = DilationParams(o.phi, Grid(axes), o.phi_check)
    return dilation_resonances(prob.system, prob.pot, params, prob.window, EigConfig(seed=cfg.seed))


def _agreement(a, b, atol):
    """Every value in ``a`` has a partner in ``b`` within ``atol`` and vice versa."""
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    if len(a) != len(b):
        return False
    if not len(a):
        return True
    d = np.abs(a[:, None] - b[None, :])
    return bool(np.all(d.min(axis=1) <= atol) and np.all(d.min(axis=0) <= atol))


def execute(cfg: ExperimentConfig, out_dir: Path, threads: int = 1, stages: tuple[str, ...] = ("run",)) -> dict:
    """Run the configured stages in ``out_dir``; returns the check results.

    ``stages`` selects among ``"run"`` (distortion + CAP + theorem check),
    ``"diagnose"`` and ``"oracle"``; config toggles add the optional parts to
    a full run.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    prob = _stage("model", build_problem, cfg)
    checks: dict = {}
    want_run = "run" in stages
    want_oracle = "oracle" in stages or (want_run and (cfg.oracles.dilation or cfg.oracles.control))
    want_diag = "diagnose" in stages or (want_run and cfg.diagnostics.enabled)
    factory = _stage("distortion", prob.factory) if (want_run or want_diag) else None
    if want_run or want_diag:
        _stage("distortion", _field_section, prob, out_dir / "field.csv")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        fut_dil = pool.submit(_stage, "oracle", _dilation_stage, prob, cfg) if (want_oracle and (cfg.oracles.dilation or "oracle" in stages)) else None
        fut_ctl = (pool.submit(_stage, "oracle", free_stark_control, prob.grid, prob.window, prob.system,
                               None, cfg.distortion.delta, prob.schedule)
                   if want_oracle and cfg.oracles.control else None)
        ref = trajs = estimates = None
        if want_run:
            ref = _stage("spectra", eigs_in_window, factory(0.0), prob.window, EigConfig(seed=cfg.seed))
            write_eigs_csv(out_dir / "distortion_eigs.csv", ref, source="distortion")
            trajs, estimates = _stage("capflow", _cap_stage, prob, factory, cfg, threads)
            write_trajectories_csv(out_dir / "trajectories.csv", trajs)
            rep = _stage("capflow", theorem1_check, ref, estimates, window=prob.window, operator=factory(0.0))
            checks["theorem1"] = rep.passed
            result = {"estimates": json.loads(estimates_to_json(estimates)), "theorem1": rep.to_dict()}
            if cfg.oracles.box_check:
                def rerun(bigger):
                    f = prob.factory(bigger)
                    return _cap_stage(prob, f, cfg, threads)[1]
                box = _stage("capflow", box_robustness, estimates, rerun, prob.grid)
                result["box_robustness"] = box
                result["estimates"] = json.loads(estimates_to_json(estimates))
            (out_dir / "resonances.json").write_text(_dump(result))
        if want_diag:
            dc = cfg.diagnostics
            w = prob.window
            zs = [complex(x, y) for y in np.linspace(w.im_min, w.im_max, dc.z_im + 2)[1:-1]
                  for x in np.linspace(w.re_min, w.re_max, dc.z_re)]
            diag = _stage("diagnose", main_estimate_diagnostic, factory, dc.eps, zs, prob.cutoff, dc.floor,
                          seed=cfg.seed)
            payload = diag.to_dict()
            if ref is not None and len(ref):
                payload["collapse"] = [{"z": [p.value.real, p.value.imag],
                                        "sigma_min": resonance_collapse(factory, p.value)} for p in ref]
                checks["collapse"] = all(c["sigma_min"] < 1e-6 for c in payload["collapse"])
            checks["diagnostic"] = diag.passed
            (out_dir / "diagnostic.json").write_text(_dump(payload))
        oracle_payload = {}
        if fut_dil is not None:
            dil = fut_dil.result()
            write_eigs_csv(out_dir / "oracle_dilation.csv", dil, source="oracle")
            oracle_payload["dilation"] = [[p.value.real, p.value.imag] for p in dil]
            oracle_payload["dilation_notes"] = list(dil.warnings)
            if estimates is not None:
                checks["dilation_agreement"] = _agreement([e.z for e in estimates], dil.values, ORACLE_ATOL)
        if fut_ctl is not None:
            ctl = fut_ctl.result()
            oracle_payload["control"] = ctl.to_dict()
            checks["control"] = ctl.passed
        if oracle_payload:
            oracle_payload["source"] = "oracle"
            (out_dir / "oracle.json").write_text(_dump(oracle_payload))
    return checks


def _versions() -> dict:
    import pydantic
    import yaml
    return {"capstark": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pydantic": pydantic.__version__, "pyyaml": yaml.__version__}


def write_manifest(out_dir: Path, cfg: ExperimentConfig, report: ExitReport, threads: int, stages) -> None:
    artifacts = sorted(p.name for p in out_dir.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {"status": report.status, "exit_code": report.code, "checks": report.checks, "error": report.error,
                "config": cfg.model_dump(mode="json"), "config_hash": config_hash(cfg), "versions": _versions(),
                "threads": threads, "stages": list(stages), "artifacts": artifacts,
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    (out_dir / "manifest.json").write_text(_dump(manifest))


def run(cfg: ExperimentConfig, out: str | Path | None = None, seed: int | None = None, threads: int = 1,
        stages: tuple[str, ...] = ("run",)) -> ExitReport:
    """Resolve defaults, execute, write the manifest; never raises on stage errors."""
    cfg = resolve(cfg, seed=seed, out=None if out is None else str(out))
    out_dir = Path(cfg.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        checks = execute(cfg, out_dir, threads, stages)
        code = EXIT_PASS if all(checks.values()) else EXIT_FAIL
        report = ExitReport(code, checks, out_dir)
    except StageError as exc:
        report = ExitReport(EXIT_ERROR, {}, out_dir, str(exc))
        (out_dir / "error.txt").write_text(traceback.format_exc())
    write_manifest(out_dir, cfg, report, threads, stages)
    return report
