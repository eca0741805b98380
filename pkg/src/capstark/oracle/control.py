"""Negative control: the free Stark operator has no resonances."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..capflow import EpsSchedule, collect_estimates, sweep_eps
from ..distortion.field import default_field
from ..distortion.operator import DistortedFactory, Theta
from ..model.grid import Grid
from ..model.potentials import PotentialSpec, Zero
from ..model.system import ParticleSystem
from ..spectra import EigConfig, SpectralWindow, eigs_in_window


@dataclass
class ControlReport:
    passed: bool
    distortion_eigs: list = field(default_factory=list)
    stabilized: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        pair = lambda z: [z.real, z.imag]  # noqa: E731
        return {"status": self.status, "distortion_eigs": [pair(z) for z in self.distortion_eigs],
                "stabilized": [pair(z) for z in self.stabilized], "notes": list(self.notes)}


def free_stark_control(grid: Grid, window: SpectralWindow, system: ParticleSystem | None = None,
                       potential: PotentialSpec | None = None, delta: float | None = None,
                       schedule: EpsSchedule | None = None, eig_config: EigConfig | None = None) -> ControlReport:
    """Check that neither ``P_{0,theta}`` nor the CAP sweep finds anything in ``window``.

    ``potential`` defaults to zero on every particle; passing a binding
    potential turns the control into a check that the control can fail.
    ``delta`` defaults to ``delta1 / 0.75``.
    """
    system = system or ParticleSystem.identical(grid.ndim, 1)
    pot = potential or PotentialSpec.uniform(system.N, Zero())
    delta = delta if delta is not None else window.delta1 / 0.75
    width = max(a.hi - a.lo for a in grid.axes)
    fld = default_field(width, system.d, max(1.0, pot.region.R0))
    fac = DistortedFactory(system, pot, grid, fld, Theta.depth(delta))
    cfg = eig_config or EigConfig()
    dist = [p.value for p in eigs_in_window(fac(0.0), window, cfg)]
    trajs = sweep_eps(fac, schedule or EpsSchedule(), window.padded(0.5 * (window.re_max - window.re_min) / 6,
                                                                      0.5 * (window.im_max - window.im_min) / 4), cfg)
    stab = [e.z for e in collect_estimates(trajs, window)]
    notes = [f"{len(trajs)} trajectories followed"]
    return ControlReport(not dist and not stab, sorted(dist, key=lambda z: (z.real, z.imag)),
                         sorted(stab, key=lambda z: (z.real, z.imag)), notes)
