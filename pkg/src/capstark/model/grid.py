from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"axis needs at least 3 points, got {self.n}")
        if not self.hi > self.lo:
            raise ValueError(f"empty axis interval [{self.lo}, {self.hi}]")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid, axes ordered particle-major.

    For ``N`` particles in ``d`` dimensions axis ``j*d + i`` is coordinate
    ``i`` of particle ``j``.  Flattening uses C order (last axis fastest).
    """

    axes: tuple[Axis, ...]

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(a if isinstance(a, Axis) else Axis(*a) for a in self.axes))

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int, ndim: int = 1) -> "Grid":
        return cls(tuple(Axis(lo, hi, n) for _ in range(ndim)))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.n for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(a.h for a in self.axes)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(size, ndim)``."""
        mesh = np.meshgrid(*(a.points for a in self.axes), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def multi_index(self, flat):
        return np.unravel_index(flat, self.shape)

    def flat_index(self, multi):
        return np.ravel_multi_index(multi, self.shape)

    def particle_axes(self, j: int, d: int) -> tuple[Axis, ...]:
        return self.axes[j * d:(j + 1) * d]

    def particle_grid(self, j: int, d: int) -> "Grid":
        return Grid(self.particle_axes(j, d))

    def particle_coords(self, j: int, d: int) -> np.ndarray:
        return self.coords[:, j * d:(j + 1) * d]

    def enlarged(self, factor: float) -> "Grid":
        """Grid covering a box ``factor`` times longer per axis with unchanged spacing.

        Whole cells are appended at both ends in proportion to the distance of
        each end from the origin, so shared nodes coincide exactly.
        """
        axes = []
        for a in self.axes:
            extra = int(round((factor - 1.0) * (a.n - 1)))
            span = abs(a.lo) + abs(a.hi)
            left = int(round(extra * abs(a.lo) / span)) if span > 0 else extra // 2
            right = extra - left
            axes.append(Axis(a.lo - left * a.h, a.hi + right * a.h, a.n + extra))
        return Grid(tuple(axes))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(tuple(Axis(a.lo, a.hi, factor * (a.n - 1) + 1) for a in self.axes))

    def with_points(self, n: int) -> "Grid":
        return Grid(tuple(Axis(a.lo, a.hi, n) for a in self.axes))
