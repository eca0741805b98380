from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ParticleSystem:
    """N particles in d dimensions with masses ``m_j`` and field couplings ``q_j``.

    The field acts along the first coordinate of each particle.  With
    ``normalized=True`` the couplings must satisfy ``min(q_j) == 1``.
    """

    N: int
    d: int
    masses: tuple[float, ...]
    couplings: tuple[float, ...]
    normalized: bool = False
    allow_large: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        object.__setattr__(self, "couplings", tuple(float(q) for q in self.couplings))
        if self.N < 1 or self.d < 1:
            raise ValueError(f"need N >= 1 and d >= 1, got N={self.N}, d={self.d}")
        if len(self.masses) != self.N or len(self.couplings) != self.N:
            raise ValueError("masses and couplings must have one entry per particle")
        if min(self.masses) <= 0 or min(self.couplings) <= 0:
            raise ValueError("masses and couplings must be positive")
        if self.normalized and abs(min(self.couplings) - 1.0) > 1e-14:
            raise ValueError(f"normalized system requires min(q_j) = 1, got {min(self.couplings)}")
        if self.N * self.d > 3 and not self.allow_large:
            raise ValueError(
                f"d*N = {self.N * self.d} exceeds the desk-scale cap of 3; pass allow_large=True to override"
            )

    @classmethod
    def identical(cls, N: int, d: int, mass: float = 1.0, coupling: float = 1.0, **kw) -> "ParticleSystem":
        return cls(N, d, (mass,) * N, (coupling,) * N, **kw)

    @property
    def identical_particles(self) -> bool:
        return len(set(self.masses)) == 1 and len(set(self.couplings)) == 1

    @property
    def ndim(self) -> int:
        return self.N * self.d
