"""Experiment configuration: YAML file validated by a strict pydantic schema.

Unknown keys are rejected everywhere.  Optional numeric fields left unset
are resolved by :func:`resolve` and recorded in the run manifest.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..model.potentials import REGISTRY


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SystemConfig(_Strict):
    N: int = Field(1, ge=1)
    d: int = Field(1, ge=1)
    masses: Union[float, list[float]] = 1.0
    couplings: Union[float, list[float]] = 1.0
    allow_large: bool = False

    def mass_list(self) -> list[float]:
        return [float(self.masses)] * self.N if isinstance(self.masses, (int, float)) else list(self.masses)

    def coupling_list(self) -> list[float]:
        return [float(self.couplings)] * self.N if isinstance(self.couplings, (int, float)) else list(self.couplings)

    @model_validator(mode="after")
    def _lengths(self):
        for name, v in (("masses", self.masses), ("couplings", self.couplings)):
            if isinstance(v, list) and len(v) != self.N:
                raise ValueError(f"{name} has {len(v)} entries, need N = {self.N}")
        return self


class TermConfig(_Strict):
    name: str
    params: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _known(self):
        if self.name not in REGISTRY:
            raise ValueError(f"unknown potential {self.name!r}; known: {sorted(REGISTRY)}")
        return self


class RegionConfig(_Strict):
    R0: float = Field(1.0, gt=0)
    delta0: float = Field(1.0, gt=0)
    c0: float = Field(1.0, gt=0)
    bound: Optional[float] = None


class PotentialConfig(_Strict):
    one_body: Union[TermConfig, list[TermConfig]] = TermConfig(name="zero")
    pair: Optional[TermConfig] = None
    region: RegionConfig = RegionConfig()


class GridConfig(_Strict):
    lo: Union[float, list[float]] = -40.0
    hi: Union[float, list[float]] = 20.0
    n: Union[int, list[int]] = 1200


class DistortionConfig(_Strict):
    kappa: float = Field(2.0, ge=1.0)
    rho: Optional[float] = Field(None, gt=1.0)
    tau: Optional[float] = Field(None, gt=1.0)
    delta: Optional[float] = Field(None, gt=0)


class WindowConfig(_Strict):
    re_min: float = -4.0
    re_max: float = 2.0
    im_min: Optional[float] = None
    im_max: float = 0.5
    delta1: float = Field(0.3, gt=0)


class EpsConfig(_Strict):
    eps_max: float = Field(1e-1, gt=0)
    eps_min: float = Field(1e-5, gt=0)
    ratio: float = Field(0.5, gt=0, lt=1)


class CutoffConfig(_Strict):
    R: Optional[float] = Field(None, gt=0)


class DiagnosticsConfig(_Strict):
    enabled: bool = False
    floor: float = Field(1e-3, gt=0)
    eps: list[float] = [0.0, 1e-4, 1e-3, 1e-2]
    z_re: int = Field(15, ge=1)
    z_im: int = Field(10, ge=1)


class OracleConfig(_Strict):
    dilation: bool = False
    phi: float = 0.2
    phi_check: float = 0.3
    grid_n: Optional[int] = None
    grid_lo: float = -20.0
    grid_hi: float = 10.0
    control: bool = False
    box_check: bool = False


class OutputConfig(_Strict):
    dir: str = "runs/default"


class ExperimentConfig(_Strict):
    system: SystemConfig = SystemConfig()
    potential: PotentialConfig = PotentialConfig()
    grid: GridConfig = GridConfig()
    distortion: DistortionConfig = DistortionConfig()
    window: WindowConfig = WindowConfig()
    eps: EpsConfig = EpsConfig()
    cutoff: CutoffConfig = CutoffConfig()
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    oracles: OracleConfig = OracleConfig()
    output: OutputConfig = OutputConfig()
    seed: int = 0

    @model_validator(mode="after")
    def _ordering(self):
        d1, d0 = self.window.delta1, self.potential.region.delta0
        delta = self.distortion.delta if self.distortion.delta is not None else default_delta(d1, d0)
        if not d1 < delta:
            raise ValueError(f"parameter ordering delta1 < delta < delta0 violated: delta1 = {d1} >= delta = {delta}")
        if not delta < d0:
            raise ValueError(f"parameter ordering delta1 < delta < delta0 violated: delta = {delta} >= delta0 = {d0}")
        if self.window.im_min is not None and self.window.im_min < -d1:
            raise ValueError(f"window im_min = {self.window.im_min} lies below -delta1 = {-d1}")
        if self.eps.eps_min > self.eps.eps_max:
            raise ValueError("eps_min must not exceed eps_max")
        return self


def default_delta(delta1: float, delta0: float) -> float:
    """``delta1 / 0.75``, pulled back to the midpoint when that reaches ``delta0``."""
    delta = delta1 / 0.75
    return delta if delta < delta0 else 0.5 * (delta1 + delta0)


class ConfigError(ValueError):
    """Invalid configuration file."""


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form of the fully resolved config."""
    payload = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
