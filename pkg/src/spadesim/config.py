"""Experiment configuration: validated schema, file loading and hashing.

A run is described by one structured document (YAML or JSON, nested
key-value) with a ``version`` key; command-line flags override individual
file values.  Physical inputs (sigma in um, f_s in Hz) are converted at
this boundary; everything downstream is dimensionless.
"""

from __future__ import annotations

import hashlib
import json
from typing import List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .core import (DelayJitter, MotionKind, MotionModel, NoiseBudget,
                   SamplingSchedule)
from .modes import DirectImaging, HgSpade, PmSpade, Scheme

CONFIG_VERSION = 1


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MotionSpec(StrictModel):
    kind: Literal["sinusoid", "square_wave", "constant"] = "square_wave"
    amplitude: float = Field(0.47, ge=0, description="oscillation amplitude, units of sigma")
    f: float = Field(0.2, gt=0, lt=0.5, description="dimensionless frequency f_o/f_s")
    phase: float = 0.0
    offset: Optional[float] = None

    def to_model(self, f: Optional[float] = None) -> MotionModel:
        return MotionModel(MotionKind(self.kind), amplitude=self.amplitude,
                           f=self.f if f is None else f, phase=self.phase,
                           offset=self.offset)


class JitterSpec(StrictModel):
    mean_ms: float = 2.8
    sd_ms: float = Field(0.48, ge=0)

    def to_jitter(self) -> DelayJitter:
        return DelayJitter(self.mean_ms * 1e-3, self.sd_ms * 1e-3)


class ScheduleSpec(StrictModel):
    n_frames: int = Field(50, ge=2)
    f_s: float = Field(20.0, gt=0, description="sampling rate, Hz")
    jitter: Optional[JitterSpec] = None

    def to_schedule(self, force_jitter: Optional[JitterSpec] = None) -> SamplingSchedule:
        spec = force_jitter if force_jitter is not None else self.jitter
        return SamplingSchedule(self.n_frames, self.f_s,
                                spec.to_jitter() if spec else None)


class SchemeSpec(StrictModel):
    kind: Literal["di", "hg", "pm"]
    pixel_size_um: float = Field(4.6, gt=0)
    n_modes: int = Field(21, ge=2)
    nu: Optional[float] = Field(None, gt=0,
                                description="signal photons per frame; default 400 DI / 60 SPADE")

    def to_scheme(self, sigma_um: float, s_min: float, s_max: float) -> Scheme:
        if self.kind == "pm":
            return PmSpade()
        if self.kind == "hg":
            return HgSpade(self.n_modes)
        return DirectImaging.covering(self.pixel_size_um / sigma_um, s_min, s_max)

    def resolve_nu(self) -> float:
        if self.nu is not None:
            return self.nu
        return 400.0 if self.kind == "di" else 60.0


class NoiseSpec(StrictModel):
    b_over_nu: float = Field(0.0, ge=0, description="background per detector, relative to nu")

    def to_budget(self, nu: float, b_over_nu: Optional[float] = None) -> NoiseBudget:
        ratio = self.b_over_nu if b_over_nu is None else b_over_nu
        return NoiseBudget(nu=nu, b=ratio * nu)


class SweepSpec(StrictModel):
    axis: Literal["frequency", "b_over_nu", "s"] = "frequency"
    values: List[float]

    @field_validator("values")
    @classmethod
    def _non_empty(cls, v):
        if not v:
            raise ValueError("sweep values must not be empty")
        return v

    @model_validator(mode="after")
    def _ranges(self):
        if self.axis == "frequency" and not all(0 < x < 0.5 for x in self.values):
            raise ValueError("frequency sweep values must lie in (0, 0.5)")
        if self.axis == "b_over_nu" and any(x < 0 for x in self.values):
            raise ValueError("b/nu sweep values must be non-negative")
        return self


class PsfSpec(StrictModel):
    sigma_um: float = Field(103.0, gt=0)


class HoloSpec(StrictModel):
    nx: int = 512
    ny: int = 512
    pitch_um: float = Field(8.0, gt=0)
    carrier_bins_x: int = 64
    carrier_bins_y: int = 32
    wavelength_um: float = Field(0.770, gt=0)
    focal_length_mm: float = Field(150.0, gt=0)
    check_points: int = Field(20, ge=1)
    check_s_max: float = Field(0.94, gt=0, description="upper end of the checked displacement range, units of sigma")

    @field_validator("nx", "ny")
    @classmethod
    def _power_of_two(cls, v):
        if v < 2 or v & (v - 1):
            raise ValueError("grid sizes must be powers of two")
        return v

    @model_validator(mode="after")
    def _carriers_below_nyquist(self):
        if not 0 < abs(self.carrier_bins_x) < self.nx // 2:
            raise ValueError("x carrier aliased: need 0 < |bins| < nx/2")
        if not 0 < abs(self.carrier_bins_y) < self.ny // 2:
            raise ValueError("y carrier aliased: need 0 < |bins| < ny/2")
        return self


class ExperimentConfig(StrictModel):
    """Top-level run description; the request body of every service call."""

    version: int = CONFIG_VERSION
    seed: int = 20260810
    trials: int = Field(200, ge=1)
    motion: MotionSpec = MotionSpec()
    schedule: ScheduleSpec = ScheduleSpec()
    schemes: List[SchemeSpec] = Field(default_factory=lambda: [SchemeSpec(kind="pm")])
    noise: NoiseSpec = NoiseSpec()
    sweep: Optional[SweepSpec] = None
    psf: PsfSpec = PsfSpec()
    holo: HoloSpec = HoloSpec()

    @field_validator("version")
    @classmethod
    def _version(cls, v):
        if v != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {v}")
        return v

    @model_validator(mode="after")
    def _schemes_nonempty(self):
        if not self.schemes:
            raise ValueError("at least one scheme required")
        return self

    def scheme_for(self, spec: SchemeSpec, motion: MotionModel) -> Scheme:
        peak = motion.peak_displacement()
        return spec.to_scheme(self.psf.sigma_um, min(0.0, -peak), max(peak, 0.0))


def config_from_dict(data: dict) -> ExperimentConfig:
    return ExperimentConfig(**data)


def load_config_file(path: str) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ValueError("config file must hold a mapping")
    return data


def deep_merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; override values win."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def canonical_json(config: ExperimentConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True,
                      separators=(",", ":"))


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()
