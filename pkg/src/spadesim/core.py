"""Dimensionless unit conventions, motion models and sampling schedules.

Internal unit system: transverse lengths are measured in units of the PSF
width sigma, times in seconds, and oscillation frequencies as the
dimensionless ratio f = f_osc / f_sample in (0, 0.5).  The physical sigma
(e.g. 103 um) is carried only for I/O and the hologram module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class UnsupportedGradientError(ValueError):
    """Requested an analytic motion gradient that does not exist."""


class MotionKind(str, enum.Enum):
    SINUSOID = "sinusoid"
    SQUARE_WAVE = "square_wave"
    CONSTANT = "constant"


@dataclass(frozen=True)
class Psf:
    """Gaussian amplitude point-spread function of width ``sigma``.

    ``sigma`` is the internal length unit (normally 1.0); the physical
    width in micrometres is retained for reporting only.
    """

    sigma: float = 1.0
    physical_sigma_um: Optional[float] = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def amplitude(self, x):
        x = np.asarray(x, dtype=float)
        s2 = self.sigma**2
        return (2 * np.pi * s2) ** -0.25 * np.exp(-(x**2) / (4 * s2))

    def intensity(self, x):
        a = self.amplitude(x)
        return a * a


@dataclass(frozen=True)
class MotionModel:
    """Parametric displacement trajectory s(t) of the point source.

    ``amplitude`` and ``offset`` are in units of sigma, ``f`` is the
    dimensionless frequency f_osc/f_sample and ``phase`` is in radians.
    ``offset=None`` ties the offset to the amplitude (the coordinate
    choice that puts the oscillation minimum at the origin); an explicit
    offset is treated as an independent constant.
    """

    kind: MotionKind
    amplitude: float = 0.0
    f: float = 0.2
    phase: float = 0.0
    offset: Optional[float] = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.kind is not MotionKind.CONSTANT and not 0 < self.f < 0.5:
            raise ValueError("dimensionless frequency must lie in (0, 0.5)")
        if self.kind is MotionKind.SQUARE_WAVE and self.offset is not None:
            if self.offset != self.amplitude:
                raise ValueError("square wave offset is fixed at the amplitude")

    @property
    def offset_value(self) -> float:
        return self.amplitude if self.offset is None else self.offset

    @property
    def offset_tracks_amplitude(self) -> bool:
        return self.offset is None

    def fourier_fundamental(self) -> "MotionModel":
        """Sinusoid carrying the fundamental Fourier component of this
        square wave: amplitude and offset both 4A/pi."""
        if self.kind is not MotionKind.SQUARE_WAVE:
            raise ValueError("fourier_fundamental is defined for square waves")
        a = 4 * self.amplitude / math.pi
        return MotionModel(MotionKind.SINUSOID, amplitude=a, f=self.f,
                           phase=self.phase, offset=a)

    def peak_displacement(self) -> float:
        if self.kind is MotionKind.CONSTANT:
            return self.offset_value
        if self.kind is MotionKind.SQUARE_WAVE:
            return 2 * self.amplitude
        return self.amplitude + self.offset_value


@dataclass(frozen=True)
class DelayJitter:
    """Normal distribution of the one-per-run trigger delay, in seconds."""

    mean_s: float
    sd_s: float

    def __post_init__(self):
        if self.sd_s < 0:
            raise ValueError("jitter sd must be non-negative")


@dataclass(frozen=True)
class SamplingSchedule:
    """Uniform sampling t_n = n / f_s (+ one shared delay per run)."""

    n_frames: int
    f_s: float
    delay_jitter: Optional[DelayJitter] = None

    def __post_init__(self):
        if self.n_frames < 2:
            raise ValueError("need at least two frames")
        if not self.f_s > 0:
            raise ValueError("sampling rate must be positive")

    def frame_times(self, delta_tau: float = 0.0) -> np.ndarray:
        return np.arange(self.n_frames) / self.f_s + delta_tau

    def frame_phases(self, delta_tau: float = 0.0) -> np.ndarray:
        """Times in frame units, n + f_s * delta_tau.

        Computed from the integer frame index so that lattice points such
        as f*n for rational f stay exact when the jitter is disabled."""
        return np.arange(self.n_frames) + self.f_s * delta_tau


@dataclass(frozen=True)
class NoiseBudget:
    """Mean signal photons per frame and background photons per detector."""

    nu: float
    b: float = 0.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if self.b < 0:
            raise ValueError("background must be non-negative")

    @property
    def b_over_nu(self) -> float:
        return self.b / self.nu


def _cycles(model: MotionModel, tau):
    """Oscillation phase in cycles at frame-unit time tau."""
    return model.f * np.asarray(tau, dtype=float) + model.phase / (2 * np.pi)


def displacement_at_phase(model: MotionModel, tau) -> np.ndarray:
    """Displacement with time given in frame units (tau = f_s * t)."""
    tau = np.asarray(tau, dtype=float)
    if model.kind is MotionKind.CONSTANT:
        return np.broadcast_to(np.float64(model.offset_value), tau.shape).copy()
    cyc = _cycles(model, tau)
    if model.kind is MotionKind.SINUSOID:
        return model.amplitude * np.sin(2 * np.pi * cyc) + model.offset_value
    # Square wave: high on phase fraction [0, 0.5], low on (0.5, 1).
    # The closed interval at both edges realises the sgn(0) := +1 convention
    # without evaluating sin at floating-point multiples of pi.
    frac = np.mod(cyc, 1.0)
    return np.where(frac <= 0.5, 2.0 * model.amplitude, 0.0)


def displacement(model: MotionModel, t, f_s: float = 1.0) -> np.ndarray:
    """Displacement s(t) at time ``t`` in seconds for sampling rate ``f_s``.

    The dimensionless model frequency is converted through f_osc = f * f_s.
    """
    return displacement_at_phase(model, np.asarray(t, dtype=float) * f_s)


def displacement_gradient_at_phase(model: MotionModel, tau, component: str) -> np.ndarray:
    """Analytic d s / d theta with time in frame units.

    ``component`` is one of ``"amplitude"``, ``"f"`` or ``"phase"``.  The
    square wave supports only the amplitude gradient; its f and phase
    derivatives are distributional and rejected.
    """
    tau = np.asarray(tau, dtype=float)
    if component not in ("amplitude", "f", "phase"):
        raise ValueError(f"unknown component {component!r}")
    if model.kind is MotionKind.CONSTANT:
        return np.zeros(tau.shape)
    if model.kind is MotionKind.SQUARE_WAVE:
        if component != "amplitude":
            raise UnsupportedGradientError(
                "square-wave gradient w.r.t. %s is distributional" % component)
        frac = np.mod(_cycles(model, tau), 1.0)
        return np.where(frac <= 0.5, 2.0, 0.0)
    arg = 2 * np.pi * _cycles(model, tau)
    if component == "amplitude":
        g = np.sin(arg)
        if model.offset_tracks_amplitude:
            g = g + 1.0
        return g
    if component == "f":
        return 2 * np.pi * tau * model.amplitude * np.cos(arg)
    return model.amplitude * np.cos(arg)


def displacement_gradient(model: MotionModel, t, f_s: float = 1.0,
                          component: str = "f") -> np.ndarray:
    return displacement_gradient_at_phase(
        model, np.asarray(t, dtype=float) * f_s, component)


def trajectory(model: MotionModel, schedule: SamplingSchedule,
               delta_tau: float = 0.0) -> np.ndarray:
    """Displacements at the schedule's frame times."""
    return displacement_at_phase(model, schedule.frame_phases(delta_tau))


def trajectory_gradient(model: MotionModel, schedule: SamplingSchedule,
                        component: str = "f", delta_tau: float = 0.0) -> np.ndarray:
    return displacement_gradient_at_phase(
        model, schedule.frame_phases(delta_tau), component)


def square_wave_fourier_partial_sum(model: MotionModel, tau, n_harmonics: int) -> np.ndarray:
    """Partial Fourier sum of the square wave over odd harmonics.

    s(tau) = 4A/pi + (4A/pi) * sum_k sin(2 pi (2k-1) f tau) / (2k-1),
    truncated after ``n_harmonics`` odd terms.
    """
    if model.kind is not MotionKind.SQUARE_WAVE:
        raise ValueError("Fourier expansion applies to the square wave")
    tau = np.asarray(tau, dtype=float)
    base = 4 * model.amplitude / np.pi
    out = np.full(tau.shape, base)
    cyc = _cycles(model, tau)
    for k in range(1, n_harmonics + 1):
        m = 2 * k - 1
        out = out + base * np.sin(2 * np.pi * m * cyc) / m
    return out
