"""Classical and quantum Fisher information for motion-parameter estimation.

The ideal quantum bound for a Gaussian PSF is

    QFI_jk = (nu / sigma^2) sum_n  ds/dtheta_j ds/dtheta_k,

the classical information of a concrete detector set replaces 1/sigma^2
with the per-frame factor gamma(s_n, b), and uniform excess noise caps
everything at QFI / (1 + 2 b / nu).  Sums over frames are always exact;
the large-N closed form enters only through the frequency bound
``qcrb_frequency``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from .core import MotionModel, SamplingSchedule, trajectory, trajectory_gradient
from .modes import Scheme, gamma

DEFAULT_COMPONENTS: Tuple[str, ...] = ("f",)


def _gradient_stack(model: MotionModel, schedule: SamplingSchedule,
                    components: Sequence[str], delta_tau: float) -> np.ndarray:
    return np.stack([trajectory_gradient(model, schedule, c, delta_tau)
                     for c in components])


def qfi_ideal(model: MotionModel, schedule: SamplingSchedule, nu: float,
              components: Sequence[str] = DEFAULT_COMPONENTS,
              sigma: float = 1.0, delta_tau: float = 0.0) -> np.ndarray:
    """Noise-free quantum Fisher information matrix (exact frame sum)."""
    g = _gradient_stack(model, schedule, components, delta_tau)
    return nu / sigma**2 * (g @ g.T)


def qfi_noisy(model: MotionModel, schedule: SamplingSchedule, nu: float,
              b: float, components: Sequence[str] = DEFAULT_COMPONENTS,
              sigma: float = 1.0, delta_tau: float = 0.0) -> np.ndarray:
    """Quantum bound under uniform excess noise: QFI / (1 + 2 b / nu)."""
    if b < 0:
        raise ValueError("background must be non-negative")
    return qfi_ideal(model, schedule, nu, components, sigma, delta_tau) / (1 + 2 * b / nu)


def gamma_trace(model: MotionModel, schedule: SamplingSchedule, scheme: Scheme,
                nu: float, b: float, sigma: float = 1.0,
                delta_tau: float = 0.0) -> np.ndarray:
    """Per-frame gamma(s(t_n), b) along the trajectory."""
    s = trajectory(model, schedule, delta_tau)
    return gamma(scheme, s, b, nu, sigma)


def cfi(model: MotionModel, schedule: SamplingSchedule, scheme: Scheme,
        nu: float, b: float = 0.0,
        components: Sequence[str] = DEFAULT_COMPONENTS,
        sigma: float = 1.0, delta_tau: float = 0.0) -> np.ndarray:
    """Classical Fisher information matrix of a detector scheme,
    F_jk = nu sum_n gamma(s_n, b) ds/dtheta_j ds/dtheta_k."""
    g = _gradient_stack(model, schedule, components, delta_tau)
    w = gamma_trace(model, schedule, scheme, nu, b, sigma, delta_tau)
    return nu * ((g * w) @ g.T)


def qcrb_frequency(amplitude: float, n_frames: int, nu: float,
                   sigma: float = 1.0, waveform: str = "sinusoid") -> float:
    """Closed-form variance bound for the dimensionless frequency.

    ``sinusoid``: Var >= 3 sigma^2 / (nu pi^2 A^2 N(N-1)(2N-1)) for motion
    A sin(2 pi f n + phi) + offset.  ``square_fundamental``: the same bound
    with A replaced by the fundamental amplitude 4A/pi of a square wave of
    amplitude A, i.e. Var >= 3 sigma^2 / (16 nu A^2 N(N-1)(2N-1)).
    """
    if n_frames < 2:
        raise ValueError("need at least two frames")
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    poly = n_frames * (n_frames - 1) * (2 * n_frames - 1)
    if waveform == "sinusoid":
        return 3 * sigma**2 / (nu * np.pi**2 * amplitude**2 * poly)
    if waveform == "square_fundamental":
        return 3 * sigma**2 / (16 * nu * amplitude**2 * poly)
    raise ValueError(f"unknown waveform {waveform!r}")


def qcrb_frequency_exact(model: MotionModel, schedule: SamplingSchedule,
                         nu: float, b: float = 0.0, sigma: float = 1.0) -> float:
    """Frequency variance bound from the exact frame sum (no large-N
    approximation), evaluated through the noisy QFI."""
    m = qfi_noisy(model, schedule, nu, b, ("f",), sigma)
    return 1.0 / float(m[0, 0])


def qcrb_for_motion(model: MotionModel, n_frames: int, nu: float,
                    sigma: float = 1.0) -> float:
    """Closed-form frequency bound matched to a motion model's waveform."""
    from .core import MotionKind

    if model.kind is MotionKind.SQUARE_WAVE:
        return qcrb_frequency(model.amplitude, n_frames, nu, sigma,
                              "square_fundamental")
    return qcrb_frequency(model.amplitude, n_frames, nu, sigma, "sinusoid")


def min_eigenvalue(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(np.atleast_2d(matrix)).min())


def loewner_leq(a: np.ndarray, b: np.ndarray, rtol: float = 1e-9) -> bool:
    """a <= b in the Loewner order, with an eigenvalue tolerance of
    -rtol * trace(b) to absorb floating-point noise."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    return min_eigenvalue(b - a) >= -rtol * abs(np.trace(b))


@dataclass
class FisherReport:
    """Information matrices and bounds for one configuration."""

    components: Tuple[str, ...]
    cfi_matrix: np.ndarray
    qfi_ideal: np.ndarray
    qfi_noisy: np.ndarray
    crb_diag: np.ndarray = field(init=False)
    qcrb_diag: np.ndarray = field(init=False)
    gamma_trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.crb_diag = _safe_inverse_diag(self.cfi_matrix)
        self.qcrb_diag = _safe_inverse_diag(self.qfi_noisy)


def _safe_inverse_diag(matrix: np.ndarray) -> np.ndarray:
    matrix = np.atleast_2d(matrix)
    try:
        return np.diag(np.linalg.inv(matrix)).copy()
    except np.linalg.LinAlgError:
        return np.full(matrix.shape[0], np.inf)


def fisher_report(model: MotionModel, schedule: SamplingSchedule, scheme: Scheme,
                  nu: float, b: float = 0.0,
                  components: Sequence[str] = DEFAULT_COMPONENTS,
                  sigma: float = 1.0) -> FisherReport:
    comps = tuple(components)
    return FisherReport(
        components=comps,
        cfi_matrix=cfi(model, schedule, scheme, nu, b, comps, sigma),
        qfi_ideal=qfi_ideal(model, schedule, nu, comps, sigma),
        qfi_noisy=qfi_noisy(model, schedule, nu, b, comps, sigma),
        gamma_trace=gamma_trace(model, schedule, scheme, nu, b, sigma),
    )
