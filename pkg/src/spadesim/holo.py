"""Phase-only hologram synthesis for two-mode demultiplexing, with a
discrete Fourier-plane readout to verify the encoded projections.

The target complex modulation V (max modulus 1) is written onto a
phase-only panel as G = f(|V|) sin(arg V).  By the Jacobi-Anger identity
exp(i G) = sum_m J_m(f(|V|)) exp(i m arg V), and choosing f so that
J_1(f(a)) = kappa a with kappa the maximum of J_1 makes the first
diffraction order proportional to V itself.  Carrier ramps k_x, k_y
separate that order, and the two analysis modes, into isolated spots at
the Fourier plane; the spot intensities are the mode projections of the
input field.

This module works in physical units (micrometres); everything else in the
package is dimensionless.
"""

from __future__ import annotations

import base64
import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import j0, j1

from .modes import pm_mode_functions


class CarrierAliasError(ValueError):
    """Carrier spatial frequency at or beyond the grid Nyquist limit."""


def _j1_prime(x: float) -> float:
    return j0(x) - j1(x) / x if x != 0 else 0.5


# First maximum of J1: location and value. The value (~0.5819) caps the
# amplitudes a phase-only panel can encode at unity.
J1_PEAK_X: float = brentq(_j1_prime, 1.5, 2.2, xtol=1e-14)
J1_PEAK_VALUE: float = float(j1(J1_PEAK_X))


@dataclass(frozen=True)
class Grid2D:
    """Square-pixel sampling grid; powers of two keep the FFT path exact."""

    nx: int = 512
    ny: int = 512
    pitch_um: float = 8.0

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 2 or n & (n - 1):
                raise ValueError("grid sizes must be powers of two")
        if not self.pitch_um > 0:
            raise ValueError("pitch must be positive")

    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.pitch_um

    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.pitch_um

    def nyquist(self) -> float:
        return math.pi / self.pitch_um

    def carrier_from_bins(self, bins: int, axis: str = "x") -> float:
        n = self.nx if axis == "x" else self.ny
        return 2 * math.pi * bins / (n * self.pitch_um)


@dataclass(frozen=True)
class Hologram:
    """Phase map (radians per pixel) plus the carriers that shaped it."""

    phase: np.ndarray
    k_x: float
    k_y: float
    v_max: float
    grid: Grid2D


@dataclass(frozen=True)
class ReadoutResult:
    i_plus: float
    i_minus: float
    x_spot_um: float
    y_spot_um: float
    leakage: float
    overlap_warning: bool

    @property
    def fraction_plus(self) -> float:
        return self.i_plus / (self.i_plus + self.i_minus)


def invert_j1(a, x_tol: float = 1e-13):
    """Solve J1(x) = kappa * a for x in [0, J1_PEAK_X], elementwise.

    Monotone bisection on the rising branch; residual |J1(x) - kappa a|
    stays below 1e-10 across [0, 1].
    """
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr < 0) or np.any(a_arr > 1):
        raise ValueError("amplitude must lie in [0, 1]")
    target = J1_PEAK_VALUE * a_arr
    lo = np.zeros_like(a_arr)
    hi = np.full_like(a_arr, J1_PEAK_X)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        too_low = j1(mid) < target
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
        if np.max(hi - lo) < x_tol:
            break
    x = 0.5 * (lo + hi)
    x = np.where(a_arr == 0.0, 0.0, np.where(a_arr == 1.0, J1_PEAK_X, x))
    return float(x) if np.isscalar(a) or x.ndim == 0 else x


def pm_modes_2d(grid: Grid2D, sigma_um: float) -> Tuple[np.ndarray, np.ndarray]:
    """Separable analysis modes phi_pm(x) g0(y) sampled on the grid.

    The y profile is the fundamental Gaussian of the same width, so the
    modes stay orthonormal and the x projections carry all displacement
    information.
    """
    from .modes import hg_mode_function

    px, mx = pm_mode_functions(grid.x(), sigma_um)
    g0 = hg_mode_function(0, grid.y(), sigma_um)
    return np.outer(g0, px), np.outer(g0, mx)


def shifted_psf_2d(grid: Grid2D, sigma_um: float, s_um: float) -> np.ndarray:
    """Input field of a point source displaced by s: psi(x - s) g0(y)."""
    from .modes import hg_mode_function

    fx = hg_mode_function(0, grid.x() - s_um, sigma_um)
    g0 = hg_mode_function(0, grid.y(), sigma_um)
    return np.outer(g0, fx)


def modulation_function(mode_plus: np.ndarray, mode_minus: np.ndarray,
                        k_x: float, k_y: float, grid: Grid2D) -> Tuple[np.ndarray, float]:
    """Carrier-multiplexed target modulation

        V = [phi_+^* e^{i k_y y} + phi_-^* e^{-i k_y y}] e^{i k_x x} / V_max.

    Returns (V, V_max) with max |V| normalized to 1.
    """
    for k in (k_x, k_y):
        if abs(k) >= grid.nyquist():
            raise CarrierAliasError(
                f"carrier {k:.4g} rad/um at or beyond Nyquist {grid.nyquist():.4g}")
    x = grid.x()[None, :]
    y = grid.y()[:, None]
    v = (np.conj(mode_plus) * np.exp(1j * k_y * y)
         + np.conj(mode_minus) * np.exp(-1j * k_y * y)) * np.exp(1j * k_x * x)
    v_max = float(np.max(np.abs(v)))
    if v_max == 0:
        raise ValueError("modulation target is identically zero")
    return v / v_max, v_max


def encode_hologram(v: np.ndarray, grid: Grid2D, k_x: float, k_y: float,
                    v_max: float = 1.0) -> Hologram:
    """Per-pixel phase G = f(|V|) sin(arg V) with J1(f(a)) = kappa a."""
    amp = np.abs(v)
    if np.max(amp) > 1 + 1e-9:
        raise ValueError("modulation modulus must not exceed 1")
    phase = invert_j1(np.clip(amp, 0.0, 1.0)) * np.sin(np.angle(v))
    return Hologram(phase=phase, k_x=k_x, k_y=k_y, v_max=v_max, grid=grid)


def first_order_coefficient(a: float, n_samples: int = 4096) -> complex:
    """Numeric first Fourier coefficient (1/2pi) * integral of
    e^{i f(a) sin(phi)} e^{-i phi} d phi; equals kappa * a by design."""
    phi = 2 * np.pi * np.arange(n_samples) / n_samples
    g = invert_j1(a) * np.sin(phi)
    return complex(np.mean(np.exp(1j * g) * np.exp(-1j * phi)))


def _spot_bins(hologram: Hologram) -> Tuple[int, int]:
    grid = hologram.grid
    bx = hologram.k_x * grid.nx * grid.pitch_um / (2 * math.pi)
    by = hologram.k_y * grid.ny * grid.pitch_um / (2 * math.pi)
    return int(round(bx)), int(round(by))


def _box_energy(power: np.ndarray, jy: int, jx: int, w: int) -> float:
    ny, nx = power.shape
    ys = (np.arange(jy - w, jy + w + 1) % ny)
    xs = (np.arange(jx - w, jx + w + 1) % nx)
    return float(power[np.ix_(ys, xs)].sum())


def fourier_readout(u: np.ndarray, hologram: Hologram,
                    focal_length_mm: float = 150.0,
                    wavelength_um: float = 0.770,
                    leakage_threshold: float = 0.05) -> ReadoutResult:
    """Propagate u through the hologram to the Fourier plane and read the
    two first-order spot intensities.

    The spots sit at x' = lambda l k_x / 2 pi and y' = +/- lambda l k_y /
    (2 pi).  Leakage is the worst ring-to-box energy ratio around the two
    spots (ring between 1x and 2x the box half-width); crowding by other
    diffraction orders raises it past ``leakage_threshold`` and sets the
    overlap warning.
    """
    grid = hologram.grid
    field = np.fft.fft2(u * np.exp(1j * hologram.phase), norm="ortho")
    power = np.abs(field) ** 2
    bx, by = _spot_bins(hologram)
    i_plus = float(power[by % grid.ny, bx % grid.nx])
    i_minus = float(power[-by % grid.ny, bx % grid.nx])

    # Spot spectral half-width: the Gaussian envelope of width sigma maps
    # to sigma_bin = n * pitch / (2 pi * sqrt(2) * sigma); infer sigma from
    # the input field's y marginal rather than requiring it as an argument.
    y = grid.y()
    w_y = np.sum(np.abs(u) ** 2, axis=1)
    sigma_y = math.sqrt(float(np.sum(w_y * y**2) / np.sum(w_y)))
    sigma_bin = grid.ny * grid.pitch_um / (2 * math.pi * math.sqrt(2) * sigma_y)
    w = max(3, math.ceil(3 * sigma_bin))

    sep = min(abs(2 * by), grid.ny - abs(2 * by))
    overlap = 2 * w >= sep
    leak = 0.0
    for jy in (by % grid.ny, -by % grid.ny):
        box = _box_energy(power, jy, bx % grid.nx, w)
        ring = _box_energy(power, jy, bx % grid.nx, 2 * w) - box
        if box > 0:
            leak = max(leak, ring / box)
    warn = overlap or leak > leakage_threshold

    scale = wavelength_um * focal_length_mm * 1e3 / (2 * math.pi)
    return ReadoutResult(i_plus=i_plus, i_minus=i_minus,
                         x_spot_um=scale * hologram.k_x,
                         y_spot_um=scale * hologram.k_y,
                         leakage=leak, overlap_warning=warn)


def build_pm_hologram(grid: Optional[Grid2D] = None, sigma_um: float = 103.0,
                      carrier_bins_x: int = 64, carrier_bins_y: int = 32
                      ) -> Hologram:
    """Default PM demultiplexing hologram; carriers snap to DFT bins so the
    spots land exactly on grid points of the discrete Fourier plane."""
    grid = grid or Grid2D()
    k_x = grid.carrier_from_bins(carrier_bins_x, "x")
    k_y = grid.carrier_from_bins(carrier_bins_y, "y")
    plus, minus = pm_modes_2d(grid, sigma_um)
    v, v_max = modulation_function(plus, minus, k_x, k_y, grid)
    return encode_hologram(v, grid, k_x, k_y, v_max)


def demultiplex_fractions(hologram: Hologram, sigma_um: float,
                          s_values_um: Sequence[float],
                          focal_length_mm: float = 150.0,
                          wavelength_um: float = 0.770):
    """Readout fraction I+/(I+ + I-) for displaced PSF inputs, paired with
    the analytic mode-projection fraction mu_+ / (mu_+ + mu_-)."""
    from .modes import PmSpade, mu

    grid = hologram.grid
    fractions = []
    expected = []
    warnings = []
    leakages = []
    pm = PmSpade()
    for s in s_values_um:
        field = shifted_psf_2d(grid, sigma_um, s)
        out = fourier_readout(field, hologram, focal_length_mm, wavelength_um)
        fractions.append(out.fraction_plus)
        warnings.append(out.overlap_warning)
        leakages.append(out.leakage)
        mp, mm = mu(pm, s, sigma_um)
        expected.append(mp / (mp + mm))
    return np.array(fractions), np.array(expected), warnings, np.array(leakages)


def phase_to_png_bytes(hologram: Hologram) -> bytes:
    """8-bit grayscale rendering of the phase, [-pi, pi] -> [0, 255]."""
    from PIL import Image

    scaled = np.clip((hologram.phase + np.pi) / (2 * np.pi) * 255, 0, 255)
    img = Image.fromarray(scaled.astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def sidecar_dict(hologram: Hologram) -> dict:
    return {
        "k_x_rad_per_um": hologram.k_x,
        "k_y_rad_per_um": hologram.k_y,
        "pitch_um": hologram.grid.pitch_um,
        "nx": hologram.grid.nx,
        "ny": hologram.grid.ny,
        "v_max": hologram.v_max,
        "phase_encoding": "8-bit grayscale, [-pi, pi] -> [0, 255]",
        "j1_peak_value": J1_PEAK_VALUE,
    }


def export_hologram(hologram: Hologram, png_path: str, json_path: str) -> None:
    """Write the portable grayscale image and its JSON sidecar."""
    with open(png_path, "wb") as fh:
        fh.write(phase_to_png_bytes(hologram))
    with open(json_path, "w") as fh:
        json.dump(sidecar_dict(hologram), fh, indent=2, sort_keys=True)
        fh.write("\n")


def hologram_png_base64(hologram: Hologram) -> str:
    return base64.b64encode(phase_to_png_bytes(hologram)).decode("ascii")
