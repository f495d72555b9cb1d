"""Experiment orchestration: turn a validated config into figure-ready
tables.

Every runner is deterministic under a fixed seed.  Sweep points and
schemes get independent child seeds derived from (master seed, scheme
index, point index), so results do not depend on execution order, and the
CSV text rendered from a table is byte-stable across reruns.
"""

from __future__ import annotations

import io
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import j1 as _bessel_j1

from . import __version__
from .config import ExperimentConfig, JitterSpec, SchemeSpec, config_hash
from .core import MotionKind, MotionModel, NoiseBudget, SamplingSchedule
from .estimate import (FitTemplate, SearchWindow, ensemble_stats,
                       estimate_frequency)
from .fisher import (cfi, qcrb_for_motion, qcrb_frequency_exact, qfi_ideal,
                     qfi_noisy)
from .holo import (Grid2D, build_pm_hologram, demultiplex_fractions,
                   first_order_coefficient, hologram_png_base64, invert_j1,
                   sidecar_dict, J1_PEAK_VALUE)
from .modes import gamma, gamma_ceiling
from .sim import resolve_workers, run_trial, trial_seed


class RunnerError(ValueError):
    """Config is structurally valid but unusable for this command."""


@dataclass
class Table:
    name: str
    columns: List[str]
    rows: List[List] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_cell(v) for v in row) + "\n")
        return buf.getvalue()

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows])


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value != value:  # NaN
        return "nan"
    # repr is the shortest exact round-trip form, so parsing the CSV
    # reproduces the in-memory table bit for bit
    return repr(float(value))


@dataclass
class RunManifest:
    command: str
    seed: int
    config_hash: str
    package_version: str
    git_revision: Optional[str]
    wall_time_s: float

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def _git_revision() -> Optional[str]:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=5)
        return out.stdout.strip() or None if out.returncode == 0 else None
    except OSError:
        return None


class _Stopwatch:
    def __enter__(self):
        self.t0 = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.monotonic() - self.t0


def make_manifest(command: str, config: ExperimentConfig, wall_time_s: float) -> RunManifest:
    return RunManifest(command=command, seed=config.seed,
                       config_hash=config_hash(config),
                       package_version=__version__,
                       git_revision=_git_revision(),
                       wall_time_s=wall_time_s)


# ---------------------------------------------------------------------------
# Monte Carlo pipeline shared by the sweep commands
# ---------------------------------------------------------------------------

@dataclass
class PipelinePoint:
    mean: float
    nu_var: float
    n_flagged: int
    n_used: int


def run_pipeline_point(model: MotionModel, schedule: SamplingSchedule,
                       scheme, noise: NoiseBudget, trials: int, seed,
                       max_workers: Optional[int] = None) -> PipelinePoint:
    """Ensemble -> per-frame MLE -> LSE -> summary stats for one point."""
    window = SearchWindow.for_motion(model, scheme)
    template = FitTemplate.for_motion(model)

    def one(i: int):
        trial = run_trial(model, schedule, scheme, noise, trial_seed(seed, i))
        return estimate_frequency(trial, scheme, noise.nu, noise.b, window,
                                  template, schedule)

    workers = resolve_workers(max_workers)
    if workers == 1:
        estimates = [one(i) for i in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            estimates = list(pool.map(one, range(trials)))

    good = [e.f_hat for e in estimates if not e.flagged]
    n_flagged = trials - len(good)
    if len(good) >= 2:
        stats = ensemble_stats(good, noise.nu)
        return PipelinePoint(stats.mean, stats.rescaled_variance, n_flagged,
                             stats.n)
    mean = good[0] if good else float("nan")
    return PipelinePoint(mean, float("nan"), n_flagged, len(good))


def _canonical_schemes(config: ExperimentConfig) -> List[SchemeSpec]:
    """One spec per scheme kind, in di/hg/pm order, for three-way scans."""
    by_kind = {s.kind: s for s in config.schemes}
    return [by_kind.get("di", SchemeSpec(kind="di")),
            by_kind.get("hg", SchemeSpec(kind="hg")),
            by_kind.get("pm", SchemeSpec(kind="pm"))]


def _differentiable(motion: MotionModel) -> MotionModel:
    """Frequency-gradient-capable stand-in: square waves contribute their
    fundamental Fourier component, mirroring the fit model."""
    if motion.kind is MotionKind.SQUARE_WAVE:
        return motion.fourier_fundamental()
    return motion


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def fisher_scan(config: ExperimentConfig) -> List[Table]:
    """Per-frame information factor vs displacement, or Fisher information
    vs noise, for the three schemes side by side."""
    if config.sweep is None:
        raise RunnerError("fisher-scan needs a sweep section")
    if config.sweep.axis == "frequency":
        raise RunnerError("fisher-scan sweeps the s or b_over_nu axis")
    motion = config.motion.to_model()
    schedule = config.schedule.to_schedule()
    di_spec, hg_spec, pm_spec = _canonical_schemes(config)
    schemes = {
        "di": (config.scheme_for(di_spec, motion), di_spec.resolve_nu()),
        "hg": (config.scheme_for(hg_spec, motion), hg_spec.resolve_nu()),
        "pm": (config.scheme_for(pm_spec, motion), pm_spec.resolve_nu()),
    }

    if config.sweep.axis == "s":
        ratio = config.noise.b_over_nu
        table = Table("gamma_scan",
                      ["s_sigma", "gamma_di", "gamma_hg", "gamma_pm",
                       "gamma_ceiling"])
        for s in config.sweep.values:
            row = [s]
            for kind in ("di", "hg", "pm"):
                scheme, nu = schemes[kind]
                row.append(float(gamma(scheme, s, ratio * nu, nu)))
            row.append(gamma_ceiling(ratio, 1.0))
            table.rows.append(row)
        return [table]

    smooth = _differentiable(motion)
    qfi0 = float(qfi_ideal(smooth, schedule, 1.0)[0, 0])
    table = Table("fi_scan",
                  ["b_over_nu", "cfi_norm_di", "cfi_norm_hg", "cfi_norm_pm",
                   "qfi_norm", "cfi_di", "cfi_hg", "cfi_pm"])
    for ratio in config.sweep.values:
        norm, raw = [], []
        for kind in ("di", "hg", "pm"):
            scheme, nu = schemes[kind]
            value = float(cfi(smooth, schedule, scheme, nu, ratio * nu)[0, 0])
            raw.append(value)
            norm.append(value / (nu * qfi0))
        table.rows.append([ratio, *norm, 1.0 / (1.0 + 2 * ratio), *raw])
    return [table]


def ideal_sweep(config: ExperimentConfig,
                max_workers: Optional[int] = None) -> List[Table]:
    """Frequency sweep without excess noise (means, rescaled variances and
    the closed-form bound), one table per scheme."""
    if config.noise.b_over_nu != 0:
        raise RunnerError("ideal-sweep requires b_over_nu = 0")
    if config.sweep is None or config.sweep.axis != "frequency":
        raise RunnerError("ideal-sweep needs a frequency sweep")
    schedule = config.schedule.to_schedule()
    tables = []
    for i_scheme, spec in enumerate(config.schemes):
        nu = spec.resolve_nu()
        table = Table(f"ideal_sweep_{spec.kind}",
                      ["f_true", "mean_f_hat", "nu_var", "qcrb_nu_var",
                       "qcrb_nu_var_exact", "n_flagged", "trials"])
        for i_point, f_true in enumerate(config.sweep.values):
            motion = config.motion.to_model(f=f_true)
            scheme = config.scheme_for(spec, motion)
            point = run_pipeline_point(
                motion, schedule, scheme, NoiseBudget(nu=nu), config.trials,
                (config.seed, i_scheme, i_point), max_workers)
            qcrb = nu * qcrb_for_motion(motion, schedule.n_frames, nu)
            fit_motion = (motion.fourier_fundamental()
                          if motion.kind is MotionKind.SQUARE_WAVE else motion)
            exact = nu * qcrb_frequency_exact(fit_motion, schedule, nu)
            table.rows.append([f_true, point.mean, point.nu_var, qcrb, exact,
                               point.n_flagged, config.trials])
        tables.append(table)
    return tables


def noise_sweep(config: ExperimentConfig,
                max_workers: Optional[int] = None) -> List[Table]:
    """Excess-noise sweep at fixed frequency: Monte Carlo means/variances
    against the CRB and the noisy quantum bound, one table per scheme."""
    if config.sweep is None or config.sweep.axis != "b_over_nu":
        raise RunnerError("noise-sweep needs a b_over_nu sweep")
    schedule = config.schedule.to_schedule()
    motion = config.motion.to_model()
    tables = []
    for i_scheme, spec in enumerate(config.schemes):
        nu = spec.resolve_nu()
        scheme = config.scheme_for(spec, motion)
        table = Table(f"noise_sweep_{spec.kind}",
                      ["b_over_nu", "mean_f_hat", "nu_var", "crb_nu_var",
                       "qcrb_nu_var", "n_flagged"])
        for i_point, ratio in enumerate(config.sweep.values):
            noise = NoiseBudget(nu=nu, b=ratio * nu)
            point = run_pipeline_point(motion, schedule, scheme, noise,
                                       config.trials,
                                       (config.seed, i_scheme, i_point),
                                       max_workers)
            smooth = _differentiable(motion)
            fisher = float(cfi(smooth, schedule, scheme, nu, noise.b)[0, 0])
            crb = nu / fisher if fisher > 0 else float("inf")
            qcrb = nu / float(qfi_noisy(smooth, schedule, nu, noise.b)[0, 0])
            table.rows.append([ratio, point.mean, point.nu_var, crb, qcrb,
                               point.n_flagged])
        tables.append(table)
    return tables


DEFAULT_JITTER = JitterSpec()


def jitter_study(config: ExperimentConfig,
                 max_workers: Optional[int] = None) -> List[Table]:
    """Square wave vs its fundamental sinusoid under a shared random
    trigger delay; reveals the variance spikes caused by sampling a
    discontinuous trajectory."""
    if config.sweep is None or config.sweep.axis != "frequency":
        raise RunnerError("jitter-study needs a frequency sweep")
    jitter = config.schedule.jitter or DEFAULT_JITTER
    if jitter.sd_ms < 0:
        raise RunnerError("jitter sd must be non-negative")
    schedule = config.schedule.to_schedule(force_jitter=jitter)
    tables = []
    for i_scheme, spec in enumerate(config.schemes):
        nu = spec.resolve_nu()
        table = Table(f"jitter_study_{spec.kind}",
                      ["waveform", "f_true", "mean_f_hat", "nu_var",
                       "qcrb_nu_var", "var_over_qcrb", "n_flagged"])
        for i_wave, waveform in enumerate(("square_wave", "sinusoid")):
            for i_point, f_true in enumerate(config.sweep.values):
                square = MotionModel(MotionKind.SQUARE_WAVE,
                                     amplitude=config.motion.amplitude,
                                     f=f_true, phase=config.motion.phase)
                motion = square if waveform == "square_wave" else square.fourier_fundamental()
                scheme = config.scheme_for(spec, motion)
                point = run_pipeline_point(
                    motion, schedule, scheme, NoiseBudget(nu=nu),
                    config.trials, (config.seed, i_scheme, i_wave, i_point),
                    max_workers)
                qcrb = nu * qcrb_for_motion(motion, schedule.n_frames, nu)
                table.rows.append([waveform, f_true, point.mean, point.nu_var,
                                   qcrb, point.nu_var / qcrb, point.n_flagged])
        tables.append(table)
    return tables


@dataclass
class HoloRunResult:
    tables: List[Table]
    self_check_passed: bool
    max_fraction_error: float
    max_leakage: float
    j1_residual: float
    max_c1_error: float
    png_base64: str
    sidecar: dict


def holo_run(config: ExperimentConfig) -> HoloRunResult:
    """Build the demultiplexing hologram, export it, and verify the whole
    chain: J1 inversion, first-order coefficient, and end-to-end readout
    fractions against the analytic mode projections."""
    spec = config.holo
    grid = Grid2D(spec.nx, spec.ny, spec.pitch_um)
    hologram = build_pm_hologram(grid, config.psf.sigma_um,
                                 spec.carrier_bins_x, spec.carrier_bins_y)

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0x4010)))
    s_sigma = rng.uniform(0.0, spec.check_s_max, size=spec.check_points)
    s_um = s_sigma * config.psf.sigma_um
    fractions, expected, warnings, leakages = demultiplex_fractions(
        hologram, config.psf.sigma_um, s_um,
        spec.focal_length_mm, spec.wavelength_um)

    readout = Table("holo_readout",
                    ["s_sigma", "fraction_readout", "fraction_modes",
                     "abs_error", "overlap_warning"])
    order = np.argsort(s_sigma)
    for i in order:
        readout.rows.append([float(s_sigma[i]), float(fractions[i]),
                             float(expected[i]),
                             float(abs(fractions[i] - expected[i])),
                             int(warnings[i])])

    a_grid = np.linspace(0.05, 1.0, 39)
    x = invert_j1(a_grid)
    j1_residual = float(np.max(np.abs(_bessel_j1(x) - J1_PEAK_VALUE * a_grid)))
    c1_err = max(abs(first_order_coefficient(a) - J1_PEAK_VALUE * a)
                 for a in np.arange(0.1, 1.01, 0.1))

    max_err = float(np.max(np.abs(fractions - expected)))
    self_check = (max_err <= 0.02 and not any(warnings)
                  and j1_residual < 1e-10 and c1_err < 1e-6)
    return HoloRunResult(tables=[readout], self_check_passed=bool(self_check),
                         max_fraction_error=max_err,
                         max_leakage=float(np.max(leakages)),
                         j1_residual=j1_residual, max_c1_error=float(c1_err),
                         png_base64=hologram_png_base64(hologram),
                         sidecar=sidecar_dict(hologram))
