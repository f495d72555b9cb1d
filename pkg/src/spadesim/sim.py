"""Seeded Monte Carlo generation of per-frame detector counts.

Counts on detector j in a frame at displacement s are independent
Poisson(nu * mu_j(s) + b) draws.  One trigger-delay offset is drawn per
trial (when enabled) and shifts every frame time of that trial.  Child
seeds are derived from (master seed, trial index) through numpy's
SeedSequence, so an ensemble is reproducible regardless of execution
order or worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .core import MotionModel, NoiseBudget, SamplingSchedule, trajectory
from .modes import Scheme, mu

SeedLike = Union[int, Tuple[int, ...]]

WORKERS_ENV = "SPADESIM_WORKERS"


@dataclass(frozen=True)
class FrameRecord:
    """Integer detector counts for one frame plus its true sampling time."""

    index: int
    t: float
    counts: np.ndarray

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class TrialResult:
    """All frames of one estimation run, with the seed that produced them."""

    frames: Tuple[FrameRecord, ...]
    delta_tau: float
    seed: Tuple[int, ...]

    def count_matrix(self) -> np.ndarray:
        return np.stack([fr.counts for fr in self.frames])

    def times(self) -> np.ndarray:
        return np.array([fr.t for fr in self.frames])


def _seed_tuple(seed: SeedLike) -> Tuple[int, ...]:
    return (seed,) if isinstance(seed, int) else tuple(seed)


def trial_seed(master: SeedLike, trial_index: int) -> Tuple[int, ...]:
    return _seed_tuple(master) + (trial_index,)


def rng_for(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(_seed_tuple(seed)))


def sample_frame(scheme: Scheme, s: float, nu: float, b: float,
                 rng: np.random.Generator, sigma: float = 1.0) -> np.ndarray:
    """Poisson counts over the scheme's detectors at displacement s."""
    lam = nu * mu(scheme, s, sigma) + b
    return rng.poisson(lam)


def run_trial(model: MotionModel, schedule: SamplingSchedule, scheme: Scheme,
              noise: NoiseBudget, seed: SeedLike, sigma: float = 1.0) -> TrialResult:
    """One estimation run: draw the shared delay, then all frame counts.

    The RNG consumption order (delay first, then the full count matrix) is
    part of the reproducibility contract.
    """
    seed_t = _seed_tuple(seed)
    rng = rng_for(seed_t)
    if schedule.delay_jitter is not None:
        delta_tau = float(rng.normal(schedule.delay_jitter.mean_s,
                                     schedule.delay_jitter.sd_s))
    else:
        delta_tau = 0.0
    s_true = trajectory(model, schedule, delta_tau)
    lam = noise.nu * mu(scheme, s_true, sigma) + noise.b
    counts = rng.poisson(lam)
    times = schedule.frame_times(delta_tau)
    frames = tuple(FrameRecord(n, float(times[n]), counts[n])
                   for n in range(schedule.n_frames))
    return TrialResult(frames=frames, delta_tau=delta_tau, seed=seed_t)


def resolve_workers(max_workers: Optional[int] = None) -> int:
    if max_workers is not None:
        return max(1, max_workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return 1


def run_ensemble(model: MotionModel, schedule: SamplingSchedule, scheme: Scheme,
                 noise: NoiseBudget, trials: int, seed: SeedLike,
                 sigma: float = 1.0,
                 max_workers: Optional[int] = None) -> List[TrialResult]:
    """Independent trials with per-trial child seeds, merged in index order."""
    if trials < 1:
        raise ValueError("need at least one trial")
    seeds = [trial_seed(seed, i) for i in range(trials)]
    workers = resolve_workers(max_workers)
    if workers == 1:
        return [run_trial(model, schedule, scheme, noise, s, sigma) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(run_trial, model, schedule, scheme, noise, s, sigma)
                for s in seeds]
        return [f.result() for f in futs]


def expected_counts(scheme: Scheme, model: MotionModel,
                    schedule: SamplingSchedule, noise: NoiseBudget,
                    sigma: float = 1.0, delta_tau: float = 0.0) -> np.ndarray:
    """Noiseless mean count matrix nu * mu(s_n) + b, shape (N, detectors)."""
    s_true = trajectory(model, schedule, delta_tau)
    return noise.nu * mu(scheme, s_true, sigma) + noise.b
