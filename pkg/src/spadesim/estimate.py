"""Two-stage estimation: per-frame ML displacement, then LS frequency fit.

Both stages use a coarse global grid followed by local refinement, because
the Poisson log-likelihood in s and the residual sum in f are multimodal.
Degenerate inputs (flat likelihood, constant trajectories) yield flagged
estimates that downstream statistics exclude and count separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import xlogy

from .core import MotionKind, MotionModel, SamplingSchedule
from .modes import HgSpade, Scheme, mu
from .sim import FrameRecord, TrialResult

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
_FLAT_RTOL = 1e-9


@dataclass(frozen=True)
class SearchWindow:
    """Displacement search interval with grid and refinement tolerance."""

    lo: float
    hi: float
    n_grid: int = 400
    tol: float = 1e-4

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("empty search interval")
        if self.n_grid < 8:
            raise ValueError("grid too coarse")

    @classmethod
    def for_motion(cls, model: MotionModel, scheme: Scheme,
                   sigma: float = 1.0, **kw) -> "SearchWindow":
        """Default window [-sigma, s_peak + sigma].

        HG mode probabilities are even in s, so the sign of the
        displacement is unidentifiable there; the window floors at 0,
        relying on the models' guarantee that the motion never goes
        negative.
        """
        hi = model.peak_displacement() + sigma
        lo = 0.0 if isinstance(scheme, HgSpade) else -sigma
        return cls(lo, hi, **kw)

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_grid)


@dataclass(frozen=True)
class DisplacementEstimate:
    s_hat: float
    log_likelihood: float
    frame_index: int
    flagged: bool = False


@dataclass(frozen=True)
class FrequencyEstimate:
    f_hat: float
    rss: float
    flagged: bool = False


@dataclass(frozen=True)
class FitTemplate:
    """Fixed-shape sinusoid model for the frequency fit.

    For square-wave motion the template is the fundamental Fourier
    component, amplitude and offset 4A/pi.
    """

    amplitude: float
    phase: float = 0.0
    offset: Optional[float] = None

    @property
    def offset_value(self) -> float:
        return self.amplitude if self.offset is None else self.offset

    @classmethod
    def for_motion(cls, model: MotionModel) -> "FitTemplate":
        if model.kind is MotionKind.SQUARE_WAVE:
            fund = model.fourier_fundamental()
            return cls(fund.amplitude, fund.phase, fund.offset_value)
        if model.kind is MotionKind.SINUSOID:
            return cls(model.amplitude, model.phase, model.offset_value)
        raise ValueError("no oscillation to fit for constant motion")

    def evaluate(self, f: float, n: np.ndarray) -> np.ndarray:
        return (self.amplitude * np.sin(2 * np.pi * f * n + self.phase)
                + self.offset_value)


@dataclass(frozen=True)
class EnsembleStats:
    mean: float
    variance: float
    rescaled_variance: float
    n: int


@lru_cache(maxsize=64)
def _grid_table(scheme: Scheme, nu: float, b: float, window: SearchWindow,
                sigma: float):
    s_grid = window.grid()
    lam = nu * mu(scheme, s_grid, sigma) + b
    log_lam = np.log(np.maximum(lam, 1e-300))
    return s_grid, lam, log_lam, lam.sum(axis=-1)


def _neg_log_likelihood(counts: np.ndarray, scheme: Scheme, nu: float, b: float,
                        s: np.ndarray, sigma: float) -> np.ndarray:
    lam = nu * mu(scheme, s, sigma) + b
    return lam.sum(axis=-1) - xlogy(counts, lam).sum(axis=-1)


def _refine_golden(counts: np.ndarray, scheme: Scheme, nu: float, b: float,
                   lo: np.ndarray, hi: np.ndarray, tol: float,
                   sigma: float) -> np.ndarray:
    """Vectorized golden-section minimization of the per-frame negative
    log-likelihood, one bracket per frame."""
    n_iter = int(np.ceil(np.log(tol / max(np.max(hi - lo), tol))
                         / np.log(_INVPHI))) + 2
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1 = _neg_log_likelihood(counts, scheme, nu, b, x1, sigma)
    f2 = _neg_log_likelihood(counts, scheme, nu, b, x2, sigma)
    for _ in range(max(n_iter, 1)):
        left = f1 < f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        # the interior point that survives the cut becomes the far probe;
        # one fresh evaluation per iteration at the near probe
        xs = np.where(left, x1, x2)
        fs = np.where(left, f1, f2)
        xn = np.where(left, hi - _INVPHI * (hi - lo), lo + _INVPHI * (hi - lo))
        fn = _neg_log_likelihood(counts, scheme, nu, b, xn, sigma)
        x1 = np.where(left, xn, xs)
        f1 = np.where(left, fn, fs)
        x2 = np.where(left, xs, xn)
        f2 = np.where(left, fs, fn)
    return (lo + hi) / 2


def estimate_trajectory(counts: np.ndarray, scheme: Scheme, nu: float, b: float,
                        window: SearchWindow, sigma: float = 1.0
                        ) -> Tuple[np.ndarray, np.ndarray]:
    """ML displacement for every frame of a count matrix at once.

    Returns (s_hat, flagged) arrays of length N.  Ties and flat
    likelihoods resolve toward the smaller displacement.
    """
    counts = np.asarray(counts, dtype=float)
    s_grid, _, log_lam, lam_tot = _grid_table(scheme, nu, b, window, sigma)
    ll = counts @ log_lam.T - lam_tot
    ll_max = ll.max(axis=1)
    tie_atol = _FLAT_RTOL * np.maximum(1.0, np.abs(ll_max))
    # first grid point within numerical-noise distance of the maximum:
    # exact and near ties resolve toward the smaller displacement
    idx = np.argmax(ll >= (ll_max - tie_atol)[:, None], axis=1)
    flagged = ll_max - ll.min(axis=1) <= tie_atol
    lo = s_grid[np.maximum(idx - 1, 0)]
    hi = s_grid[np.minimum(idx + 1, len(s_grid) - 1)]
    s_hat = _refine_golden(counts, scheme, nu, b, lo, hi, window.tol, sigma)
    s_hat = np.where(flagged, s_grid[idx], s_hat)
    return s_hat, flagged


def mle_displacement(frame: Union[FrameRecord, np.ndarray], scheme: Scheme,
                     nu: float, b: float, window: SearchWindow,
                     sigma: float = 1.0) -> DisplacementEstimate:
    """Maximum-likelihood displacement for a single frame."""
    if isinstance(frame, FrameRecord):
        counts, index = frame.counts, frame.index
    else:
        counts, index = np.asarray(frame), 0
    s_hat, flagged = estimate_trajectory(counts[None, :], scheme, nu, b,
                                         window, sigma)
    ll = -_neg_log_likelihood(counts.astype(float), scheme, nu, b,
                              np.asarray(s_hat), sigma)
    return DisplacementEstimate(float(s_hat[0]), float(ll[0]), index,
                                bool(flagged[0]))


def default_frequency_grid(n_frames: int, lo: float = 0.02,
                           hi: float = 0.48) -> np.ndarray:
    """Global search grid with spacing 1/(40 N); dense enough that the
    correct lobe of the multimodal residual surface is always bracketed."""
    return np.arange(lo, hi, 1.0 / (40 * n_frames))


def _phase_by_regression(resid: np.ndarray, theta: np.ndarray) -> float:
    # Linear sin/cos regression; direction of the coefficient vector.
    s, c = np.sin(theta), np.cos(theta)
    m = np.array([[s @ s, s @ c], [s @ c, c @ c]])
    v = np.array([resid @ s, resid @ c])
    try:
        alpha, beta = np.linalg.solve(m, v)
    except np.linalg.LinAlgError:
        return 0.0
    return float(np.arctan2(beta, alpha))


def lse_frequency(s_hats: Sequence[float], schedule: SamplingSchedule,
                  template: FitTemplate,
                  f_grid: Optional[np.ndarray] = None,
                  fit_phase: bool = False) -> FrequencyEstimate:
    """Least-squares frequency from per-frame displacement estimates.

    Minimizes sum_n (s_hat_n - template(f, n))^2 over the dimensionless
    frequency on a dense grid followed by bounded parabolic refinement
    between the winning grid point's neighbours.  A, phase (and offset)
    stay fixed; ``fit_phase=True`` additionally refits the phase at each
    candidate frequency by linear sin/cos regression.
    """
    s_hats = np.asarray(s_hats, dtype=float)
    if s_hats.size < 4:
        raise ValueError("need at least four frames for a frequency fit")
    if not np.all(np.isfinite(s_hats)):
        raise ValueError("displacement estimates contain NaN or inf")
    n = np.arange(schedule.n_frames)
    if s_hats.shape != n.shape:
        raise ValueError("one displacement estimate per frame required")
    if f_grid is None:
        f_grid = default_frequency_grid(schedule.n_frames)

    if np.ptp(s_hats) < 1e-12:
        return FrequencyEstimate(float(f_grid[0]), float("nan"), flagged=True)

    def rss(f: float) -> float:
        if fit_phase:
            theta = 2 * np.pi * f * n
            ph = _phase_by_regression(s_hats - template.offset_value, theta)
            model = template.amplitude * np.sin(theta + ph) + template.offset_value
        else:
            model = template.evaluate(f, n)
        return float(np.sum((s_hats - model) ** 2))

    if fit_phase:
        rss_grid = np.array([rss(f) for f in f_grid])
    else:
        model = (template.amplitude
                 * np.sin(2 * np.pi * np.outer(f_grid, n) + template.phase)
                 + template.offset_value)
        rss_grid = np.sum((s_hats - model) ** 2, axis=1)

    if np.ptp(rss_grid) <= _FLAT_RTOL * max(1.0, float(rss_grid.max())):
        return FrequencyEstimate(float(f_grid[0]), float(rss_grid[0]), flagged=True)

    i = int(np.argmin(rss_grid))
    lo = float(f_grid[max(i - 1, 0)])
    hi = float(f_grid[min(i + 1, len(f_grid) - 1)])
    res = minimize_scalar(rss, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-9})
    return FrequencyEstimate(float(res.x), float(res.fun))


def estimate_frequency(trial: TrialResult, scheme: Scheme, nu: float, b: float,
                       window: SearchWindow, template: FitTemplate,
                       schedule: SamplingSchedule, sigma: float = 1.0,
                       fit_phase: bool = False) -> FrequencyEstimate:
    """Full pipeline for one trial: per-frame MLE, then the LSE fit.

    A trial whose frames are all flagged yields a flagged frequency.
    """
    s_hat, frame_flags = estimate_trajectory(trial.count_matrix(), scheme,
                                             nu, b, window, sigma)
    if np.all(frame_flags):
        return FrequencyEstimate(float("nan"), float("nan"), flagged=True)
    return lse_frequency(s_hat, schedule, template, fit_phase=fit_phase)


def ensemble_stats(f_hats: Sequence[float], nu: float) -> EnsembleStats:
    """Sample mean, unbiased variance and the photon-rescaled variance."""
    f_hats = np.asarray(f_hats, dtype=float)
    if f_hats.size < 2:
        raise ValueError("need at least two estimates")
    var = float(f_hats.var(ddof=1))
    return EnsembleStats(float(f_hats.mean()), var, nu * var, int(f_hats.size))
