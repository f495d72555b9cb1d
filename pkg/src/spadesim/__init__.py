"""Simulation and estimation of micro-oscillation frequency measurement
with direct imaging and spatial-mode demultiplexing."""

__version__ = "0.1.0"

from .core import (DelayJitter, MotionKind, MotionModel, NoiseBudget, Psf,
                   SamplingSchedule, UnsupportedGradientError, displacement,
                   displacement_gradient, trajectory)
from .modes import (DirectImaging, HgSpade, PmSpade, gamma, gamma_ceiling,
                    gamma_pm_ideal, mu, mu_gradient)
from .fisher import (FisherReport, cfi, fisher_report, qcrb_frequency,
                     qfi_ideal, qfi_noisy)
from .sim import FrameRecord, TrialResult, run_ensemble, run_trial, sample_frame
from .estimate import (DisplacementEstimate, FitTemplate, FrequencyEstimate,
                       SearchWindow, ensemble_stats, lse_frequency,
                       mle_displacement)

__all__ = [name for name in dir() if not name.startswith("_")]
