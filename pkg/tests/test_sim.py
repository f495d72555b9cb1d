import numpy as np
import pytest
from scipy.stats import chi2, poisson

from spadesim.core import (DelayJitter, MotionKind, MotionModel, NoiseBudget,
                           SamplingSchedule)
from spadesim.modes import DirectImaging, HgSpade, PmSpade, mu
from spadesim.sim import (expected_counts, rng_for, run_ensemble, run_trial,
                          sample_frame, trial_seed)

PM = PmSpade()


def config():
    model = MotionModel(MotionKind.SINUSOID, amplitude=0.47, f=0.2)
    schedule = SamplingSchedule(50, 20.0)
    noise = NoiseBudget(nu=60.0)
    return model, schedule, noise


class TestSampleFrame:
    def test_balanced_means_at_origin(self):
        rng = rng_for(7)
        draws = np.stack([sample_frame(PM, 0.0, 60.0, 0.0, rng)
                          for _ in range(10_000)])
        band = 3 * np.sqrt(30.0 / 10_000)
        assert abs(draws[:, 0].mean() - 30.0) < band
        assert abs(draws[:, 1].mean() - 30.0) < band

    def test_node_detector_never_fires(self):
        rng = rng_for(8)
        draws = np.stack([sample_frame(PM, 2.0, 60.0, 0.0, rng)
                          for _ in range(2000)])
        assert np.all(draws[:, 1] == 0)

    def test_poisson_variance_identity(self):
        rng = rng_for(9)
        lam = 60.0 * mu(PM, 0.5) + 1.5
        draws = rng.poisson(lam, size=(100_000, 2))
        assert np.allclose(draws.var(axis=0, ddof=1), draws.mean(axis=0), rtol=0.05)


class TestPoissonGoodnessOfFit:
    @pytest.mark.parametrize("s,b_over_nu", [(0.0, 0.0), (0.5, 0.0),
                                             (0.94, 0.05), (0.2, 0.1),
                                             (1.5, 0.02)])
    def test_chi_square_per_detector(self, s, b_over_nu):
        nu = 60.0
        lam = nu * mu(PM, s) + b_over_nu * nu
        rng = rng_for((101, int(s * 100), int(b_over_nu * 100)))
        draws = rng.poisson(lam, size=(100_000, 2))
        for j in range(2):
            lam_j = lam[j]
            if lam_j < 1e-12:
                assert np.all(draws[:, j] == 0)
                continue
            k_max = int(poisson.ppf(1 - 1e-6, lam_j)) + 1
            expected = poisson.pmf(np.arange(k_max), lam_j) * draws.shape[0]
            expected[-1] += draws.shape[0] - expected.sum()
            observed = np.bincount(np.minimum(draws[:, j], k_max - 1),
                                   minlength=k_max).astype(float)
            keep = expected > 5
            stat = np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep])
            p = chi2.sf(stat, keep.sum() - 1)
            assert p > 1e-3


class TestRunTrial:
    def test_final_frame_time(self):
        model, schedule, noise = config()
        trial = run_trial(model, schedule, PM, noise, seed=3)
        assert trial.frames[-1].t == pytest.approx(2.45)
        assert trial.delta_tau == 0.0

    def test_jitter_shifts_every_frame_equally(self):
        model, _, noise = config()
        schedule = SamplingSchedule(50, 20.0, DelayJitter(2.8e-3, 0.48e-3))
        trial = run_trial(model, schedule, PM, noise, seed=4)
        shifts = trial.times() - np.arange(50) / 20.0
        assert np.allclose(shifts, trial.delta_tau)
        assert trial.delta_tau != 0.0

    def test_jitter_distribution_moments(self):
        model, _, noise = config()
        schedule = SamplingSchedule(2, 20.0, DelayJitter(2.8e-3, 0.48e-3))
        taus = [run_trial(model, schedule, PM, noise, seed=(5, i)).delta_tau
                for i in range(4000)]
        assert np.mean(taus) == pytest.approx(2.8e-3, abs=3 * 0.48e-3 / np.sqrt(4000))
        assert np.std(taus) == pytest.approx(0.48e-3, rel=0.1)

    def test_determinism(self):
        model, schedule, noise = config()
        a = run_trial(model, schedule, PM, noise, seed=42)
        b = run_trial(model, schedule, PM, noise, seed=42)
        assert np.array_equal(a.count_matrix(), b.count_matrix())
        assert np.array_equal(a.times(), b.times())
        assert a.delta_tau == b.delta_tau

    def test_counts_shape_matches_scheme(self):
        model, schedule, noise = config()
        hg = HgSpade(21)
        trial = run_trial(model, schedule, hg, noise, seed=6)
        assert trial.count_matrix().shape == (50, 21)


class TestRunEnsemble:
    def test_singleton_equals_run_trial(self):
        model, schedule, noise = config()
        ens = run_ensemble(model, schedule, PM, noise, trials=1, seed=11)
        single = run_trial(model, schedule, PM, noise, seed=trial_seed(11, 0))
        assert np.array_equal(ens[0].count_matrix(), single.count_matrix())

    def test_worker_count_does_not_change_results(self):
        model, schedule, noise = config()
        seq = run_ensemble(model, schedule, PM, noise, 16, seed=12, max_workers=1)
        par = run_ensemble(model, schedule, PM, noise, 16, seed=12, max_workers=4)
        for a, b in zip(seq, par):
            assert np.array_equal(a.count_matrix(), b.count_matrix())

    def test_trials_are_distinct(self):
        model, schedule, noise = config()
        ens = run_ensemble(model, schedule, PM, noise, 3, seed=13)
        assert not np.array_equal(ens[0].count_matrix(), ens[1].count_matrix())

    def test_rejects_zero_trials(self):
        model, schedule, noise = config()
        with pytest.raises(ValueError):
            run_ensemble(model, schedule, PM, noise, 0, seed=1)


class TestExpectedCounts:
    def test_total_signal_bounded_by_nu(self):
        model, schedule, noise = config()
        for scheme in (PM, HgSpade(21)):
            lam = expected_counts(scheme, model, schedule, noise)
            assert np.all(lam.sum(axis=1) <= noise.nu + 1e-9)

    def test_complete_schemes_reach_nu(self):
        model, schedule, noise = config()
        di = DirectImaging.covering(0.05, 0.0, 0.94)
        lam = expected_counts(di, model, schedule, noise)
        assert np.allclose(lam.sum(axis=1), noise.nu, rtol=1e-7)
        hg = HgSpade(120)
        lam = expected_counts(hg, model, schedule, noise)
        assert np.allclose(lam.sum(axis=1), noise.nu, rtol=1e-7)

    def test_background_adds_per_detector(self):
        model, schedule, _ = config()
        noise = NoiseBudget(nu=60.0, b=2.5)
        lam = expected_counts(PM, model, schedule, noise)
        lam0 = expected_counts(PM, model, schedule, NoiseBudget(nu=60.0))
        assert np.allclose(lam - lam0, 2.5)
