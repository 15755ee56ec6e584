import math

import numpy as np
import pytest
from scipy import stats

import hjsim
from hjsim.diagnostics import (autocorr_decay, invariant_histogram,
                               mixing_curve, regular_samples, states_at,
                               time_average, tv_histogram)
from hjsim.rng import derive_path_seed

from helpers import ou_cfg, pure_ou_model, reference_model


class TestTimeAverage:
    def test_constant_observable_is_exact(self):
        path = hjsim.simulate_path(reference_model(), 50.0, ou_cfg(0.5), seed=1)
        est = time_average(path, "one", burn_in=5.0)
        assert est.value == 1.0
        assert est.standard_error == 0.0

    def test_ou_second_moment(self):
        # stationary law N(0, 1/2): mean of x^2 is 0.5
        path = hjsim.simulate_path(pure_ou_model(), 2_000.0, ou_cfg(0.05), seed=2)
        est = time_average(path, "x2", burn_in=200.0)
        assert est.batch_count >= 20
        assert abs(est.value - 0.5) <= 3 * est.standard_error

    def test_ou_first_moment(self):
        path = hjsim.simulate_path(pure_ou_model(), 2_000.0, ou_cfg(0.05), seed=3)
        est = time_average(path, "x", burn_in=200.0)
        assert abs(est.value) <= 3 * est.standard_error

    def test_burn_in_must_leave_data(self):
        path = hjsim.simulate_path(reference_model(), 10.0, ou_cfg(0.5), seed=4)
        with pytest.raises(ValueError):
            time_average(path, "x", burn_in=10.0)

    def test_rate_observable_requires_model(self):
        path = hjsim.simulate_path(reference_model(), 10.0, ou_cfg(0.5), seed=5)
        with pytest.raises(ValueError):
            time_average(path, "rate")


class TestRegularSamples:
    def test_grid_extraction(self):
        model = reference_model()
        path = hjsim.simulate_path(model, 20.0, ou_cfg(0.5), seed=6)
        t, x, rs = regular_samples(path, 0.5, burn_in=2.0)
        assert t[0] == pytest.approx(2.0)
        assert t[-1] == pytest.approx(20.0)
        assert np.all(np.diff(t) == pytest.approx(0.5))
        assert len(x) == len(t) and rs.shape == (len(t), 1)

    def test_states_at_recorded_times(self):
        model = reference_model()
        path = hjsim.simulate_path(model, 10.0, ou_cfg(10.0), seed=7,
                                   sample_at=[1.25, 6.5])
        x, rs = states_at(path, [0.0, 1.25, 6.5])
        assert x[0] == model.initial.x
        with pytest.raises(ValueError):
            states_at(path, [3.33])


class TestInvariantHistogram:
    def _ou_ensemble(self, n=4_000, seed=0):
        # two samples per path spaced 4 time units: effectively independent
        model = pure_ou_model()
        return [hjsim.simulate_path(model, 8.0, ou_cfg(4.0),
                                    derive_path_seed(seed, i)) for i in range(n)]

    def test_masses_normalised(self):
        paths = self._ou_ensemble(n=300)
        est = invariant_histogram(paths, bins=20, compact=(-1, 1),
                                  grid_dt=4.0, burn_in=4.0)
        assert abs(est.bin_masses.sum() - 1.0) <= 1e-9

    def test_ou_matches_gaussian_stationary_law(self):
        paths = self._ou_ensemble()
        xs = np.concatenate([regular_samples(p, 4.0, 4.0)[1] for p in paths])
        sd = math.sqrt(0.5)
        k = 40
        edges = sd * stats.norm.ppf(np.linspace(0, 1, k + 1))
        counts, _ = np.histogram(xs, bins=np.concatenate([[-np.inf], edges[1:-1], [np.inf]]))
        chi2 = ((counts - len(xs) / k) ** 2 / (len(xs) / k)).sum()
        p = 1 - stats.chi2.cdf(chi2, df=k - 1)
        assert p > 0.01

    def test_law_symmetry(self):
        paths = self._ou_ensemble(n=2_000, seed=5)
        xs = np.concatenate([regular_samples(p, 4.0, 4.0)[1] for p in paths])
        frac_pos = np.mean(xs > 0)
        se = math.sqrt(0.25 / len(xs))
        assert abs(frac_pos - 0.5) <= 4 * se

    def test_positivity_on_compact_for_jump_model(self):
        model = reference_model()
        paths = [hjsim.simulate_path(model, 260.0, ou_cfg(0.02),
                                     derive_path_seed(77, i)) for i in range(4)]
        est = invariant_histogram(paths, bins=50, compact=(-1, 1),
                                  grid_dt=0.02, burn_in=26.0)
        assert est.min_mass_on_compact > 0

    def test_empty_ensemble_rejected(self):
        with pytest.raises(ValueError):
            invariant_histogram([], bins=10, compact=(-1, 1), grid_dt=0.1)


class TestTvHistogram:
    def test_identical_samples_give_zero(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(500, 2))
        assert tv_histogram(a, a, bins=10) == 0.0

    def test_disjoint_samples_give_one(self):
        a = np.zeros((100, 1))
        b = np.ones((100, 1)) * 10
        assert tv_histogram(a, b, bins=5) == 1.0

    def test_bounds(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(400, 2))
        b = rng.normal(size=(400, 2)) + 0.5
        tv = tv_histogram(a, b, bins=8)
        assert 0.0 <= tv <= 1.0


class TestMixingCurve:
    def test_deterministic_start_separation_at_time_zero(self):
        model = reference_model()
        curve = mixing_curve(model, hjsim.State(-3.0, np.zeros((1, 1))),
                             hjsim.State(3.0, np.array([[3.0]])),
                             times=[0.0, 1.0, 2.0, 4.0], n_paths=200, bins=10,
                             cfg=ou_cfg(4.0), master_seed=1)
        assert curve.tv_estimates[0] == 1.0

    def test_same_start_sits_at_noise_floor(self):
        model = reference_model()
        z = hjsim.State(0.0, np.zeros((1, 1)))
        times = np.array([1.0, 2.0, 3.0])
        blocks = []
        for seed in (10, 11):
            paths = [hjsim.simulate_path(model, 3.0, ou_cfg(3.0),
                                         derive_path_seed(seed, i), sample_at=times)
                     for i in range(400)]
            block = np.empty((400, len(times), 2))
            for i, p in enumerate(paths):
                x, rs = states_at(p, times)
                block[i, :, 0] = x
                block[i, :, 1:] = rs
            blocks.append(block)
        for k in range(len(times)):
            tv = tv_histogram(blocks[0][:, k, :], blocks[1][:, k, :], bins=10)
            floor = tv_histogram(blocks[0][:200, k, :], blocks[0][200:, k, :], bins=10)
            assert tv <= max(3 * floor, 0.3)

    def test_subcritical_model_decays(self):
        model = reference_model()
        curve = mixing_curve(model, hjsim.State(-4.0, np.zeros((1, 1))),
                             hjsim.State(4.0, np.array([[4.0]])),
                             times=np.arange(1.0, 9.0), n_paths=1_500, bins=12,
                             cfg=ou_cfg(8.0), master_seed=3)
        assert curve.fitted_rate > 0
        assert curve.fit_r2 > 0.7
        used = curve.fit_mask
        tau = stats.kendalltau(curve.times[used], curve.tv_estimates[used]).statistic
        assert tau < 0

    def test_validation(self):
        model = reference_model()
        z = hjsim.State(0.0, np.zeros((1, 1)))
        with pytest.raises(ValueError):
            mixing_curve(model, z, z, times=[1.0], n_paths=10, bins=5, cfg=ou_cfg(1.0))
        with pytest.raises(ValueError):
            mixing_curve(model, z, z, times=[1.0, 2.0], n_paths=1, bins=5,
                         cfg=ou_cfg(1.0))


class TestAutocorrelation:
    def test_ou_rate_recovered(self):
        path = hjsim.simulate_path(pure_ou_model(), 5_000.0, ou_cfg(0.1), seed=14)
        fit = autocorr_decay(path, "x", lags=np.arange(0.2, 2.2, 0.2),
                             grid_dt=0.1, burn_in=100.0)
        assert fit.rate == pytest.approx(1.0, abs=0.15)
        assert fit.r_squared > 0.95

    def test_reference_model_decays(self):
        path = hjsim.simulate_path(reference_model(), 5_000.0, ou_cfg(0.1), seed=15)
        fit = autocorr_decay(path, "rate", lags=np.arange(0.2, 3.0, 0.2),
                             grid_dt=0.1, burn_in=100.0, model=reference_model())
        assert fit.rate > 0
        assert fit.r_squared > 0.8

    def test_poisson_window_indicator_uncorrelated_at_long_lags(self):
        # indicator of an event in the last unit window, Poisson rate 1:
        # windows 5+ time units apart are independent
        from helpers import poisson_model
        model = poisson_model((1.0,))
        path = hjsim.simulate_path(model, 20_000.0, ou_cfg(1.0), seed=16)
        ev = path.event_times

        def recent_event(t, x, rs):
            return (np.searchsorted(ev, t) - np.searchsorted(ev, t - 1.0) > 0).astype(float)

        fit = autocorr_decay(path, recent_event, lags=[5.0, 8.0, 11.0],
                             grid_dt=1.0, burn_in=10.0)
        assert np.all(np.abs(fit.correlations) < 0.05)
        assert math.isnan(fit.rate)
