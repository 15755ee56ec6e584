import math

import numpy as np
import pytest
from scipy import stats

import hjsim
from hjsim.diffusion import (EulerMaruyama, ExactOU, IntegratorConfig,
                             advance_diffusion, advance_diffusion_many,
                             apply_state_jump)
from hjsim.model import (CoefficientSpec, ConstantDiffusion, ConstantJump,
                         BoundedSmoothDrift, LinearDampingJump, LinearDrift)
from hjsim.rng import RandomStream


def coeffs(rate=1.0, intercept=0.0, sigma=1.0, jump=None):
    return CoefficientSpec(LinearDrift(rate, intercept), ConstantDiffusion(sigma),
                           jump or ConstantJump(0.0))


class TestDeterministicLimits:
    def test_exact_decay_without_noise(self):
        cfg = IntegratorConfig(ExactOU(), 0.1)
        x = advance_diffusion(1.0, 1.0, coeffs(sigma=0.0), cfg, RandomStream(0))
        assert x == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_pure_drift(self):
        cfg = IntegratorConfig(ExactOU(), 0.1)
        x = advance_diffusion(0.0, 2.5, coeffs(rate=0.0, intercept=1.0, sigma=0.0),
                              cfg, RandomStream(0))
        assert x == pytest.approx(2.5, rel=1e-12)

    def test_euler_first_order_convergence_deterministic(self):
        errors = []
        hs = [1e-1, 1e-2, 1e-3]
        for h in hs:
            cfg = IntegratorConfig(EulerMaruyama(h), 0.1)
            x = advance_diffusion(1.0, 1.0, coeffs(sigma=0.0), cfg, RandomStream(0))
            errors.append(abs(x - math.exp(-1.0)))
        slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.05)

    def test_zero_noise_consumes_no_draws(self):
        cfg = IntegratorConfig(EulerMaruyama(0.01), 0.1)
        rng = RandomStream(77)
        advance_diffusion(1.0, 1.0, coeffs(sigma=0.0), cfg, rng)
        assert rng.uniform() == RandomStream(77).uniform()


class TestExactTransition:
    def test_chained_law_matches_single_step(self):
        cfg = IntegratorConfig(ExactOU(), 0.1)
        cs = coeffs(rate=0.7, intercept=0.3, sigma=0.9)
        n = 100_000
        rng = RandomStream(11)
        one = advance_diffusion_many(np.full(n, 1.5), 0.9, cs, cfg, rng)
        rng2 = RandomStream(12)
        two = advance_diffusion_many(
            advance_diffusion_many(np.full(n, 1.5), 0.4, cs, cfg, rng2),
            0.5, cs, cfg, rng2)
        assert stats.ks_2samp(one, two).pvalue > 0.01

    def test_zero_rate_moments(self):
        cfg = IntegratorConfig(ExactOU(), 0.1)
        cs = coeffs(rate=0.0, intercept=0.5, sigma=2.0)
        xs = advance_diffusion_many(np.zeros(200_000), 2.0, cs, cfg, RandomStream(3))
        assert xs.mean() == pytest.approx(1.0, abs=0.03)
        assert xs.var() == pytest.approx(8.0, rel=0.02)

    def test_rejects_nonlinear_drift(self):
        cfg = IntegratorConfig(ExactOU(), 0.1)
        cs = CoefficientSpec(BoundedSmoothDrift(1.0, 1.0), ConstantDiffusion(1.0),
                             ConstantJump(0.0))
        with pytest.raises(ValueError):
            advance_diffusion(0.0, 1.0, cs, cfg, RandomStream(0))

    def test_rejects_nonpositive_dt(self):
        cfg = IntegratorConfig(ExactOU(), 0.1)
        with pytest.raises(ValueError):
            advance_diffusion(0.0, 0.0, coeffs(), cfg, RandomStream(0))


class TestWeakError:
    def test_mean_and_variance_errors_decay_linearly(self):
        # exact moments after dt = 1 from x0 = 1: mean e^{-1}, var (1 - e^{-2})/2
        exact_mean = math.exp(-1.0)
        exact_var = (1.0 - math.exp(-2.0)) / 2.0
        n = 100_000
        hs = [0.2, 0.1, 0.05]
        mean_err, var_err = [], []
        for k, h in enumerate(hs):
            cfg = IntegratorConfig(EulerMaruyama(h), 0.1)
            xs = advance_diffusion_many(np.ones(n), 1.0, coeffs(), cfg,
                                        RandomStream(100 + k))
            mean_err.append(abs(xs.mean() - exact_mean))
            var_err.append(abs(xs.var() - exact_var))
        for errs in (mean_err, var_err):
            slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
            assert 0.75 <= slope <= 1.25

    def test_partial_substep_lands_exactly(self):
        # dt = 0.25 with step 0.1 runs substeps 0.1, 0.1, 0.05 (deterministic check)
        cfg = IntegratorConfig(EulerMaruyama(0.1), 0.1)
        x = advance_diffusion(1.0, 0.25, coeffs(sigma=0.0), cfg, RandomStream(0))
        expected = 1.0
        for s in (0.1, 0.1, 0.05):
            expected = expected - expected * s
        assert x == pytest.approx(expected, rel=1e-14)


class TestJumps:
    def test_constant_jump(self):
        cs = coeffs(jump=ConstantJump(1.0))
        assert apply_state_jump(0.0, cs) == 1.0

    def test_damping_jump(self):
        cs = coeffs(jump=LinearDampingJump(0.5))
        assert apply_state_jump(4.0, cs) == 2.0

    def test_zero_jump_is_identity(self):
        cs = coeffs(jump=ConstantJump(0.0))
        assert apply_state_jump(1.234, cs) == 1.234
