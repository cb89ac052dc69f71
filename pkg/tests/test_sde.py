import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from hierspin.limits import (critical_points, hier_drift, hitting_time_cdf,
                             hitting_time_pdf, jump_target,
                             limit_sde_hier_orderN, limit_sde_meanfield,
                             limit_sde_meanfield_batch, meanfield_diffusion,
                             meanfield_drift, em_paths_same_noise)
from hierspin.rng import SeedSpec


class TestHittingTimeCdf:
    def test_immediate_hit(self):
        assert hitting_time_cdf(0.3, 0.3, 1.0, 0.5) == 1.0
        assert hitting_time_cdf(0.3, 0.3, 1.0, 0.0) == 1.0

    def test_zero_time_no_hit(self):
        assert hitting_time_cdf(1.0, 0.0, 1.0, 0.0) == 0.0

    def test_reference_value(self):
        assert hitting_time_cdf(1.0, 0.0, 1.0, 1.0) == pytest.approx(
            2 * norm.cdf(-1.0), abs=1e-12)
        assert hitting_time_cdf(1.0, 0.0, 1.0, 1.0) == pytest.approx(
            0.31731, abs=1e-5)

    def test_tends_to_one(self):
        assert hitting_time_cdf(1.0, 0.0, 1.0, 1e8) > 1 - 1e-3

    def test_pdf_integrates_to_cdf(self):
        x0, a, sig, t = 0.7, -0.1, 1.3, 2.0
        val, _ = quad(lambda s: hitting_time_pdf(x0, a, sig, s), 0, t)
        assert val == pytest.approx(hitting_time_cdf(x0, a, sig, t), abs=1e-8)


class TestCoefficients:
    def test_diffusion_at_zero(self):
        # sigma*beta/(1-beta) at m=0
        assert meanfield_diffusion(0.0, 0.5, 1.0) == pytest.approx(1.0)
        assert meanfield_diffusion(0.0, 0.25, 2.0) == pytest.approx(2 * 0.25 / 0.75)

    def test_drift_vanishes_at_zero_and_borders(self):
        assert meanfield_drift(0.0, 0.5, 1.0) == 0.0
        assert meanfield_drift(1.0, 0.5, 1.0) == 0.0
        assert hier_drift(0.0, 0.5, 1.0, 1.0) == 0.0


class TestSubcriticalMeanfield:
    def test_symmetry_of_law(self):
        R = 2000
        finals = limit_sde_meanfield_batch(0.5, 1.0, 0.0, 1.0, 99, R, dt=5e-3)
        se = finals.std(ddof=1) / np.sqrt(R)
        assert abs(finals.mean()) < 3 * se

    def test_path_on_curve(self):
        from hierspin.limits import invariant_curve
        p = limit_sde_meanfield(0.5, 1.0, 0.2, 1.0, SeedSpec(5), dt=1e-3)
        np.testing.assert_allclose(p.m, invariant_curve(0.5, p.x), atol=1e-11)

    def test_strong_error_halves_with_step(self):
        # curve-mapped exact path vs direct EM of the 1-d SDE, same noise
        beta, sigma, T = 0.5, 1.0, 1.0
        from hierspin.limits import invariant_curve

        def run(n_steps, seed):
            gen = SeedSpec(seed).generator(substream=9)
            h = T / n_steps
            dW = gen.standard_normal(n_steps) * np.sqrt(h)
            x = np.zeros(n_steps + 1)
            m_em = np.zeros(n_steps + 1)
            for i in range(n_steps):
                x[i + 1] = x[i] + sigma * dW[i]
                mm = np.clip(m_em[i], -0.999999, 0.999999)
                m_em[i + 1] = np.clip(
                    m_em[i] + meanfield_drift(mm, beta, sigma) * h
                    + meanfield_diffusion(mm, beta, sigma) * dW[i], -1, 1)
            return np.max(np.abs(invariant_curve(beta, x) - m_em))

        errs_coarse = [run(1000, s) for s in range(8)]
        errs_fine = [run(4000, s) for s in range(8)]
        assert np.mean(errs_fine) < np.mean(errs_coarse)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            limit_sde_meanfield(1.5, 1.0, 0.0, 1.0, SeedSpec(1), "subcritical")
        with pytest.raises(ValueError):
            limit_sde_meanfield(2.0, 1.0, 0.3, 1.0, SeedSpec(1), "supercritical")


class TestSupercriticalMeanfield:
    def test_jumps_depart_at_critical_and_arrive_at_target(self):
        beta, sigma = 2.0, 2.0
        _, ma = critical_points(beta)
        mb = jump_target(beta)
        p = limit_sde_meanfield(beta, sigma, 0.9, 4.0, SeedSpec(31),
                                "supercritical", dt=2e-4)
        jumps = np.flatnonzero(p.jump_flag)
        assert len(jumps) >= 2
        for j in jumps:
            dep, arr = p.m[j - 1], p.m[j]
            assert abs(abs(dep) - ma) < 0.02
            assert abs(abs(arr) - abs(mb)) < 0.02
            assert np.sign(dep) == -np.sign(arr)

    def test_branch_alternates(self):
        p = limit_sde_meanfield(2.0, 2.0, 0.9, 4.0, SeedSpec(32),
                                "supercritical", dt=2e-4)
        jumps = np.flatnonzero(p.jump_flag)
        if len(jumps) >= 2:
            br = p.branch[jumps]
            assert np.all(br[1:] != br[:-1])

    def test_literal_increment_mode(self):
        beta = 2.0
        mb = jump_target(beta)
        p = limit_sde_meanfield(beta, 2.0, 0.9, 4.0, SeedSpec(33),
                                "supercritical", dt=2e-4,
                                literal_jump_increment=True)
        jumps = np.flatnonzero(p.jump_flag)
        assert len(jumps) >= 1
        # the raw increment lands at -m_b (same sign as departure)
        j = jumps[0]
        assert p.m[j] == pytest.approx(-mb, abs=1e-9)


class TestHierOrderN:
    def test_drift_zero_at_origin(self):
        assert hier_drift(0.0, 0.5, 1.0, 2.0) == 0.0

    def test_symmetric_long_run(self):
        p = limit_sde_hier_orderN(0.5, 1.0, 1.0, 50.0, SeedSpec(77), dt=2e-3)
        n = len(p.m)
        tail = p.m[n // 5:]
        skew = np.mean(tail ** 3) / np.std(tail) ** 3
        assert abs(skew) < 0.35   # symmetric stationary law, loose bound

    def test_em_self_consistency_halving(self):
        errs = []
        for n_steps in (1000, 4000):
            e = []
            for s in range(6):
                gen = SeedSpec(1000 + s).generator(substream=9)
                t, m_map, m_dir = em_paths_same_noise(0.5, 1.0, 1.0, 1.0,
                                                      n_steps, gen)
                e.append(np.max(np.abs(m_map - m_dir)))
            errs.append(np.mean(e))
        assert errs[1] < errs[0]

    def test_domain_error(self):
        with pytest.raises(ValueError):
            limit_sde_hier_orderN(1.2, 1.0, 1.0, 1.0, SeedSpec(1))
