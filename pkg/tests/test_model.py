import numpy as np
import pytest
from hypothesis import given, strategies as st

from hierspin.model import (HierarchyShape, ModelParams, SystemState,
                            UnsupportedConfigurationError, block_observables,
                            flip_rate, local_flip_argument)


def make_params(k=2, N=4, beta=None, zero_temperature=False, **kw):
    if beta is None and not zero_temperature:
        beta = tuple(0.2 for _ in range(k))
    return ModelParams(shape=HierarchyShape(k, N),
                       beta=beta if not zero_temperature else (),
                       alpha=tuple(1.0 for _ in range(k)),
                       zero_temperature=zero_temperature, **kw)


class TestShape:
    def test_total_sites(self):
        assert HierarchyShape(3, 4).n_sites == 64

    def test_block_of(self):
        sh = HierarchyShape(2, 3)
        assert sh.block_of(7, 1) == 2
        assert sh.block_of(7, 2) == 0
        assert sh.n_blocks(1) == 3
        assert sh.n_blocks(2) == 1

    def test_site_tuple_components_in_range(self):
        sh = HierarchyShape(2, 3)
        for s in range(sh.n_sites):
            t = sh.site_tuple(s)
            assert len(t) == 2 and all(1 <= c <= 3 for c in t)

    def test_invalid_site(self):
        with pytest.raises(IndexError):
            HierarchyShape(1, 4).block_of(4, 1)


class TestParams:
    def test_subcritical_predicate(self):
        assert make_params(beta=(0.4, 0.5)).is_subcritical
        assert not make_params(beta=(0.5, 0.5)).is_subcritical

    def test_zero_temperature_excludes_beta(self):
        with pytest.raises(UnsupportedConfigurationError):
            ModelParams(shape=HierarchyShape(1, 2), beta=(1.0,), alpha=(0.0,),
                        zero_temperature=True)

    def test_beta_length_checked(self):
        with pytest.raises(ValueError):
            make_params(k=2, beta=(0.5,))


class TestFlipRate:
    def test_zero_argument(self):
        assert flip_rate(1, 0.0, make_params()) == 1.0

    def test_numeric_value(self):
        # spin=-1, arg=0.5 -> 1 + tanh(0.5)
        r = flip_rate(-1, 0.5, make_params())
        assert r == pytest.approx(1.0 + np.tanh(0.5), abs=1e-15)

    def test_zero_temperature_aligned_never_flips(self):
        p = make_params(zero_temperature=True)
        assert flip_rate(1, 3.0, p) == 0.0
        assert flip_rate(1, -3.0, p) == 2.0
        assert flip_rate(1, 0.0, p) == 1.0

    @given(st.floats(-50, 50), st.sampled_from([-1, 1]))
    def test_rates_sum_to_two(self, z, s):
        p = make_params()
        assert flip_rate(s, z, p) + flip_rate(-s, z, p) == pytest.approx(2.0)

    @given(st.floats(-50, 50), st.sampled_from([-1, 1]))
    def test_rate_bounds(self, z, s):
        assert 0.0 <= flip_rate(s, z, make_params()) <= 2.0

    @given(st.floats(-20, 20), st.floats(-20, 20))
    def test_monotone_in_alignment(self, z1, z2):
        # rate decreasing in spin*argument
        p = make_params()
        a, b = sorted([z1, z2])
        assert flip_rate(1, a, p) >= flip_rate(1, b, p) - 1e-12


def random_state(shape, gen):
    spins = np.where(gen.random(shape.n_sites) < 0.5, 1, -1).astype(np.int8)
    fields = gen.standard_normal(shape.n_sites)
    return SystemState(time=0.0, spins=spins, fields=fields)


class TestBlockObservables:
    def test_all_up(self):
        sh = HierarchyShape(2, 3)
        st_ = SystemState(0.0, np.ones(9, dtype=np.int8), np.zeros(9))
        obs = block_observables(st_, sh)
        for d in (1, 2):
            assert np.all(obs.magnetization[d - 1] == 1.0)

    def test_symmetric_cancellation(self):
        sh = HierarchyShape(1, 4)
        st_ = SystemState(0.0, np.array([1, 1, -1, -1], dtype=np.int8), np.zeros(4))
        assert block_observables(st_, sh).top[0] == 0.0

    def test_hand_count_k2(self):
        sh = HierarchyShape(2, 2)
        st_ = SystemState(0.0, np.array([1, 1, 1, -1], dtype=np.int8), np.zeros(4))
        obs = block_observables(st_, sh)
        assert list(obs.magnetization[0]) == [1.0, 0.0]
        assert obs.top[0] == 0.5

    @given(st.integers(0, 2 ** 32 - 1))
    def test_aggregation_identity_exact(self, seed):
        # integer spin sums: parent sum equals the sum of child sums exactly
        sh = HierarchyShape(3, 3)
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0],
                                                                dtype=np.uint64)))
        s = random_state(sh, gen)
        sums = s.spins.astype(np.int64)
        for d in range(1, 4):
            parent = sums.reshape(-1, 3).sum(axis=1)
            assert np.array_equal(parent,
                                  s.spins.astype(np.int64).reshape(-1, 3 ** d).sum(axis=1))
            sums = parent

    def test_mean_identity_floats(self):
        sh = HierarchyShape(2, 5)
        gen = np.random.default_rng(3)
        s = random_state(sh, gen)
        obs = block_observables(s, sh)
        child_mean = obs.magnetization[0].reshape(-1, 5).mean(axis=1)
        np.testing.assert_allclose(child_mean, obs.magnetization[1], atol=1e-15)


class TestLocalFlipArgument:
    def test_all_zero(self):
        sh = HierarchyShape(1, 4)
        s = SystemState(0.0, np.array([1, 1, -1, -1], dtype=np.int8), np.zeros(4))
        p = ModelParams(shape=sh, beta=(0.5,), alpha=(0.0,))
        assert local_flip_argument(s, p, 0) == 0.0

    def test_matches_two_level_form_bitwise(self):
        # beta1 (x_j + m_j) + beta2 (X + M), same block averages
        sh = HierarchyShape(2, 3)
        gen = np.random.default_rng(11)
        s = random_state(sh, gen)
        beta = (0.7, 0.25)
        p = ModelParams(shape=sh, beta=beta, alpha=(0.0, 0.0))
        obs = block_observables(s, sh)
        for site in [0, 4, 8]:
            j = sh.block_of(site, 1)
            expect = (beta[0] * (obs.field_avg[0][j] + obs.magnetization[0][j])
                      + beta[1] * (obs.field_avg[1][0] + obs.magnetization[1][0]))
            assert local_flip_argument(s, p, site, obs) == expect

    def test_derived_weighted_sum(self):
        # k=2, beta=(1,1), m_j=0.5, x_j=0.1, M=0.2, X=0 -> 0.8
        sh = HierarchyShape(2, 2)
        p = ModelParams(shape=sh, beta=(1.0, 1.0), alpha=(0.0, 0.0))
        from hierspin.model import BlockObservables
        obs = BlockObservables(
            shape=sh,
            magnetization=[np.array([0.5, -0.1]), np.array([0.2])],
            field_avg=[np.array([0.1, -0.1]), np.array([0.0])])
        s = SystemState(0.0, np.ones(4, dtype=np.int8), np.zeros(4))
        z = local_flip_argument(s, p, 0, obs)
        assert z == pytest.approx(1.0 * 0.6 + 1.0 * 0.2, abs=1e-15)

    def test_zero_temperature_unweighted(self):
        sh = HierarchyShape(2, 2)
        p = ModelParams(shape=sh, alpha=(0.0, 0.0), zero_temperature=True)
        from hierspin.model import BlockObservables
        obs = BlockObservables(
            shape=sh,
            magnetization=[np.array([0.5, -0.1]), np.array([0.2])],
            field_avg=[np.array([0.1, -0.1]), np.array([0.0])])
        s = SystemState(0.0, np.ones(4, dtype=np.int8), np.zeros(4))
        assert local_flip_argument(s, p, 0, obs) == pytest.approx(0.6 + 0.2)
