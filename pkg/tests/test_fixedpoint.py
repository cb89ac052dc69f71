import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from hierspin.limits import (averaging_fixed_point, invariant_curve,
                             lipschitz_ledger, orderN2_law,
                             renormalization_map)
from hierspin.model import HierarchyShape, ModelParams
from hierspin.quadrature import GaussianMeasure


def orderN2_oracle(b1, b2, sigma, alpha2, X):
    """Independent nested fixed point via scipy quad + brentq."""
    rho2 = sigma ** 2 / (2 * alpha2)

    def m_of_x(x, M):
        return brentq(lambda m: m - np.tanh(b1 * (x + m) + b2 * (X + M)),
                      -1 + 1e-14, 1 - 1e-14, xtol=1e-14)

    M = 0.0
    for _ in range(300):
        val, _ = quad(lambda x: m_of_x(x, M)
                      * np.exp(-(x - X) ** 2 / (2 * rho2))
                      / np.sqrt(2 * np.pi * rho2),
                      X - 12 * np.sqrt(rho2), X + 12 * np.sqrt(rho2), limit=300)
        if abs(val - M) < 1e-13:
            return val
        M = val
    return M


class TestOrderN2Law:
    def test_symmetry_at_zero(self):
        assert orderN2_law(0.3, 0.3, 1.0, 1.0, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_reference_value(self):
        M = orderN2_law(0.3, 0.3, 1.0, 1.0, 2.0)
        assert M == pytest.approx(orderN2_oracle(0.3, 0.3, 1.0, 1.0, 2.0),
                                  abs=1e-8)
        assert M > 0.9
        assert M == pytest.approx(0.94, abs=0.01)

    def test_monotone_in_X(self):
        Xs = np.linspace(-3, 3, 13)
        vals = [orderN2_law(0.3, 0.3, 1.0, 1.0, X) for X in Xs]
        assert np.all(np.diff(vals) > 0)

    def test_unconditional_equals_X_average_of_conditionals(self):
        b1, b2, sigma, alpha2, t = 0.3, 0.3, 1.0, 1.0, 0.7
        grid = GaussianMeasure(0.0, sigma ** 2 * t)
        from hierspin.quadrature import gh_nodes
        qX, qw = gh_nodes(grid, 160)
        avg = float(np.dot(qw, [orderN2_law(b1, b2, sigma, alpha2, float(x))
                                for x in qX]))
        unc = orderN2_law(b1, b2, sigma, alpha2, 0.0, t=t, mode="unconditional")
        assert unc == pytest.approx(avg, abs=1e-8)

    def test_unconditional_symmetric_mean_zero(self):
        assert orderN2_law(0.3, 0.3, 1.0, 1.0, 0.0, t=0.5,
                           mode="unconditional") == pytest.approx(0.0, abs=1e-9)

    def test_contraction_violation_raises(self):
        with pytest.raises(ValueError):
            orderN2_law(0.6, 0.5, 1.0, 1.0, 1.0)


class TestAveragingFixedPoint:
    def test_odd_symmetry(self):
        def f(xi, xb, U, M):
            return np.tanh(xi + M)
        samples = np.array([-2.0, -1.0, 1.0, 2.0])
        assert averaging_fixed_point(f, samples=samples, U=0.0) == pytest.approx(
            0.0, abs=1e-12)

    def test_constant_in_M(self):
        def f(xi, xb, U, M):
            return np.cos(xi)
        samples = np.array([0.0, np.pi / 2, np.pi])
        assert averaging_fixed_point(f, samples=samples) == pytest.approx(
            np.mean(np.cos(samples)), abs=1e-12)

    def test_lln_convergence_to_quadrature_form(self):
        # the self-consistency map from the order-N^2 analysis
        b1, b2 = 0.3, 0.3
        sigma, alpha2 = 1.0, 1.0
        U = 0.8

        def phi(xi, xb, U_, M):
            return invariant_curve(b1, xi - xb + U_, offset=b2 * (U_ + M))

        mu = GaussianMeasure(0.0, sigma ** 2 / (2 * alpha2))
        target = averaging_fixed_point(phi, measure=mu, U=U)
        gen = np.random.default_rng(123)
        errs = []
        for n in (10 ** 3, 10 ** 5):
            xi = mu.std * gen.standard_normal(n)
            M_emp = averaging_fixed_point(phi, samples=xi, xi_bar=0.0, U=U)
            errs.append(abs(M_emp - target))
        assert errs[-1] < 0.01
        assert errs[-1] < errs[0]

    def test_divergence_detected(self):
        def f(xi, xb, U, M):
            return 2.0 * M + 1.0 + 0.0 * xi
        with pytest.raises(RuntimeError):
            averaging_fixed_point(f, samples=np.array([0.0]), max_iter=100)


class TestRenormalizationMap:
    def params(self, k=3, beta=(0.3, 0.3, 0.3)):
        return ModelParams(shape=HierarchyShape(k, 4), beta=beta,
                           alpha=tuple(1.0 for _ in range(k)), sigma=1.0)

    def test_level1_is_invariant_curve(self):
        p = self.params(k=2, beta=(0.3, 0.3))
        for x, y in [(0.0, 0.0), (0.7, -0.2), (-1.2, 0.5)]:
            val, _ = renormalization_map(1, p, x, y)
            assert val == invariant_curve(0.3, x, offset=y)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_odd_symmetry_at_origin(self, d):
        val, _ = renormalization_map(d, self.params(), 0.0, 0.0)
        assert val == pytest.approx(0.0, abs=1e-10)

    def test_ledger_matches_recursion(self):
        beta = (0.3, 0.3, 0.3)
        _, ledger = renormalization_map(3, self.params(beta=beta), 0.5, 0.0)
        L = [1.0]
        for b in beta:
            L.append(L[-1] / (1.0 - L[-1] * b))
        assert ledger == L

    def test_two_level_ledger_values(self):
        # L1 = 1/(1-0.3) exceeds 1, yet every step L_{d-1} beta_d < 1
        L = lipschitz_ledger((0.3, 0.3))
        assert L[1] == pytest.approx(1.0 / 0.7, abs=1e-12)
        assert L[1] > 1.0
        assert L[0] * 0.3 < 1.0 and L[1] * 0.3 < 1.0

    def test_ledger_violation_raises(self):
        with pytest.raises(ValueError):
            lipschitz_ledger((0.5, 0.4, 0.3, 0.3))  # L grows past 1/beta

    def test_monotone_in_x(self):
        p = self.params(k=2, beta=(0.3, 0.3))
        vals = [renormalization_map(2, p, x, 0.0)[0] for x in (-1.0, 0.0, 1.0)]
        assert vals[0] < vals[1] < vals[2]

    def test_subcriticality_required(self):
        p = ModelParams(shape=HierarchyShape(2, 4), beta=(0.6, 0.6),
                        alpha=(1.0, 1.0), sigma=1.0)
        with pytest.raises(ValueError):
            renormalization_map(2, p, 0.0, 0.0)
