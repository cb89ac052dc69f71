import numpy as np
import pytest
from scipy.optimize import brentq

from hierspin.limits import (LOWER, MIDDLE, UPPER, NoSuchBranchError,
                             critical_points, curve_abscissa, fold_abscissa,
                             g_jump, invariant_curve, jump_target)

BETAS = [1.01, 1.1, 2.0, 5.0, 10.0]


def curve_oracle(beta, x, offset=0.0, bracket=(-1 + 1e-14, 1 - 1e-14)):
    """Independent root of m - tanh(beta (x+m) + offset) via brentq."""
    return brentq(lambda m: m - np.tanh(beta * (x + m) + offset),
                  bracket[0], bracket[1], xtol=1e-15)


class TestCriticalPoints:
    @pytest.mark.parametrize("beta", BETAS)
    def test_identities(self, beta):
        lam, ma = critical_points(beta)
        assert abs(ma - np.tanh(beta * lam)) <= 1e-12
        assert abs(beta * (1 - ma ** 2) - 1.0) <= 1e-12

    def test_closed_form_beta2(self):
        lam, ma = critical_points(2.0)
        assert lam == pytest.approx(0.4406868, abs=1e-6)
        assert ma == pytest.approx(np.sqrt(0.5), abs=1e-12)

    def test_closed_form_beta4(self):
        _, ma = critical_points(4.0)
        assert ma == pytest.approx(np.sqrt(3) / 2, abs=1e-12)

    def test_limit_beta_to_one(self):
        lam, ma = critical_points(1.0 + 1e-9)
        assert lam < 1e-4 and ma < 1e-4

    def test_domain_error(self):
        with pytest.raises(ValueError):
            critical_points(1.0)


class TestJumpTarget:
    def test_beta2_value_against_oracle(self):
        # independent oracle: brentq on g over a fine-scanned bracket
        beta = 2.0
        _, ma = critical_points(beta)
        oracle = brentq(lambda y: g_jump(y, beta), -1 + 1e-9, -ma - 1e-9,
                        xtol=1e-15)
        assert jump_target(beta) == pytest.approx(oracle, abs=1e-12)
        assert jump_target(beta) == pytest.approx(-0.9868, abs=1e-3)

    @pytest.mark.parametrize("beta", BETAS + [30.0, 100.0])
    def test_residual_and_ordering(self, beta):
        mb = jump_target(beta)
        _, ma = critical_points(beta)
        assert abs(g_jump(mb, beta)) <= 1e-10
        assert mb < -ma

    def test_g_vanishes_at_critical_point(self):
        for beta in BETAS:
            _, ma = critical_points(beta)
            assert abs(g_jump(ma, beta)) <= 1e-10

    def test_limit_large_beta(self):
        assert jump_target(100.0) < -0.999

    def test_jump_target_is_lower_branch_at_fold(self):
        # geometric identity: arrival = opposite-branch value at the fold
        for beta in (1.5, 2.0, 5.0):
            xf = fold_abscissa(beta)
            assert invariant_curve(beta, xf, branch=LOWER) == pytest.approx(
                jump_target(beta), abs=1e-10)


class TestInvariantCurve:
    def test_odd_symmetry_zero(self):
        assert invariant_curve(0.5, 0.0) == 0.0

    def test_subcritical_value(self):
        assert invariant_curve(0.5, 1.0) == pytest.approx(
            curve_oracle(0.5, 1.0), abs=1e-12)

    def test_upper_branch_at_fold_equals_ma(self):
        lam, ma = critical_points(2.0)
        assert invariant_curve(2.0, lam - ma, branch=UPPER) == pytest.approx(
            ma, abs=1e-7)

    @pytest.mark.parametrize("beta", [0.0, 0.3, 0.9, 0.99, 1.0])
    def test_residuals_unique_regime(self, beta):
        xs = np.linspace(-4, 4, 41)
        offs = np.linspace(-1, 1, 5)
        for off in offs:
            m = invariant_curve(beta, xs, offset=off)
            res = np.abs(m - np.tanh(beta * (xs + m) + off))
            assert res.max() <= 1e-12

    @pytest.mark.parametrize("branch", [UPPER, LOWER, MIDDLE])
    def test_residuals_supercritical(self, branch):
        beta = 2.0
        xf = fold_abscissa(beta)
        if branch == UPPER:
            xs = np.linspace(xf, xf + 3, 30)
        elif branch == LOWER:
            xs = np.linspace(-xf - 3, -xf, 30)
        else:
            xs = np.linspace(xf, -xf, 30)
        m = invariant_curve(beta, xs, branch=branch)
        res = np.abs(m - np.tanh(beta * (xs + m)))
        assert res.max() <= 1e-12

    def test_branch_ordering(self):
        beta = 2.0
        up = invariant_curve(beta, 0.0, branch=UPPER)
        mid = invariant_curve(beta, 0.0, branch=MIDDLE)
        low = invariant_curve(beta, 0.0, branch=LOWER)
        assert low < mid < up
        assert mid == pytest.approx(0.0, abs=1e-12)

    def test_no_such_branch(self):
        beta = 2.0
        xf = fold_abscissa(beta)
        with pytest.raises(NoSuchBranchError):
            invariant_curve(beta, xf - 0.1, branch=UPPER)
        with pytest.raises(NoSuchBranchError):
            invariant_curve(beta, -xf + 0.1, branch=LOWER)
        with pytest.raises(NoSuchBranchError):
            invariant_curve(beta, -xf + 0.1, branch=MIDDLE)

    def test_offset_form_matches_oracle(self):
        m = invariant_curve(0.3, 0.7, offset=0.4)
        assert m == pytest.approx(curve_oracle(0.3, 0.7, 0.4), abs=1e-12)

    def test_abscissa_roundtrip(self):
        beta = 0.6
        for m in (-0.9, -0.2, 0.4, 0.8):
            x = curve_abscissa(beta, m)
            assert invariant_curve(beta, x) == pytest.approx(m, abs=1e-11)

    def test_beta_zero(self):
        assert invariant_curve(0.0, 3.0, offset=0.25) == pytest.approx(
            np.tanh(0.25), abs=1e-15)
