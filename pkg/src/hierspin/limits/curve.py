"""The self-consistency curve m = tanh(b*(x+m) + offset) and its geometry.

For b <= 1 the equation has a unique root in (-1, 1).  For b > 1 the curve
folds: in the effective coordinate xt = x + offset/b it carries an upper
branch (m >= m_a) for xt >= lam_a - m_a, a lower branch (m <= -m_a) for
xt <= m_a - lam_a, and an unstable middle branch in between, where
(lam_a, m_a) is the fold point with curve slope exactly 1.
"""

from __future__ import annotations

import numpy as np

UPPER, LOWER, MIDDLE = "upper", "lower", "middle"
_BRANCHES = (UPPER, LOWER, MIDDLE)

_EDGE = 1.0 - 1e-15


class NoSuchBranchError(ValueError):
    """The requested branch does not exist at this abscissa (past a fold)."""


def critical_points(beta: float):
    """Fold point (lam_a, m_a) of the curve, defined for beta > 1.

    lam_a = arctanh(sqrt(1 - 1/beta)) / beta and m_a = sqrt(1 - 1/beta),
    so that m_a = tanh(beta * lam_a) and beta * (1 - m_a^2) = 1.
    """
    if beta <= 1.0:
        raise ValueError(f"critical points exist only for beta > 1, got {beta}")
    m_a = np.sqrt(1.0 - 1.0 / beta)
    lam_a = np.arctanh(m_a) / beta
    return float(lam_a), float(m_a)


def fold_abscissa(beta: float) -> float:
    """xt-coordinate lam_a - m_a where the upper branch ends (negative)."""
    lam_a, m_a = critical_points(beta)
    return lam_a - m_a


def g_jump(y, beta: float):
    """2*beta*(y - m_a + lam_a) - log(1+y) + log(1-y); roots are the curve
    values at the fold abscissa (the tangency m_a and the jump target m_b)."""
    lam_a, m_a = critical_points(beta)
    y = np.asarray(y, dtype=float)
    out = 2.0 * beta * (y - m_a + lam_a) - np.log1p(y) + np.log1p(-y)
    return float(out) if out.ndim == 0 else out


def jump_target(beta: float) -> float:
    """Root m_b of g_jump on (-1, -m_a): the arrival point of the limit jump."""
    lam_a, m_a = critical_points(beta)
    eps = 1e-3
    lo, hi = -1.0 + eps, -m_a - eps
    while (lo >= hi or g_jump(lo, beta) <= 0.0 or g_jump(hi, beta) >= 0.0):
        eps *= 0.25
        if eps < 1e-300:
            raise RuntimeError(f"failed to bracket jump target for beta={beta}")
        lo, hi = -1.0 + eps, -m_a - eps
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g_jump(mid, beta) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    m_b = 0.5 * (lo + hi)
    if abs(g_jump(m_b, beta)) > 1e-10:
        raise RuntimeError(f"jump target residual too large at beta={beta}")
    return float(m_b)


def _h(m, beta, xt):
    return m - np.tanh(beta * (xt + m))


def _bisect(beta, xt, lo, hi, iters=90):
    lo = np.broadcast_to(np.asarray(lo, dtype=float), xt.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), xt.shape).copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = _h(mid, beta, xt) < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    m = 0.5 * (lo + hi)
    # two Newton polish steps; h'(m) = 1 - beta*sech^2 > 0 inside a branch
    for _ in range(2):
        th = np.tanh(beta * (xt + m))
        d = 1.0 - beta * (1.0 - th * th)
        step = np.where(np.abs(d) > 1e-9, (m - th) / np.where(d == 0, 1.0, d), 0.0)
        m_new = m - step
        ok = (m_new > lo - 1e-12) & (m_new < hi + 1e-12)
        m = np.where(ok, m_new, m)
    return m


def invariant_curve(beta1: float, x, offset=0.0, branch: str = UPPER):
    """Solve m = tanh(beta1*(x+m) + offset) on the requested branch.

    Broadcasts over x and offset.  For beta1 <= 1 the root is unique and the
    branch label is ignored.  Raises NoSuchBranchError when the requested
    branch does not exist at some abscissa (the caller is past a fold).
    Residual |m - tanh(...)| <= 1e-12.
    """
    if branch not in _BRANCHES:
        raise ValueError(f"branch must be one of {_BRANCHES}")
    if beta1 < 0:
        raise ValueError("beta1 must be nonnegative")
    x = np.asarray(x, dtype=float)
    offset = np.asarray(offset, dtype=float)
    scalar = x.ndim == 0 and offset.ndim == 0
    if beta1 == 0.0:
        m = np.broadcast_to(np.tanh(offset), np.broadcast_shapes(x.shape, offset.shape)).copy()
        return float(m) if scalar else m
    xt = np.asarray(x + offset / beta1, dtype=float)
    xt = np.atleast_1d(xt)

    if beta1 < 1.0:
        # fixed-point iteration (contraction factor beta1), Newton finish
        m = np.tanh(beta1 * xt)
        for _ in range(200):
            m_new = np.tanh(beta1 * (xt + m))
            done = np.max(np.abs(m_new - m)) < 1e-15
            m = m_new
            if done:
                break
        for _ in range(100):
            th = np.tanh(beta1 * (xt + m))
            r = m - th
            if np.max(np.abs(r)) < 1e-13:
                break
            d = 1.0 - beta1 * (1.0 - th * th)
            m = np.clip(m - r / d, -1.0, 1.0)
    elif beta1 == 1.0:
        m = _bisect(beta1, xt, -_EDGE, _EDGE)
    else:
        lam_a, m_a = critical_points(beta1)
        xf = lam_a - m_a
        if branch == UPPER:
            if np.any(xt < xf - 1e-13):
                raise NoSuchBranchError(
                    f"upper branch requires xt >= {xf:.6g}")
            m = _bisect(beta1, np.maximum(xt, xf), m_a, _EDGE)
        elif branch == LOWER:
            if np.any(xt > -xf + 1e-13):
                raise NoSuchBranchError(
                    f"lower branch requires xt <= {-xf:.6g}")
            m = _bisect(beta1, np.minimum(xt, -xf), -_EDGE, -m_a)
        else:
            if np.any(np.abs(xt) > -xf + 1e-13):
                raise NoSuchBranchError(
                    f"middle branch requires |xt| <= {-xf:.6g}")
            # h decreases through the middle root: flip the bisection sense
            m = _bisect_middle(beta1, np.clip(xt, xf, -xf), -m_a, m_a)
    res = np.abs(m - np.tanh(beta1 * (xt + m)))
    if np.max(res) > 1e-12:
        raise RuntimeError(f"curve residual {np.max(res):.3g} exceeds 1e-12")
    return float(m[0]) if scalar else m.reshape(np.broadcast_shapes(x.shape, offset.shape))


def _bisect_middle(beta, xt, lo, hi, iters=90):
    lo = np.broadcast_to(np.asarray(lo, dtype=float), xt.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), xt.shape).copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = _h(mid, beta, xt) > 0.0   # h decreasing on the middle branch
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi)


def branch_exists(beta1: float, x, offset=0.0, branch: str = UPPER) -> bool:
    if beta1 <= 1.0:
        return True
    xt = float(x) + float(offset) / beta1
    xf = fold_abscissa(beta1)
    if branch == UPPER:
        return xt >= xf
    if branch == LOWER:
        return xt <= -xf
    return abs(xt) <= -xf


def curve_abscissa(beta1: float, m) -> np.ndarray:
    """Inverse map: the x with m = tanh(beta1*(x+m)), i.e. arctanh(m)/b - m."""
    m = np.asarray(m, dtype=float)
    return np.arctanh(m) / beta1 - m


def tabulate(beta1: float, x_grid, offset: float = 0.0):
    """(x, m, branch) rows for every branch present; plot-ready."""
    rows = []
    for branch in (LOWER, MIDDLE, UPPER):
        for x in np.asarray(x_grid, dtype=float):
            if branch_exists(beta1, x, offset, branch):
                if beta1 <= 1.0 and branch != UPPER:
                    continue
                m = invariant_curve(beta1, x, offset, branch)
                rows.append((float(x), float(m), branch))
    return rows
