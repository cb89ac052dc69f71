"""Zero-temperature limit: staircase equilibria, fixed-points region, borders.

With both couplings infinite the rate argument degenerates to a sign and the
order-1 profile dynamics becomes dm(x)/dt = 2 sign(x + m(x) + M + X) - 2m(x).
Its equilibria are +-1 staircases whose admissible thresholds form a closed
interval (the fixed-points region); out-of-region staircases relax to the
region boundary.  sign(0) := 0 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .limits.ode import GridProfile
from .quadrature import GaussianMeasure, cell_weights


@dataclass(frozen=True)
class StaircaseProfile:
    """Up-step profile: -1 for x < threshold, +1 for x > threshold."""

    threshold: float

    def to_grid(self, x_grid, measure: GaussianMeasure) -> GridProfile:
        """Grid version with the node straddling the threshold set to 0."""
        x = np.asarray(x_grid, dtype=float)
        v = np.where(x > self.threshold, 1.0, -1.0)
        v[np.argmin(np.abs(x - self.threshold))] = 0.0
        return GridProfile(x_grid=x, values=v, measure=measure)


@dataclass(frozen=True)
class RegionCheck:
    x0: float
    X: float
    measure: GaussianMeasure
    is_equilibrium: bool
    slack: tuple   # (left inequality, right inequality); both >= 0 inside


def is_equilibrium(x0: float, X: float, measure: GaussianMeasure) -> RegionCheck:
    """Check -2 mu(x0-X, inf) <= x0 + X <= 2 mu(-inf, x0-X) with slacks."""
    cdf = float(measure.cdf(x0 - X))
    left = (x0 + X) + 2.0 * (1.0 - cdf)
    right = 2.0 * cdf - (x0 + X)
    return RegionCheck(x0=x0, X=X, measure=measure,
                       is_equilibrium=bool(left >= 0.0 and right >= 0.0),
                       slack=(float(left), float(right)))


def attractor_threshold(measure: GaussianMeasure, side: str = "right") -> float:
    """Self-consistent boundary threshold x = 2 mu(-inf, x) (right side,
    root in [0, 2]) or x = -2 mu(x, inf) (left side, root in [-2, 0]).

    h(0) >= 0 >= h(2) for centered measures, and 2 cdf(x) - x is concave on
    x > 0, so the bisection target is the unique root.
    """
    if side == "right":
        def h(x):
            return 2.0 * float(measure.cdf(x)) - x
        lo, hi = 0.0, 2.0
    elif side == "left":
        def h(x):
            return -(x + 2.0 * (1.0 - float(measure.cdf(x))))
        lo, hi = -2.0, 0.0   # h(-2) >= 0 >= h(0) for centered measures
    else:
        raise ValueError("side must be left or right")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sign_dynamics(profile0: GridProfile, X: float, T: float, *,
                  h: float = 2e-3, record_every: int = 50):
    """Explicit Euler on the grid sign-ODEs with cell-weight quadrature for M.

    The grid must cover six standard deviations of the profile's measure and
    the interval [-2-|X|, 2+|X|].  Returns (times, profiles, M path).
    """
    xg = profile0.x_grid
    measure = profile0.measure
    lo_need = min(measure.mean - 6.0 * measure.std, -2.0 - abs(X))
    hi_need = max(measure.mean + 6.0 * measure.std, 2.0 + abs(X))
    if xg[0] > lo_need or xg[-1] < hi_need:
        raise ValueError(
            f"grid [{xg[0]:.3g}, {xg[-1]:.3g}] must cover "
            f"[{lo_need:.3g}, {hi_need:.3g}]")
    w = cell_weights(measure, xg)
    n = max(1, int(np.ceil(T / h)))
    v = profile0.values.copy()
    times = [0.0]
    profs = [v.copy()]
    Ms = [float(np.dot(w, v))]
    t = 0.0
    for i in range(n):
        M = float(np.dot(w, v))
        v = v + h * (2.0 * np.sign(xg + v + M + X) - 2.0 * v)
        if np.max(np.abs(v)) > 1.0 + 1e-9:
            raise AssertionError("sign dynamics left [-1, 1]")
        np.clip(v, -1.0, 1.0, out=v)
        t += h
        if (i + 1) % record_every == 0 or i == n - 1:
            times.append(t)
            profs.append(v.copy())
            Ms.append(float(np.dot(w, v)))
    return np.array(times), np.array(profs), np.array(Ms)


def profile_rhs(profile: GridProfile, X: float) -> np.ndarray:
    """Instantaneous velocity 2 sign(x + m + M + X) - 2m on the grid."""
    w = cell_weights(profile.measure, profile.x_grid)
    M = float(np.dot(w, profile.values))
    return 2.0 * np.sign(profile.x_grid + profile.values + M + X) \
        - 2.0 * profile.values


@dataclass
class RegionBorders:
    """Root sets of the two border equations per X, with the regime flag."""

    X_grid: np.ndarray
    left: list     # list of arrays of M roots (left border) per X
    right: list
    regime: str    # "graph" if each border has exactly one root per X

    def to_csv(self, path):
        from .sim import CSV_SCHEMA_VERSION
        with open(path, "w") as fh:
            fh.write(f"# {CSV_SCHEMA_VERSION} region\n")
            fh.write("X,M_left,M_right,regime\n")
            for i, X in enumerate(self.X_grid):
                nrow = max(len(self.left[i]), len(self.right[i]), 1)
                for j in range(nrow):
                    ml = self.left[i][j] if j < len(self.left[i]) else np.nan
                    mr = self.right[i][j] if j < len(self.right[i]) else np.nan
                    fh.write(f"{X!r},{ml!r},{mr!r},{self.regime}\n")


def _border_roots(X: float, rho: float, side: str, n_scan: int = 2001):
    """All M in [-1,1] with M = 1 - 2 Phi((c - 2X - M)/rho), c = -1 (left), +1."""
    c = -1.0 if side == "left" else 1.0
    from scipy.special import ndtr

    def F(M):
        return M - (1.0 - 2.0 * ndtr((c - 2.0 * X - M) / rho))

    Ms = np.linspace(-1.0, 1.0, n_scan)
    vals = F(Ms)
    roots = []
    for i in range(n_scan - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(Ms[i])
        elif a * b < 0.0:
            lo, hi = Ms[i], Ms[i + 1]
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if F(lo) * F(mid) <= 0.0:
                    hi = mid
                else:
                    lo = mid
            roots.append(0.5 * (lo + hi))
    if vals[-1] == 0.0:
        roots.append(Ms[-1])
    return np.array(roots)


def region_borders(sigma: float, alpha2: float, X_grid) -> RegionBorders:
    """Fixed-points region borders in the (X, M) plane.

    Solves M = 1 - 2 mu_X(-inf, -+1 - X - M) for each X by a 2001-point scan
    plus bisection in every sign-change bracket, where mu_X has variance
    sigma^2/(2 alpha2).  The regime is "graph" when both borders define
    functions of X (exactly one root everywhere), "folded" otherwise.
    """
    if sigma <= 0 or alpha2 <= 0:
        raise ValueError("sigma and alpha2 must be positive")
    rho = sigma / np.sqrt(2.0 * alpha2)
    Xs = np.asarray(X_grid, dtype=float)
    left = [_border_roots(X, rho, "left") for X in Xs]
    right = [_border_roots(X, rho, "right") for X in Xs]
    graph = all(len(r) == 1 for r in left) and all(len(r) == 1 for r in right)
    return RegionBorders(X_grid=Xs, left=left, right=right,
                         regime="graph" if graph else "folded")
