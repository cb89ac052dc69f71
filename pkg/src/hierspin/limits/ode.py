"""Deterministic limit dynamics: the order-1 ODEs and their equilibria."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..quadrature import GaussianMeasure, gh_nodes, integrate_adaptive
from .curve import invariant_curve


@dataclass
class GridProfile:
    """Magnetization profile x -> m(x) on a grid, weighted by a Gaussian law."""

    x_grid: np.ndarray
    values: np.ndarray
    measure: GaussianMeasure

    def __post_init__(self):
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.x_grid.ndim != 1 or self.x_grid.shape != self.values.shape:
            raise ValueError("x_grid and values must be matching 1-d arrays")
        if np.any(np.diff(self.x_grid) <= 0):
            raise ValueError("x_grid must be strictly increasing")
        if np.any(np.abs(self.values) > 1.0 + 1e-12):
            raise ValueError("profile values must lie in [-1, 1]")

    def at(self, x):
        return np.interp(x, self.x_grid, self.values)


def default_grid(measure: GaussianMeasure, n: int = 513, pad: float = 6.0,
                 extra_halfwidth: float = 0.0) -> np.ndarray:
    half = max(pad * max(measure.std, 1e-12), extra_halfwidth)
    return np.linspace(measure.mean - half, measure.mean + half, n)


def _check_coverage(measure: GaussianMeasure, x_grid: np.ndarray):
    if measure.mass_outside(x_grid[0], x_grid[-1]) > 1e-6:
        raise ValueError("grid too narrow: quadrature mass outside grid > 1e-6")


def meanfield_ode(beta: float, lambda0: float, m0: float, T: float,
                  h: float = 1e-3):
    """RK4 path of the order-1 mean-field system.

    Both components share one vector field, so lambda(t) - m(t) is constant;
    this is enforced exactly by integrating m alone and translating.
    Returns (t, lam, m) arrays.
    """
    if not -1.0 <= m0 <= 1.0:
        raise ValueError("m0 must lie in [-1, 1]")
    c = lambda0 - m0
    n = max(1, int(np.ceil(T / h)))
    ts = np.linspace(0.0, T, n + 1)
    m = np.empty(n + 1)
    m[0] = m0

    def f(v):
        return 2.0 * np.tanh(beta * (v + c)) - 2.0 * v

    for i in range(n):
        dt = ts[i + 1] - ts[i]
        k1 = f(m[i])
        k2 = f(m[i] + 0.5 * dt * k1)
        k3 = f(m[i] + 0.5 * dt * k2)
        k4 = f(m[i] + dt * k3)
        m[i + 1] = m[i] + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return ts, m + c, m


def order1_profile_ode(beta1: float, beta2: float, measure: GaussianMeasure,
                       x_bar: float, profile0: GridProfile, T: float,
                       h: float = 1e-3, quad_order: int = 96):
    """RK4 on the grid ODEs  dm(x)/dt = 2 tanh(b1(x+m(x)) + b2(Xbar+M)) - 2m(x)
    with M(t) the Gauss-Hermite average of the profile against `measure`.

    The vector field maps [-1,1]-valued profiles to [-1,1]-valued profiles,
    so no clamping is applied.  Returns (times, profiles[n_t, n_x], M[n_t]).
    """
    _check_coverage(measure, profile0.x_grid)
    xg = profile0.x_grid
    qx, qw = gh_nodes(measure, quad_order)

    def M_of(v):
        return float(np.dot(qw, np.interp(qx, xg, v)))

    def f(v):
        return 2.0 * np.tanh(beta1 * (xg + v) + beta2 * (x_bar + M_of(v))) - 2.0 * v

    n = max(1, int(np.ceil(T / h)))
    ts = np.linspace(0.0, T, n + 1)
    out = np.empty((n + 1, len(xg)))
    Ms = np.empty(n + 1)
    v = profile0.values.copy()
    out[0] = v
    Ms[0] = M_of(v)
    for i in range(n):
        dt = ts[i + 1] - ts[i]
        k1 = f(v)
        k2 = f(v + 0.5 * dt * k1)
        k3 = f(v + 0.5 * dt * k2)
        k4 = f(v + dt * k3)
        v = v + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = v
        Ms[i + 1] = M_of(v)
    return ts, out, Ms


def equilibrium_profile(beta1: float, beta2: float, measure: GaussianMeasure,
                        x_bar: float, *, tol: float = 1e-12,
                        quad_order: int = 128, damping: float | None = None,
                        x_grid: np.ndarray | None = None):
    """Self-consistent long-time profile and its mean magnetization.

    Solves M = E_mu[ m(x) ] with m(x) = tanh(b1(x+m(x)) + b2(Xbar+M)) by an
    outer fixed point on M (inner solves on the curve).  Requires the outer
    contraction b2/(1-b1) < 1 unless a damping factor in (0,1] is supplied
    explicitly.  Returns (GridProfile, M).
    """
    if beta1 >= 1.0 or beta2 / (1.0 - beta1) >= 1.0:
        if damping is None:
            raise ValueError(
                "outer fixed point not a contraction (needs beta2/(1-beta1) < 1); "
                "pass damping to attempt anyway")
    delta = 1.0 if damping is None else float(damping)
    qx, qw = gh_nodes(measure, quad_order)
    M = 0.0
    for _ in range(100_000):
        mvals = invariant_curve(beta1, qx, offset=beta2 * (x_bar + M))
        M_new = (1.0 - delta) * M + delta * float(np.dot(qw, mvals))
        if abs(M_new - M) <= tol:
            M = M_new
            break
        M = M_new
    else:
        raise RuntimeError("equilibrium profile fixed point did not converge")
    if x_grid is None:
        x_grid = default_grid(measure)
    prof = GridProfile(
        x_grid=x_grid,
        values=invariant_curve(beta1, x_grid, offset=beta2 * (x_bar + M)),
        measure=measure)
    return prof, float(M)
