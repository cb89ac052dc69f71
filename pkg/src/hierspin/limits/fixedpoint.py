"""Quadrature fixed points: the order-N^2 law, averaging, renormalization."""

from __future__ import annotations

import numpy as np

from ..model import ModelParams
from ..quadrature import GaussianMeasure, gh_nodes
from .curve import invariant_curve


def _conditional_fixed_point(beta1, beta2, measure, X, order, tol):
    """Solve M = E_mu[m(x)] with m(x) = tanh(b1(x+m(x)) + b2(X+M))."""
    qx, qw = gh_nodes(measure, order)
    L = beta2 / (1.0 - beta1)
    M = 0.0
    for _ in range(200_000):
        mvals = invariant_curve(beta1, qx, offset=beta2 * (X + M))
        M_new = float(np.dot(qw, mvals))
        if abs(M_new - M) <= tol * max(1e-3, 1.0 - L):
            return M_new
        M = M_new
    raise RuntimeError("conditional fixed point did not converge")


def orderN2_law(beta1: float, beta2: float, sigma: float, alpha2: float,
                X: float, t: float = 0.0, mode: str = "conditional", *,
                tol: float = 1e-10) -> float:
    """Limit of the top-level magnetization at the order-N^2 timescale.

    conditional: the deterministic value M given the current top field X,
    i.e. the fixed point of M = int m(x) N(X, sigma^2/(2 alpha2))(dx) with
    m(x) on the curve with offset b2(X+M); independent of t.

    unconditional: the limit law of M(t) is the conditional value evaluated
    at a N(0, sigma^2 t) top field; this mode returns its mean, computed by
    an outer Gauss-Hermite average of conditional solves.  (The mixture of
    the two Gaussian layers is the closed-form N(0, sigma^2(1+2 alpha2 t)
    /(2 alpha2)) field marginal.)

    Quadrature order doubles (16..256) until |dM| <= tol.
    """
    if not beta1 + beta2 < 1.0:
        raise ValueError("requires beta1 + beta2 < 1")
    if alpha2 <= 0 or sigma <= 0:
        raise ValueError("sigma and alpha2 must be positive")
    mu_inf = GaussianMeasure(0.0, sigma ** 2 / (2.0 * alpha2))

    if mode == "conditional":
        prev = None
        order = 16
        while order <= 256:
            cur = _conditional_fixed_point(
                beta1, beta2, GaussianMeasure(X, mu_inf.variance), X, order, tol)
            if prev is not None and abs(cur - prev) <= tol:
                return cur
            prev, order = cur, order * 2
        return prev
    if mode == "unconditional":
        if t < 0:
            raise ValueError("t must be nonnegative")
        if t == 0.0:
            return orderN2_law(beta1, beta2, sigma, alpha2, 0.0,
                               mode="conditional", tol=tol)
        Qt = GaussianMeasure(0.0, sigma ** 2 * t)
        prev = None
        order = 16
        while order <= 256:
            qX, qw = gh_nodes(Qt, order)
            vals = [orderN2_law(beta1, beta2, sigma, alpha2, float(xx),
                                mode="conditional", tol=tol) for xx in qX]
            cur = float(np.dot(qw, vals))
            if prev is not None and abs(cur - prev) <= tol:
                return cur
            prev, order = cur, order * 2
        return prev
    raise ValueError("mode must be conditional or unconditional")


def averaging_fixed_point(f, samples=None, xi_bar: float = 0.0, U: float = 0.0,
                          measure: GaussianMeasure | None = None, *,
                          tol: float = 1e-12, max_iter: int = 10_000,
                          quad_order: int = 128) -> float:
    """Unique solution of M = mean_j f(xi_j, xi_bar, U, M) (Lipschitz-in-M < 1).

    With `samples` the empirical mean over the given xi values is used; with
    `measure` the limit form M = int f(u, 0, U, M) mu(du) is evaluated by
    Gauss-Hermite.  Divergence within max_iter signals L >= 1 in practice.
    """
    if (samples is None) == (measure is None):
        raise ValueError("provide exactly one of samples or measure")
    if samples is not None:
        xi = np.asarray(samples, dtype=float)
        w = np.full(len(xi), 1.0 / len(xi))
        xb = xi_bar
    else:
        xi, w = gh_nodes(measure, quad_order)
        xb = 0.0
    M = 0.0
    for _ in range(max_iter):
        M_new = float(np.dot(w, f(xi, xb, U, M)))
        if abs(M_new - M) <= tol:
            return M_new
        M = M_new
    raise RuntimeError(
        "averaging fixed point did not converge (is the Lipschitz constant < 1?)")


def lipschitz_ledger(beta: tuple) -> list:
    """L_d = L_{d-1} / (1 - L_{d-1} beta_d) starting from L_0 = 1.

    Raises if some L_{d-1} * beta_d >= 1 (recursion not well-posed).
    """
    L = [1.0]
    for d, b in enumerate(beta, start=1):
        if L[-1] * b >= 1.0:
            raise ValueError(
                f"level-{d} contraction fails: L_{d - 1} * beta_{d} = "
                f"{L[-1] * b:.4g} >= 1")
        L.append(L[-1] / (1.0 - L[-1] * b))
    return L


def renormalization_map(d: int, params: ModelParams, x, y, t: float = 1.0, *,
                        tol: float = 1e-12, quad_order: int = 64):
    """Level-d block-magnetization functional phi_d(x, y) of the k-level model.

    phi_1(x, y) solves phi = tanh(b1(phi + x) + y); for d >= 2,
    phi_d solves phi = int phi_{d-1}(z, b_d(phi + x) + y) mtilde(dz) where
    mtilde is the Gaussian mixture of the level-d transition kernel at time
    t with the level-(d-1) stationary conditional law.  Broadcasts over x.

    Returns (value, ledger) with the certified Lipschitz constants
    L_0..L_d; requires overall subcriticality sum(beta) < 1.
    """
    k = params.shape.levels
    if not 1 <= d <= k:
        raise ValueError(f"d must be in 1..{k}")
    if params.zero_temperature or not params.is_subcritical:
        raise ValueError("renormalization recursion requires sum(beta) < 1")
    ledger = lipschitz_ledger(params.beta[:d])
    val = _phi(d, params, np.asarray(x, dtype=float), np.asarray(y, dtype=float),
               t, tol, quad_order)
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        val = float(val)
    return val, ledger


def _mixture_measure(d: int, params: ModelParams, t: float) -> GaussianMeasure:
    k = params.shape.levels
    sigma = params.sigma
    alpha = params.alpha
    stationary = GaussianMeasure(0.0, sigma ** 2 / (2.0 * alpha[d - 1]))
    if d == k:
        kernel_var = sigma ** 2 * t
    else:
        a_next = alpha[d]
        kernel_var = (sigma ** 2 * (-np.expm1(-2.0 * a_next * t)) / (2.0 * a_next)
                      if a_next > 0 else sigma ** 2 * t)
    return stationary.convolve(GaussianMeasure(0.0, kernel_var))


def _phi(d, params, x, y, t, tol, quad_order):
    if d == 1:
        return invariant_curve(params.beta[0], x, offset=y)
    mu = _mixture_measure(d, params, t)
    z, w = gh_nodes(mu, quad_order)
    beta_d = params.beta[d - 1]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    phi = np.zeros(np.broadcast_shapes(x.shape, np.shape(y)))
    for _ in range(100_000):
        # common offset per x-element, z varies along a new leading axis
        off = beta_d * (phi + x) + y
        inner = _phi(d - 1, params, z.reshape(-1, *([1] * phi.ndim)),
                     off[None, ...], t, tol, quad_order)
        phi_new = np.tensordot(w, inner, axes=(0, 0))
        if np.max(np.abs(phi_new - phi)) <= tol:
            return phi_new
        phi = phi_new
    raise RuntimeError("renormalization fixed point did not converge")
