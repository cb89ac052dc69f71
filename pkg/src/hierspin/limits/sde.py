"""One-dimensional accelerated limit laws: curve-mapped diffusions and jumps.

The subcritical order-N mean-field limit is the strong solution of an SDE
whose coefficients blow up at the fold points, but it is also exactly the
image of a plain Brownian motion under the stable curve branch; paths are
therefore generated in x-space (singularity-free) and mapped through the
branch.  In the supercritical regime the path jumps to the opposite branch
whenever x crosses a fold abscissa, arriving at the root of the jump
polynomial g (the opposite-branch curve value at the fold).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..rng import SeedSpec
from .curve import (LOWER, UPPER, critical_points, curve_abscissa,
                    fold_abscissa, invariant_curve, jump_target)


def hitting_time_cdf(x0: float, a: float, sigma: float, t):
    """P(T <= t) for the first hit of level a by x0 + sigma*W, by reflection:
    2 * Phi(-|x0 - a| / (sigma * sqrt(t)))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    d = abs(x0 - a)
    with np.errstate(divide="ignore"):
        z = np.where(t > 0, d / (sigma * np.sqrt(np.where(t > 0, t, 1.0))), np.inf)
    out = 2.0 * ndtr(-z)
    out = np.where(t == 0, 1.0 if d == 0.0 else 0.0, out)
    return float(out) if out.ndim == 0 else out


def hitting_time_pdf(x0: float, a: float, sigma: float, t):
    d = abs(x0 - a)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = d / (sigma * np.sqrt(2.0 * np.pi) * t[pos] ** 1.5) * np.exp(
        -d * d / (2.0 * sigma ** 2 * t[pos]))
    return float(out) if out.ndim == 0 else out


def meanfield_drift(m, beta: float, sigma: float):
    """Drift -beta^2 sigma^2 m (1-m^2) / (1 - beta(1-m^2))^3 of the order-N law."""
    m = np.asarray(m, dtype=float)
    den = 1.0 - beta * (1.0 - m * m)
    return -(beta ** 2) * sigma ** 2 * m * (1.0 - m * m) / den ** 3


def meanfield_diffusion(m, beta: float, sigma: float):
    """Diffusion coefficient sigma beta (1-m^2) / (1 - beta(1-m^2))."""
    m = np.asarray(m, dtype=float)
    den = 1.0 - beta * (1.0 - m * m)
    return sigma * beta * (1.0 - m * m) / den


def hier_drift(m, beta1: float, sigma: float, alpha2: float):
    """Order-N hierarchical drift: the mean-field term plus the OU pull-back
    -alpha2 b1 (1-m^2)(arctanh(m)/b1 - m) / (1 - b1(1-m^2))."""
    m = np.asarray(m, dtype=float)
    den = 1.0 - beta1 * (1.0 - m * m)
    ou = -alpha2 * beta1 * (1.0 - m * m) * (np.arctanh(m) / beta1 - m) / den
    return ou + meanfield_drift(m, beta1, sigma)


@dataclass
class SDEPath:
    t: np.ndarray
    m: np.ndarray
    x: np.ndarray
    branch: np.ndarray        # +1 upper, -1 lower, 0 unique branch
    jump_flag: np.ndarray     # True at the first grid point after a jump

    def to_csv(self, path):
        from ..sim import CSV_SCHEMA_VERSION
        with open(path, "w") as fh:
            fh.write(f"# {CSV_SCHEMA_VERSION} sde-path\n")
            fh.write("t,m,x,branch,jump_flag\n")
            for i in range(len(self.t)):
                fh.write(f"{self.t[i]!r},{self.m[i]!r},{self.x[i]!r},"
                         f"{int(self.branch[i])},{int(self.jump_flag[i])}\n")


def limit_sde_meanfield(beta: float, sigma: float, m0: float, T: float,
                        seed: SeedSpec, regime: str = "subcritical", *,
                        dt: float = 1e-3, literal_jump_increment: bool = False):
    """Path of the accelerated mean-field limit on a uniform grid.

    subcritical (beta < 1): m(t) is the unique curve value over the Brownian
    x(t); this is the strong solution driven by the same noise.
    supercritical (beta > 1, |m0| > m_a): diffusion on the current stable
    branch with a deterministic jump to the opposite branch each time x
    crosses the fold abscissa.  literal_jump_increment applies the raw
    increment -(m_b+m_a) instead of landing on the g-root (for comparing
    the two published conventions); x is then re-synced to the curve.
    """
    if regime not in ("subcritical", "supercritical"):
        raise ValueError("regime must be subcritical or supercritical")
    gen = seed.generator(substream=4) if isinstance(seed, SeedSpec) else seed
    n = max(1, int(np.ceil(T / dt)))
    ts = np.linspace(0.0, T, n + 1)
    dW = gen.standard_normal(n) * np.sqrt(np.diff(ts))

    if regime == "subcritical":
        if not beta < 1.0:
            raise ValueError("subcritical regime requires beta < 1")
        if beta == 0.0:
            if m0 != 0.0:
                raise ValueError("beta = 0 forces m = 0 on the curve")
            x = np.concatenate(([0.0], sigma * np.cumsum(dW)))
            return SDEPath(ts, np.zeros(n + 1), x, np.zeros(n + 1, int),
                           np.zeros(n + 1, bool))
        x0 = float(curve_abscissa(beta, m0)) if abs(m0) < 1 else np.sign(m0) * 1e9
        x = x0 + np.concatenate(([0.0], sigma * np.cumsum(dW)))
        m = invariant_curve(beta, x)
        return SDEPath(ts, m, x, np.zeros(n + 1, int), np.zeros(n + 1, bool))

    lam_a, m_a = critical_points(beta)
    if abs(m0) <= m_a:
        raise ValueError("supercritical start requires |m0| > m_a")
    m_b = jump_target(beta)
    xf = fold_abscissa(beta)            # upper branch exists for x >= xf
    branch = 1 if m0 > 0 else -1
    x = np.empty(n + 1)
    m = np.empty(n + 1)
    br = np.empty(n + 1, dtype=np.int64)
    jf = np.zeros(n + 1, dtype=bool)
    x[0] = float(curve_abscissa(beta, m0))
    m[0] = m0
    br[0] = branch
    for i in range(n):
        xn = x[i] + sigma * dW[i]
        if branch == 1 and xn < xf:
            branch = -1
            jf[i + 1] = True
            if literal_jump_increment:
                # lands at -m_b on the upper branch; re-sync x to the curve
                branch = 1
                xn = float(curve_abscissa(beta, -m_b))
        elif branch == -1 and xn > -xf:
            branch = 1
            jf[i + 1] = True
            if literal_jump_increment:
                branch = -1
                xn = float(curve_abscissa(beta, m_b))
        x[i + 1] = xn
        m[i + 1] = invariant_curve(beta, xn, branch=UPPER if branch == 1 else LOWER)
        br[i + 1] = branch
    return SDEPath(ts, m, x, br, jf)


def limit_sde_meanfield_batch(beta: float, sigma: float, m0: float, T: float,
                              master_seed: int, replicas: int,
                              dt: float = 1e-3) -> np.ndarray:
    """Final values m(T) for a batch of subcritical limit paths (vectorized)."""
    if not 0.0 < beta < 1.0:
        raise ValueError("batch integrator covers the subcritical regime")
    gen = SeedSpec(master_seed, 0).generator(substream=4)
    n = max(1, int(np.ceil(T / dt)))
    x = np.full(replicas, float(curve_abscissa(beta, m0)) if m0 != 0 else 0.0)
    h = T / n
    for _ in range(n):
        x += sigma * np.sqrt(h) * gen.standard_normal(replicas)
    return invariant_curve(beta, x)


def limit_sde_hier_orderN(beta1: float, sigma: float, alpha2: float, T: float,
                          seed: SeedSpec, *, dt: float = 1e-3, m0: float = 0.0):
    """Order-N hierarchical limit: exact OU steps in x mapped through the curve."""
    if not beta1 < 1.0:
        raise ValueError("requires beta1 < 1")
    gen = seed.generator(substream=4) if isinstance(seed, SeedSpec) else seed
    n = max(1, int(np.ceil(T / dt)))
    ts = np.linspace(0.0, T, n + 1)
    x = np.empty(n + 1)
    x[0] = float(curve_abscissa(beta1, m0)) if (beta1 > 0 and m0 != 0) else 0.0
    h = T / n
    a = np.exp(-alpha2 * h)
    q = sigma ** 2 * (-np.expm1(-2.0 * alpha2 * h)) / (2.0 * alpha2) \
        if alpha2 > 0 else sigma ** 2 * h
    z = gen.standard_normal(n)
    for i in range(n):
        x[i + 1] = a * x[i] + np.sqrt(q) * z[i]
    m = invariant_curve(beta1, x) if beta1 > 0 else np.zeros(n + 1)
    return SDEPath(ts, m, x, np.zeros(n + 1, int), np.zeros(n + 1, bool))


def limit_sde_hier_orderN_batch(beta1: float, sigma: float, alpha2: float,
                                T: float, master_seed: int, replicas: int,
                                dt: float = 1e-3) -> np.ndarray:
    """Final values m(T) for a batch of order-N hierarchical limit paths."""
    gen = SeedSpec(master_seed, 0).generator(substream=4)
    n = max(1, int(np.ceil(T / dt)))
    h = T / n
    a = np.exp(-alpha2 * h)
    q = sigma ** 2 * (-np.expm1(-2.0 * alpha2 * h)) / (2.0 * alpha2) \
        if alpha2 > 0 else sigma ** 2 * h
    x = np.zeros(replicas)
    for _ in range(n):
        x = a * x + np.sqrt(q) * gen.standard_normal(replicas)
    return invariant_curve(beta1, x)


def em_paths_same_noise(beta1: float, sigma: float, alpha2: float, T: float,
                        n_steps: int, gen) -> tuple:
    """Self-consistency pair for the hierarchical order-N law.

    Drives, with one set of Brownian increments, (a) an Euler path of the
    x-side OU mapped through the curve and (b) an Euler path of the explicit
    one-dimensional SDE.  Both converge strongly to the same limit, so their
    sup-distance is O(sqrt(step)); used to validate the SDE coefficients.
    Returns (t, m_mapped, m_direct).
    """
    ts = np.linspace(0.0, T, n_steps + 1)
    h = T / n_steps
    dW = gen.standard_normal(n_steps) * np.sqrt(h)
    x = np.zeros(n_steps + 1)
    m = np.zeros(n_steps + 1)
    for i in range(n_steps):
        x[i + 1] = x[i] - alpha2 * x[i] * h + sigma * dW[i]
        mm = np.clip(m[i], -0.999999, 0.999999)
        m[i + 1] = (m[i] + hier_drift(mm, beta1, sigma, alpha2) * h
                    + meanfield_diffusion(mm, beta1, sigma) * dW[i])
        m[i + 1] = np.clip(m[i + 1], -1.0, 1.0)
    return ts, invariant_curve(beta1, x), m
