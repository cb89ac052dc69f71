"""Monte Carlo experiments tying the finite-N simulator to the limit objects.

Every statistic is reported with its Monte Carlo standard error, and every
sweep is deterministic given the master seed (per-replica streams, reduction
in replica order).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .limits.curve import (critical_points, curve_abscissa, fold_abscissa,
                           invariant_curve, jump_target)
from .limits.ode import GridProfile, default_grid, order1_profile_ode
from .limits.sde import hitting_time_cdf
from .limits.fixedpoint import orderN2_law
from .model import HierarchyShape, ModelParams, SystemState, block_observables
from .quadrature import GaussianMeasure
from .rng import SeedSpec
from .sim import TimescaleSpec, sample_initial_state, simulate_batch
from .sim import CSV_SCHEMA_VERSION


@dataclass(frozen=True)
class SweepSpec:
    """System sizes, replica count, timescale and seed for one experiment."""

    Ns: tuple
    replicas: int
    timescale: TimescaleSpec
    master_seed: int
    statistic: str = ""

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.Ns, self.Ns[1:])):
            raise ValueError("Ns must be strictly increasing")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")


@dataclass
class StatRow:
    N: int
    statistic: str
    estimate: float
    stderr: float
    replicas: int
    expected: float | None = None


@dataclass
class StatTable:
    rows: list = field(default_factory=list)

    def add(self, N, statistic, samples, expected=None):
        s = np.asarray(samples, dtype=float)
        self.rows.append(StatRow(
            N=int(N), statistic=statistic, estimate=float(s.mean()),
            stderr=float(s.std(ddof=1) / np.sqrt(len(s))) if len(s) > 1 else 0.0,
            replicas=len(s), expected=expected))
        return self.rows[-1]

    def get(self, N, statistic) -> StatRow:
        for r in self.rows:
            if r.N == N and r.statistic == statistic:
                return r
        raise KeyError((N, statistic))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(f"# {CSV_SCHEMA_VERSION} stats\n")
            fh.write("N,statistic,estimate,stderr,replicas\n")
            for r in self.rows:
                fh.write(f"{r.N},{r.statistic},{r.estimate!r},"
                         f"{r.stderr!r},{r.replicas}\n")


def with_system_size(params: ModelParams, N: int) -> ModelParams:
    return replace(params, shape=HierarchyShape(params.shape.levels, N))


def _seed_for(master_seed: int, N: int) -> int:
    # distinct sub-master per system size, still reproducible
    return (master_seed * 1_000_003 + N) % (2 ** 63)


def stationary_block_state(params: ModelParams, X0: float, seed: SeedSpec,
                           p: float | None = None) -> SystemState:
    """Initial state with level-1 field averages i.i.d. N(X0, sigma^2/(2 a_k))
    (the quasi-stationary law given a top field near X0); spins Ber(p).

    Site-level field fluctuations are set to zero; they are invisible to the
    dynamics and to every block observable.
    """
    shape = params.shape
    N = shape.block_size
    gen = seed.generator(substream=0)
    rho2 = params.sigma ** 2 / (2.0 * params.alpha[-1])
    blocks = X0 + np.sqrt(rho2) * gen.standard_normal(shape.n_blocks(1))
    fields = np.repeat(blocks, N)
    pp = params.spin_up_prob if p is None else p
    spins = np.where(gen.random(shape.n_sites) < pp, 1, -1).astype(np.int8)
    return SystemState(time=0.0, spins=spins, fields=fields)


# ---------------------------------------------------------------------------
# contraction of the distance to the curve
# ---------------------------------------------------------------------------

def contraction_stat(params: ModelParams, sweep: SweepSpec,
                     k_moment: float = 1.0) -> StatTable:
    """E[sup_t |m_j - tanh(arg_j)|^k] across system sizes.

    The running sup is tracked event-resolved for the event's block and at
    every output-grid time for all blocks; the block average is an unbiased
    estimate of the tagged-block statistic by exchangeability.
    """
    if params.zero_temperature or params.beta[0] >= 1.0:
        raise ValueError("contraction statistic requires beta_1 < 1")
    table = StatTable()
    for N in sweep.Ns:
        p_N = with_system_size(params, N)
        batch = simulate_batch(p_N, sweep.timescale, _seed_for(sweep.master_seed, N),
                               sweep.replicas, track_collapse=True)
        per_rep = (batch.sup_curve_dist ** k_moment).mean(axis=1)
        table.add(N, sweep.statistic or f"sup_curve_dist_k{k_moment:g}", per_rep)
    return table


# ---------------------------------------------------------------------------
# propagation-of-chaos error against the coupled limit
# ---------------------------------------------------------------------------

def chaos_error(params: ModelParams, sweep: SweepSpec,
                timescale_exponent: int) -> StatTable:
    """E[sup_t |m_j^N(t) - coupled limit|] across system sizes.

    The limit consumes the same randomness as the finite system: at order 1
    the frozen initial block fields, at order N the simulated block-field
    paths themselves (reduced to the zero-mean OU of the limit).
    """
    if params.zero_temperature or sum(params.beta) >= 1.0:
        raise ValueError("chaos error requires subcriticality")
    if timescale_exponent not in (0, 1):
        raise ValueError("timescale_exponent must be 0 or 1")
    k = params.shape.levels
    table = StatTable()
    for N in sweep.Ns:
        p_N = with_system_size(params, N)
        ts = replace(sweep.timescale, exponent=timescale_exponent)
        if 0.0 not in ts.output_grid:
            ts = replace(ts, output_grid=(0.0,) + ts.output_grid)
        batch = simulate_batch(p_N, ts, _seed_for(sweep.master_seed, N),
                               sweep.replicas)
        m_path = batch.magnetization[0]        # [R, n_t, n1]
        x_path = batch.field_avg[0]
        times = batch.times
        if timescale_exponent == 0:
            err = _chaos_err_order1(p_N, m_path, x_path, times)
        else:
            err = _chaos_err_orderN(p_N, m_path, x_path,
                                    batch.field_avg[-1][:, :, 0], times)
        table.add(N, sweep.statistic or f"chaos_sup_m{timescale_exponent}", err)
    return table


def _chaos_err_order1(params, m_path, x_path, times):
    N = params.shape.block_size
    k = params.shape.levels
    beta1 = params.beta[0]
    beta2 = params.beta[1] if k >= 2 else 0.0
    mu_N = GaussianMeasure(params.field_init_mean,
                           params.field_init_std ** 2 / N)
    m0 = 2.0 * params.spin_up_prob - 1.0
    grid = default_grid(GaussianMeasure(params.field_init_mean,
                                        max(mu_N.variance, 1e-6)), n=257)
    prof0 = GridProfile(grid, np.full_like(grid, m0), mu_N)
    ode_t, ode_v, _ = order1_profile_ode(
        beta1, beta2, mu_N, params.field_init_mean, prof0, times[-1])
    R, n_t, n1 = m_path.shape
    err = np.empty(R)
    x0 = x_path[:, 0, :]                       # frozen initial block fields
    for r in range(R):
        sup = 0.0
        for i, t in enumerate(times):
            j = min(int(round(t / (ode_t[1] - ode_t[0]))), len(ode_t) - 1)
            tilde = np.interp(x0[r], grid, ode_v[j])
            sup = max(sup, float(np.max(np.abs(m_path[r, i] - tilde))))
        err[r] = sup
    return err


def _chaos_err_orderN(params, m_path, x_path, X_path, times):
    beta1 = params.beta[0]
    alpha_k = params.alpha[-1]
    R, n_t, n1 = m_path.shape
    # e_j(t) = x_j - xtilde_j solves de = -a(e - X)dt; integrate on the grid
    err = np.empty(R)
    for r in range(R):
        e = x_path[r, 0, :].copy()             # limit starts at xtilde(0) = 0
        sup = 0.0
        tilde0 = invariant_curve(beta1, x_path[r, 0, :] - e)
        sup = float(np.max(np.abs(m_path[r, 0] - tilde0)))
        for i in range(1, n_t):
            dt = times[i] - times[i - 1]
            a = np.exp(-alpha_k * dt)
            xm = 0.5 * (X_path[r, i - 1] + X_path[r, i])
            e = a * e + (1.0 - a) * xm
            tilde = invariant_curve(beta1, x_path[r, i, :] - e)
            sup = max(sup, float(np.max(np.abs(m_path[r, i] - tilde))))
        err[r] = sup
    return err


# ---------------------------------------------------------------------------
# diffusion covariance against the closed forms
# ---------------------------------------------------------------------------

def covariance_moments(sigma, alpha2, t, s=None, N=None):
    """Closed-form second moments of the order-N^2 block fields."""
    if s is None:
        return {"A": sigma ** 2 * (1.0 + 2.0 * alpha2 * t) / (2.0 * alpha2),
                "B": sigma ** 2 * t}
    if N is None:
        raise ValueError("cross-time moments need N")
    dec = np.exp(-alpha2 * N * (t - s))
    A_st = (sigma ** 2 / (2.0 * alpha2 * N) * (1.0 - dec)
            + sigma ** 2 / (2.0 * alpha2) * dec + sigma ** 2 * s)
    return {"A": A_st, "B": A_st - sigma ** 2 / (2.0 * alpha2) * dec}


def covariance_check(sigma: float, alpha2: float, N: int, s_grid, t_grid,
                     replicas: int, master_seed: int) -> StatTable:
    """Empirical A(t), B(t), A_N(s,t), B_N(s,t) vs their closed forms.

    Uses the exact block-field sampler at the order-N^2 scale with the
    stationary initial law N(0, sigma^2/(2 alpha2)); `expected` on each row
    carries the closed-form value.
    """
    from .sim import simulate_diffusions_exact
    params = ModelParams(shape=HierarchyShape(2, N), beta=(0.0, 0.0),
                         alpha=(0.0, alpha2), sigma=sigma)
    gen = SeedSpec(master_seed, 0).generator(substream=2)
    rho2 = sigma ** 2 / (2.0 * alpha2)
    f0 = np.sqrt(rho2) * gen.standard_normal((replicas, N))
    ts = sorted(set(float(x) for x in list(s_grid) + list(t_grid)))
    micro = np.asarray(ts) * N * N
    paths = simulate_diffusions_exact(params, f0, micro, gen, level=1)
    at = {t: paths[i] for i, t in enumerate(ts)}

    table = StatTable()
    for t in t_grid:
        x = at[float(t)]
        ex = covariance_moments(sigma, alpha2, t)
        table.add(N, f"A({t:g})", (x ** 2).mean(axis=1), expected=ex["A"])
        pair = (x.sum(axis=1) ** 2 - (x ** 2).sum(axis=1)) / (N * (N - 1))
        table.add(N, f"B({t:g})", pair, expected=ex["B"])
    for s in s_grid:
        for t in t_grid:
            if t < s:
                continue
            xs, xt = at[float(s)], at[float(t)]
            ex = covariance_moments(sigma, alpha2, t, s=s, N=N)
            table.add(N, f"A_N({s:g},{t:g})", (xs * xt).mean(axis=1),
                      expected=float(ex["A"]))
            cross = ((xs.sum(axis=1) * xt.sum(axis=1) - (xs * xt).sum(axis=1))
                     / (N * (N - 1)))
            table.add(N, f"B_N({s:g},{t:g})", cross, expected=float(ex["B"]))
    return table


# ---------------------------------------------------------------------------
# conditional law of M at order N^2
# ---------------------------------------------------------------------------

@dataclass
class ConditionalLawResult:
    N: int
    X: float
    epsilon: float
    n_selected: int
    mean_M: float
    stderr_M: float
    oracle_M: float
    mean_abs_dev: float
    pair_corr: float
    insufficient: bool


def conditional_law_test(params: ModelParams, N: int, X: float,
                         window_fraction: float, replicas: int,
                         master_seed: int, *, t_micro: float = 60.0,
                         min_selected: int = 50) -> ConditionalLawResult:
    """Conditional concentration of M^N given X^N(t) ~ X at order N^2.

    The conditional limit is time-independent, so the fields start in the
    quasi-stationary law around X and the system runs for a short
    macroscopic window (t_micro microscopic units); replicas whose X^N(t)
    lands within eps_N = N^(-window_fraction) of X enter the statistics.
    """
    if params.zero_temperature or sum(params.beta) >= 1.0:
        raise ValueError("conditional law test requires subcriticality")
    p_N = with_system_size(params, N)
    eps = N ** (-window_fraction)
    ts = TimescaleSpec(exponent=2, horizon=t_micro / N ** 2,
                       output_grid=(t_micro / N ** 2,))
    seed0 = _seed_for(master_seed, N)

    def sampler(r):
        return stationary_block_state(p_N, X, SeedSpec(seed0, r), p=0.5)

    batch = simulate_batch(p_N, ts, seed0, replicas, state_sampler=sampler)
    M_fin = batch.magnetization[-1][:, -1, 0]
    X_fin = batch.field_avg[-1][:, -1, 0]
    m1_fin = batch.magnetization[0][:, -1, :]
    sel = np.abs(X_fin - X) <= eps
    n_sel = int(sel.sum())
    oracle = orderN2_law(params.beta[0], params.beta[1], params.sigma,
                         params.alpha[-1], X, mode="conditional")
    if n_sel < min_selected:
        return ConditionalLawResult(N, X, eps, n_sel, float("nan"), float("nan"),
                                    oracle, float("nan"), float("nan"), True)
    Ms = M_fin[sel]
    corr = float(np.corrcoef(m1_fin[sel, 0], m1_fin[sel, 1])[0, 1])
    return ConditionalLawResult(
        N=N, X=X, epsilon=eps, n_selected=n_sel,
        mean_M=float(Ms.mean()),
        stderr_M=float(Ms.std(ddof=1) / np.sqrt(n_sel)),
        oracle_M=float(oracle),
        mean_abs_dev=float(np.abs(Ms - oracle).mean()),
        pair_corr=corr, insufficient=False)


# ---------------------------------------------------------------------------
# first-hitting times of the aggregated field
# ---------------------------------------------------------------------------

def hitting_time_test(sigma: float, N: int, level: float, x0: float,
                      replicas: int, master_seed: int, *,
                      horizon: float = 4.0, n_grid: int = 801) -> dict:
    """KS distance between empirical first hits of x^N and the reflection CDF.

    Runs the mean-field system at the accelerated scale (x^N is then a
    Brownian motion with coefficient sigma); crossings inside grid cells are
    recovered with Brownian-bridge crossing probabilities so the hit times
    carry no systematic grid bias beyond half a cell.
    """
    params = ModelParams(shape=HierarchyShape(1, N), beta=(0.0,), alpha=(0.0,),
                         sigma=sigma, field_init_mean=x0, field_init_std=0.0)
    ts = TimescaleSpec(exponent=1, horizon=horizon,
                       output_grid=tuple(np.linspace(0.0, horizon, n_grid)))
    batch = simulate_batch(params, ts, master_seed, replicas)
    X = batch.field_avg[-1][:, :, 0]
    tgrid = batch.times
    dt = tgrid[1] - tgrid[0]
    gen = SeedSpec(master_seed, 0).generator(substream=5)
    down = x0 > level
    hits = np.full(replicas, np.inf)
    for r in range(replicas):
        xr = X[r] if down else -X[r]
        lv = level if down else -level
        for i in range(len(tgrid) - 1):
            a, b = xr[i] - lv, xr[i + 1] - lv
            if b <= 0.0:
                hits[r] = tgrid[i] + dt * (a / (a - b) if a != b else 0.5)
                break
            p = np.exp(-2.0 * a * b / (sigma ** 2 * dt))
            if gen.random() < p:
                hits[r] = tgrid[i] + 0.5 * dt
                break
    eval_t = np.linspace(horizon / n_grid, horizon, 400)
    emp = np.array([(hits <= t).mean() for t in eval_t])
    ref = hitting_time_cdf(x0, level, sigma, eval_t)
    ks = float(np.max(np.abs(emp - ref)))
    return {"ks": ks, "hits": hits, "n": replicas,
            "hit_fraction": float(np.isfinite(hits).mean())}


# ---------------------------------------------------------------------------
# generator consistency
# ---------------------------------------------------------------------------

@dataclass
class GeneratorCheck:
    empirical: float
    stderr: float
    analytic: float
    z: float


def apply_generator(params: ModelParams, state: SystemState, f,
                    eps: float = 1e-5) -> float:
    """Analytic generator on a macro test function f(m_levels, x_levels).

    Jump terms are enumerated with the exact rates; field drift and
    diffusion enter through directional finite differences along the exact
    drift vector and the per-site noise directions.
    """
    from .model import flip_rate, local_flip_argument
    shape = params.shape
    N, k = shape.block_size, shape.levels
    obs = block_observables(state, shape)
    m0 = [a.copy() for a in obs.magnetization]
    x0 = [a.copy() for a in obs.field_avg]
    base = f(m0, x0)

    total = 0.0
    for u in range(shape.n_sites):
        s = int(state.spins[u])
        z = local_flip_argument(state, params, u, obs)
        rate = flip_rate(s, z, params)
        if rate == 0.0:
            continue
        m_pert = [a.copy() for a in m0]
        for d in range(1, k + 1):
            m_pert[d - 1][shape.block_of(u, d)] += -2.0 * s / N ** d
        total += rate * (f(m_pert, x0) - base)

    # diffusion: (sigma^2/2) sum_r D_r^2 f along v_r[(d,b)] = N^-d
    sig2 = params.sigma ** 2
    if sig2 > 0:
        for u in range(shape.n_sites):
            xp = [a.copy() for a in x0]
            xm = [a.copy() for a in x0]
            for d in range(1, k + 1):
                b = shape.block_of(u, d)
                xp[d - 1][b] += eps / N ** d
                xm[d - 1][b] -= eps / N ** d
            total += 0.5 * sig2 * (f(m0, xp) - 2.0 * base + f(m0, xm)) / eps ** 2

    # drift: first derivative along the exact block drift vector
    drift = [np.zeros_like(a) for a in x0]
    for d in range(1, k):
        for e in range(d + 1, k + 1):
            anc = np.repeat(x0[e - 1], N ** (e - d))
            drift[d - 1] -= params.alpha[e - 1] / N ** (e - 1) * (x0[d - 1] - anc)
    xp = [a + eps * dv for a, dv in zip(x0, drift)]
    xm = [a - eps * dv for a, dv in zip(x0, drift)]
    total += (f(m0, xp) - f(m0, xm)) / (2.0 * eps)
    return total


def generator_consistency(params: ModelParams, state: SystemState, f,
                          dt: float, replicas: int, master_seed: int) -> GeneratorCheck:
    """(E[f(state_dt)] - f(state))/dt against the analytic generator."""
    shape = params.shape
    ts = TimescaleSpec(exponent=0, horizon=dt, output_grid=(dt,))
    batch = simulate_batch(params, ts, master_seed, replicas, state0=state)
    vals = np.empty(replicas)
    for r in range(replicas):
        ms = [batch.magnetization[d][r, -1, :] for d in range(shape.levels)]
        xs = [batch.field_avg[d][r, -1, :] for d in range(shape.levels)]
        vals[r] = f(ms, xs)
    obs = block_observables(state, shape)
    base = f([a for a in obs.magnetization], [a for a in obs.field_avg])
    emp = (vals.mean() - base) / dt
    se = vals.std(ddof=1) / np.sqrt(replicas) / dt
    ana = apply_generator(params, state, f)
    z = (emp - ana) / se if se > 0 else np.inf
    return GeneratorCheck(empirical=float(emp), stderr=float(se),
                          analytic=float(ana), z=float(z))


# ---------------------------------------------------------------------------
# supercritical jump geometry
# ---------------------------------------------------------------------------

@dataclass
class JumpTestResult:
    departures: np.ndarray
    arrivals: np.ndarray
    interjump_times: np.ndarray
    ks_interjump: float
    m_a: float
    m_b: float
    n_jumps: int


def supercritical_jump_test(beta: float, sigma: float, N: int, T: float,
                            replicas: int, master_seed: int, *,
                            m0: float = 0.9) -> JumpTestResult:
    """Detect jump episodes in accelerated mean-field paths.

    Departure/arrival magnetizations are read off a sliding-window
    |m(t+w) - m(t)| > m_a detector with w equal to 1% of the median
    inter-jump scale; inter-jump times are compared against the Brownian
    hitting-time law between the two fold abscissas.
    """
    lam_a, m_a = critical_points(beta)
    m_b = jump_target(beta)
    if not abs(m0) > m_a:
        raise ValueError("initial magnetization must satisfy |m0| > m_a")
    D = 2.0 * (m_a - lam_a)
    t_med = (D / (0.6745 * sigma)) ** 2
    w = 0.01 * t_med
    dt_grid = w / 4.0
    n_grid = int(np.ceil(T / dt_grid)) + 1
    x0 = float(curve_abscissa(beta, m0))
    params = ModelParams(shape=HierarchyShape(1, N), beta=(beta,), alpha=(0.0,),
                         sigma=sigma, spin_up_prob=(1.0 + m0) / 2.0,
                         field_init_mean=x0, field_init_std=0.0)
    ts = TimescaleSpec(exponent=1, horizon=T,
                       output_grid=tuple(np.linspace(0.0, T, n_grid)))
    batch = simulate_batch(params, ts, master_seed, replicas)
    tgrid = batch.times
    wi = max(1, int(round(w / (tgrid[1] - tgrid[0]))))
    deps, arrs, gaps = [], [], []
    for r in range(replicas):
        m = batch.magnetization[-1][r, :, 0]
        moved = np.abs(m[wi:] - m[:-wi]) > m_a
        idx = np.flatnonzero(moved)
        if len(idx) == 0:
            continue
        splits = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate(([idx[0]], idx[splits + 1]))
        ends = np.concatenate((idx[splits], [idx[-1]]))
        t_starts = []
        for a, b in zip(starts, ends):
            deps.append(m[a])
            arrs.append(m[min(b + wi, len(m) - 1)])
            t_starts.append(tgrid[a])
        gaps.extend(np.diff(t_starts))
    gaps = np.asarray(gaps)
    if len(gaps):
        eval_t = np.linspace(1e-4, max(gaps.max(), 4 * t_med), 400)
        ref = hitting_time_cdf(0.0, D, sigma, eval_t)
        emp = np.array([(gaps <= t).mean() for t in eval_t])
        ks = float(np.max(np.abs(emp - ref)))
    else:
        ks = float("nan")
    return JumpTestResult(departures=np.asarray(deps), arrivals=np.asarray(arrs),
                          interjump_times=gaps, ks_interjump=ks,
                          m_a=m_a, m_b=m_b, n_jumps=len(deps))
