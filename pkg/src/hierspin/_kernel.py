"""Jitted event loop: uniformization with exact field transitions.

Candidate spin flips come from a homogeneous Poisson stream at rate
2 * n_sites per microscopic time unit (every per-spin rate is <= 2) and
are accepted with probability rate/2.  Between candidate times the field
block averages are advanced with their exact Gaussian transition kernels,
level by level: the level-e centered components decay at rate
gamma_e = sum_{d>e} alpha_d / N^(d-1) with family-centered noise, and the
top average is a Brownian motion with coefficient sigma * N^(-k/2).

All randomness is drawn from an explicit xoshiro256++ state per replica,
so batched runs are bit-reproducible and independent of thread count.
"""

import math

import numpy as np
from numba import njit, prange

_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(inline="always", cache=True)
def _rotl(x, k):
    return np.uint64((x << np.uint64(k)) | (x >> np.uint64(64 - k)))


@njit(inline="always", cache=True)
def _xo_next(s):
    res = np.uint64(_rotl(np.uint64(s[0] + s[3]), 23) + s[0])
    t = np.uint64(s[1] << np.uint64(17))
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return res


@njit(inline="always", cache=True)
def _u01(s):
    # uniform on [0, 1) with 53 random bits
    return float(_xo_next(s) >> np.uint64(11)) * _INV53


@njit(cache=True)
def _randbelow(s, n):
    # unbiased integer in [0, n) by rejection
    nn = np.uint64(n)
    lim = np.uint64(np.uint64(0xFFFFFFFFFFFFFFFF) - np.uint64(0xFFFFFFFFFFFFFFFF) % nn)
    x = _xo_next(s)
    while x >= lim:
        x = _xo_next(s)
    return int(x % nn)


@njit(cache=True)
def _normal(s, nc):
    # Marsaglia polar method; nc = (have_spare flag, spare value)
    if nc[0] > 0.5:
        nc[0] = 0.0
        return nc[1]
    u = 2.0 * _u01(s) - 1.0
    v = 2.0 * _u01(s) - 1.0
    q = u * u + v * v
    while q >= 1.0 or q == 0.0:
        u = 2.0 * _u01(s) - 1.0
        v = 2.0 * _u01(s) - 1.0
        q = u * u + v * v
    f = math.sqrt(-2.0 * math.log(q) / q)
    nc[0] = 1.0
    nc[1] = v * f
    return u * f


@njit(cache=True)
def _advance_fields(dt, k, N, gam, cscale, xscale, seg, sizes, cent, Xbox, rng, nc, buf):
    """Exact Gaussian step of length dt for all field components (in place)."""
    for e in range(k - 1):  # hierarchical level e+1
        g = gam[e]
        sc = cscale[e]
        if g > 0.0:
            a = math.exp(-g * dt)
            q = sc * sc * (-math.expm1(-2.0 * g * dt)) / (2.0 * g)
        else:
            a = 1.0
            q = sc * sc * dt
        sq = math.sqrt(q)
        base = seg[e]
        nfam = sizes[e] // N
        for f in range(nfam):
            s0 = base + f * N
            gm = 0.0
            for j in range(N):
                gg = _normal(rng, nc)
                buf[j] = gg
                gm += gg
            gm /= N
            for j in range(N):
                cent[s0 + j] = a * cent[s0 + j] + sq * (buf[j] - gm)
    Xbox[0] = Xbox[0] + xscale * math.sqrt(dt) * _normal(rng, nc)


@njit(inline="always", cache=True)
def _flip_argument(u, k, X, beta, zero_temp, ipow, fpow, seg, cent, ssum):
    """sum_d w_d (x_d + m_d) along the block ancestry of site u."""
    z = 0.0
    acc = X
    for d in range(k, 0, -1):
        b = u // ipow[d]
        if d < k:
            acc += cent[seg[d - 1] + b]
        m = ssum[seg[d - 1] + b] / fpow[d]
        w = 1.0 if zero_temp else beta[d - 1]
        z += w * (acc + m)
    return z


@njit(cache=True)
def _record(gi, k, N, X, seg, sizes, cent, ssum, fpow, out_m, out_x):
    # top level first, then reconstruct x downwards: x_d = cent_d + x_{d+1}[parent]
    out_m[gi, seg[k - 1]] = ssum[seg[k - 1]] / fpow[k]
    out_x[gi, seg[k - 1]] = X
    for d in range(k - 1, 0, -1):
        for b in range(sizes[d - 1]):
            out_m[gi, seg[d - 1] + b] = ssum[seg[d - 1] + b] / fpow[d]
            out_x[gi, seg[d - 1] + b] = cent[seg[d - 1] + b] + out_x[gi, seg[d] + b // N]


@njit(cache=True)
def _update_sup_all(k, N, X, beta, zero_temp, ipow, fpow, seg, sizes, cent, ssum, sup_y):
    for b in range(sizes[0]):
        u = b * ipow[1]  # any site inside level-1 block b
        z = _flip_argument(u, k, X, beta, zero_temp, ipow, fpow, seg, cent, ssum)
        y = abs(ssum[b] / fpow[1] - math.tanh(z))
        if y > sup_y[b]:
            sup_y[b] = y


@njit(cache=True)
def _run_one(N, k, n_sites, beta, zero_temp, gam, cscale, xscale,
             seg, sizes, ipow, fpow,
             spins, ssum, cent, X0,
             T_mic, grid_mic, rng, nc,
             track_collapse, record_flips,
             out_m, out_x, sup_y, flips, resum_every):
    Xbox = np.empty(1, dtype=np.float64)
    Xbox[0] = X0
    t = 0.0
    gi = 0
    ng = grid_mic.shape[0]
    rate_tot = 2.0 * n_sites
    buf = np.empty(N, dtype=np.float64)
    dz_scale = 0.0
    if not zero_temp:
        for d in range(1, k + 1):
            dz_scale += beta[d - 1] / fpow[d]
    ev = 0
    while True:
        dt = -math.log(1.0 - _u01(rng)) / rate_tot
        t_next = t + dt
        while gi < ng and grid_mic[gi] <= t_next:
            _advance_fields(grid_mic[gi] - t, k, N, gam, cscale, xscale,
                            seg, sizes, cent, Xbox, rng, nc, buf)
            t = grid_mic[gi]
            _record(gi, k, N, Xbox[0], seg, sizes, cent, ssum, fpow, out_m, out_x)
            if track_collapse:
                _update_sup_all(k, N, Xbox[0], beta, zero_temp, ipow, fpow, seg,
                                sizes, cent, ssum, sup_y)
            gi += 1
        if t_next >= T_mic:
            _advance_fields(T_mic - t, k, N, gam, cscale, xscale,
                            seg, sizes, cent, Xbox, rng, nc, buf)
            t = T_mic
            break
        _advance_fields(dt, k, N, gam, cscale, xscale,
                        seg, sizes, cent, Xbox, rng, nc, buf)
        t = t_next
        u = _randbelow(rng, n_sites)
        s = spins[u]
        z = _flip_argument(u, k, Xbox[0], beta, zero_temp, ipow, fpow, seg, cent, ssum)
        if zero_temp:
            a = -s * z
            rate = 1.0 + (1.0 if a > 0.0 else (-1.0 if a < 0.0 else 0.0))
        else:
            rate = 1.0 + math.tanh(-s * z)
        if 2.0 * _u01(rng) < rate:
            spins[u] = -s
            for d in range(1, k + 1):
                ssum[seg[d - 1] + u // ipow[d]] += -2 * s
            if record_flips:
                flips[u] += 1
            z += -2.0 * s * dz_scale
        if track_collapse:
            b1 = u // ipow[1]
            y = abs(ssum[b1] / fpow[1] - math.tanh(z))
            if y > sup_y[b1]:
                sup_y[b1] = y
        ev += 1
        if ev % resum_every == 0:
            # kill float drift in the family means (exactly zero in law)
            for e in range(k - 1):
                base = seg[e]
                nfam = sizes[e] // N
                for f in range(nfam):
                    s0 = base + f * N
                    cm = 0.0
                    for j in range(N):
                        cm += cent[s0 + j]
                    cm /= N
                    for j in range(N):
                        cent[s0 + j] -= cm
    return Xbox[0]


# parallel=True together with cache=True hangs this numba release; the thin
# wrapper stays uncached and recompiles in ~2 s per process.
@njit(parallel=True)
def _run_batch(N, k, n_sites, beta, zero_temp, gam, cscale, xscale,
               seg, sizes, ipow, fpow,
               spins, ssum, cent, X0,
               T_mic, grid_mic, rng, nc,
               track_collapse, record_flips,
               out_m, out_x, sup_y, flips, resum_every, X_fin):
    R = spins.shape[0]
    for r in prange(R):
        X_fin[r] = _run_one(
            N, k, n_sites, beta, zero_temp, gam, cscale, xscale,
            seg, sizes, ipow, fpow,
            spins[r], ssum[r], cent[r], X0[r],
            T_mic, grid_mic, rng[r], nc[r],
            track_collapse, record_flips,
            out_m[r], out_x[r], sup_y[r], flips[r], resum_every)
