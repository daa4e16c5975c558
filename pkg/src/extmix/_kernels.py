"""Compiled scalar kernels shared by the density code and the samplers.

Everything here works on plain floats and arrays so it can run under numba
``nopython`` mode; the typed public wrappers live in the other modules.
"""

import math

import numpy as np
from numba import njit

_LOG_2PI = math.log(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)
GAMMA_ZERO_TOL = 1e-8
SERIES_TOL = 1e-5

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


@njit(cache=True)
def norm_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


@njit(cache=True)
def bvn_upper(h, k, r):
    """P(X > h, Y > k) for standard bivariate normal with correlation r.

    Genz's reduction of the orthant probability to a single integral over the
    correlation, evaluated with 20-point Gauss-Legendre quadrature.
    """
    if h == np.inf or k == np.inf:
        return 0.0
    if h == -np.inf:
        return norm_cdf(-k)
    if k == -np.inf:
        return norm_cdf(-h)
    hk = h * k
    bvn = 0.0
    n = _GL_X.shape[0]
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r)
        for i in range(n):
            sn = math.sin(asr * (1.0 + _GL_X[i]) / 2.0)
            bvn += _GL_W[i] * math.exp((sn * hk - hs) / (1.0 - sn * sn))
        bvn = bvn * asr / (4.0 * math.pi)
        bvn += norm_cdf(-h) * norm_cdf(-k)
    else:
        if r < 0.0:
            k = -k
            hk = -hk
        if abs(r) < 1.0:
            as_ = (1.0 - r) * (1.0 + r)
            a = math.sqrt(as_)
            bs = (h - k) ** 2
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 80.0
            asr = -(bs / as_ + hk) / 2.0
            if asr > -100.0:
                bvn = a * math.exp(asr) * (
                    1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_
                )
            if hk > -100.0:
                b = math.sqrt(bs)
                sp = math.sqrt(2.0 * math.pi) * norm_cdf(-b / a)
                bvn -= math.exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
            a = a / 2.0
            acc = 0.0
            for i in range(n):
                xs = (a * (1.0 + _GL_X[i])) ** 2
                asr = -(bs / xs + hk) / 2.0
                if asr > -100.0:
                    sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs)
                    rs = math.sqrt(1.0 - xs)
                    ep = math.exp(-(hk / 2.0) * xs / (1.0 + rs) ** 2) / rs
                    acc += _GL_W[i] * math.exp(asr) * (sp - ep)
            bvn = (a * acc - bvn) / (2.0 * math.pi)
        if r > 0.0:
            bvn += norm_cdf(-max(h, k))
        elif h >= k:
            bvn = -bvn
        else:
            if h < 0.0:
                lower = norm_cdf(k) - norm_cdf(h)
            else:
                lower = norm_cdf(-h) - norm_cdf(-k)
            bvn = lower - bvn
    return min(max(bvn, 0.0), 1.0)


@njit(cache=True)
def bvn_lower(h, k, r):
    """P(X <= h, Y <= k) for standard margins."""
    return bvn_upper(-h, -k, r)


@njit(cache=True)
def bvn_lower_many(h, k, r):
    out = np.empty(h.shape[0])
    for i in range(h.shape[0]):
        out[i] = bvn_upper(-h[i], -k[i], r)
    return out


@njit(cache=True)
def std_coord(y, sigma, gamma):
    """Standardizing transform of one coordinate; NaN when off-support."""
    t = gamma * y / sigma
    if 1.0 + t <= 0.0:
        return np.nan
    # the series is used only where it is accurate; log1p is exact elsewhere
    if abs(gamma) < GAMMA_ZERO_TOL and abs(t) < SERIES_TOL:
        return y / sigma * (1.0 - 0.5 * t)
    return math.log1p(t) / gamma


@njit(cache=True)
def loglik_parts(X, mu, sd, ufac, u, a, sigma, gamma):
    """Bulk and tail log-likelihood sums for the mixture, excluding the tail mass.

    Returns ``(bulk_sum, tail_sum, n_tail)``; ``tail_sum`` is ``-inf`` when a
    tail point falls off the generalized Pareto support.
    """
    n, d = X.shape
    chol = np.zeros((d, d))
    half_logdet = 0.0
    for i in range(d):
        for j in range(i + 1):
            chol[i, j] = sd[i] * ufac[j, i]
        half_logdet += math.log(chol[i, i])
    inv_a_sum = 0.0
    log_a_sum = 0.0
    for j in range(d):
        inv_a_sum += 1.0 / a[j]
        log_a_sum += math.log(a[j])
    v = np.empty(d)
    quad = 0.0
    n_bulk = 0
    tail = 0.0
    n_tail = 0
    for i in range(n):
        exceeds = False
        for j in range(d):
            if X[i, j] > u[j]:
                exceeds = True
                break
        if not exceeds:
            for j in range(d):
                s = X[i, j] - mu[j]
                for k in range(j):
                    s -= chol[j, k] * v[k]
                v[j] = s / chol[j, j]
                quad += v[j] * v[j]
            n_bulk += 1
        else:
            n_tail += 1
            zmax = -np.inf
            acc = 0.0
            for j in range(d):
                y = X[i, j] - u[j]
                z = std_coord(y, sigma[j], gamma[j])
                if math.isnan(z):
                    return -np.inf, -np.inf, n_tail
                acc += z / a[j] - math.log(sigma[j] + gamma[j] * y)
                if z > zmax:
                    zmax = z
            tail += acc - zmax * (1.0 + inv_a_sum)
    bulk = -0.5 * quad - n_bulk * (0.5 * d * _LOG_2PI + half_logdet)
    tail += n_tail * (-math.log(inv_a_sum) - log_a_sum)
    return bulk, tail, n_tail


@njit(cache=True)
def log_tail_mass_2d(mu, sd, rho, u):
    """log(1 - F_bulk(u)) for d = 2, computed without cancellation."""
    h1 = (u[0] - mu[0]) / sd[0]
    h2 = (u[1] - mu[1]) / sd[1]
    mass = norm_cdf(-h1) + norm_cdf(-h2) - bvn_upper(h1, h2, rho)
    if mass <= 0.0:
        return -np.inf
    return math.log(mass)


@njit(cache=True)
def unpack_flat(theta, d):
    """Split a flat parameter vector; ``ok`` is False when the factor is invalid."""
    mu = theta[0:d].copy()
    sd = theta[d:2 * d].copy()
    n_free = d * (d - 1) // 2
    ufac = np.zeros((d, d))
    ufac[0, 0] = 1.0
    ok = True
    pos = 2 * d
    for j in range(1, d):
        ss = 0.0
        for i in range(j):
            w = theta[pos]
            ufac[i, j] = w
            ss += w * w
            pos += 1
        if ss >= 1.0:
            ok = False
            ufac[j, j] = 0.0
        else:
            ufac[j, j] = math.sqrt(1.0 - ss)
    base = 2 * d + n_free
    u = theta[base:base + d].copy()
    a = theta[base + d:base + 2 * d].copy()
    sigma = theta[base + 2 * d:base + 3 * d].copy()
    gamma = theta[base + 3 * d:base + 4 * d].copy()
    return mu, sd, ufac, u, a, sigma, gamma, ok


@njit(cache=True)
def log_prior_flat(theta, d, hyper, finite_expectation):
    """Log prior on the flat vector.

    ``hyper`` packs, in order: m(d), t(d), b(d), nu(d), s_u(d), p(d), q(d),
    then delta, u_a, l_gamma, u_gamma, u_sigma, lkj_log_norm.
    """
    mu, sd, ufac, u, a, sigma, gamma, ok = unpack_flat(theta, d)
    if not ok:
        return -np.inf
    m = hyper[0:d]
    t = hyper[d:2 * d]
    b = hyper[2 * d:3 * d]
    nu = hyper[3 * d:4 * d]
    s_u = hyper[4 * d:5 * d]
    p = hyper[5 * d:6 * d]
    q = hyper[6 * d:7 * d]
    delta = hyper[7 * d]
    u_a = hyper[7 * d + 1]
    l_g = hyper[7 * d + 2]
    u_g = hyper[7 * d + 3]
    u_s = hyper[7 * d + 4]
    lkj_log_norm = hyper[7 * d + 5]
    lp = 0.0
    for i in range(d):
        if not (0.0 < sd[i] < b[i]):
            return -np.inf
        if not (p[i] <= u[i] <= q[i]):
            return -np.inf
        if not (0.0 < a[i] < u_a):
            return -np.inf
        if not (l_g < gamma[i] < u_g):
            return -np.inf
        if not (0.0 < sigma[i] < u_s):
            return -np.inf
        if finite_expectation and gamma[i] + 1.0 / a[i] < 0.0:
            return -np.inf
        zm = (mu[i] - m[i]) / t[i]
        lp += -0.5 * zm * zm - 0.5 * _LOG_2PI - math.log(t[i])
        lp -= math.log(b[i])
        zu = (u[i] - nu[i]) / s_u[i]
        mass = norm_cdf((q[i] - nu[i]) / s_u[i]) - norm_cdf((p[i] - nu[i]) / s_u[i])
        lp += -0.5 * zu * zu - 0.5 * _LOG_2PI - math.log(s_u[i]) - math.log(mass)
        lp -= math.log(u_a) + math.log(u_g - l_g) + math.log(u_s)
    for j in range(1, d):
        lp += (d - (j + 1) + 2.0 * delta - 2.0) * math.log(ufac[j, j])
    lp -= lkj_log_norm
    return lp


@njit(cache=True)
def log_posterior_flat_2d(theta, X, hyper, finite_expectation):
    lp = log_prior_flat(theta, 2, hyper, finite_expectation)
    if lp == -np.inf:
        return -np.inf
    mu, sd, ufac, u, a, sigma, gamma, ok = unpack_flat(theta, 2)
    bulk, tail, n_tail = loglik_parts(X, mu, sd, ufac, u, a, sigma, gamma)
    if tail == -np.inf:
        return -np.inf
    if n_tail > 0:
        lm = log_tail_mass_2d(mu, sd, ufac[0, 1], u)
        if lm == -np.inf:
            return -np.inf
        tail += n_tail * lm
    return lp + bulk + tail


@njit(cache=True)
def merge_count_inversions(y):
    """Stable merge sort of ``y`` in place; returns the number of strict inversions."""
    n = y.shape[0]
    buf = np.empty_like(y)
    swaps = 0
    width = 1
    src = y
    dst = buf
    in_buf = False
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
        src, dst = dst, src
        in_buf = not in_buf
        width *= 2
    if in_buf:
        y[:] = buf
    return swaps


@njit(cache=True)
def partition_stats(X, u, center):
    """Bulk sufficient statistics (centered at ``center``) and the tail rows for threshold ``u``."""
    n, d = X.shape
    n_bulk = 0
    sx = np.zeros(d)
    sxx = np.zeros((d, d))
    is_tail = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        for j in range(d):
            if X[i, j] > u[j]:
                is_tail[i] = True
                break
        if not is_tail[i]:
            n_bulk += 1
            for j in range(d):
                cj = X[i, j] - center[j]
                sx[j] += cj
                for k in range(j + 1):
                    sxx[j, k] += cj * (X[i, k] - center[k])
    for j in range(d):
        for k in range(j + 1, d):
            sxx[j, k] = sxx[k, j]
    tail_rows = np.empty((n - n_bulk, d))
    m = 0
    for i in range(n):
        if is_tail[i]:
            tail_rows[m, :] = X[i, :]
            m += 1
    return n_bulk, sx, sxx, tail_rows


@njit(cache=True)
def bulk_ll_stats(n_bulk, sx, sxx, center, mu, sd, ufac):
    """Sum of normal log densities over the bulk rows from their sufficient statistics."""
    d = mu.shape[0]
    if n_bulk == 0:
        return 0.0
    chol = np.zeros((d, d))
    half_logdet = 0.0
    for i in range(d):
        for j in range(i + 1):
            chol[i, j] = sd[i] * ufac[j, i]
        half_logdet += math.log(chol[i, i])
    # inverse of the lower factor by forward substitution
    linv = np.zeros((d, d))
    for c in range(d):
        for i in range(d):
            s = 1.0 if i == c else 0.0
            for k in range(i):
                s -= chol[i, k] * linv[k, c]
            linv[i, c] = s / chol[i, i]
    delta = np.empty(d)
    for j in range(d):
        delta[j] = mu[j] - center[j]
    # scatter about mu: S = sxx - delta sx' - sx delta' + n delta delta'
    quad = 0.0
    for r in range(d):
        for j in range(d):
            for k in range(d):
                s_jk = sxx[j, k] - delta[j] * sx[k] - sx[j] * delta[k] + n_bulk * delta[j] * delta[k]
                quad += linv[r, j] * linv[r, k] * s_jk
    return -0.5 * quad - n_bulk * (0.5 * d * _LOG_2PI + half_logdet)


@njit(cache=True)
def tail_ll(tail_rows, u, a, sigma, gamma):
    """Sum of observation-scale mGPD log densities of ``tail_rows - u`` (no tail-mass term)."""
    m, d = tail_rows.shape
    inv_a_sum = 0.0
    log_a_sum = 0.0
    for j in range(d):
        inv_a_sum += 1.0 / a[j]
        log_a_sum += math.log(a[j])
    total = 0.0
    for i in range(m):
        zmax = -np.inf
        acc = 0.0
        for j in range(d):
            y = tail_rows[i, j] - u[j]
            z = std_coord(y, sigma[j], gamma[j])
            if math.isnan(z):
                return -np.inf
            acc += z / a[j] - math.log(sigma[j] + gamma[j] * y)
            if z > zmax:
                zmax = z
        total += acc - zmax * (1.0 + inv_a_sum)
    return total + m * (-math.log(inv_a_sum) - log_a_sum)


@njit(cache=True)
def log_posterior_stats_2d(theta, n_bulk, sx, sxx, center, tail_rows, hyper, finite_expectation):
    """Same value as :func:`log_posterior_flat_2d` from cached partition statistics."""
    lp = log_prior_flat(theta, 2, hyper, finite_expectation)
    if lp == -np.inf:
        return -np.inf
    mu, sd, ufac, u, a, sigma, gamma, ok = unpack_flat(theta, 2)
    tail = tail_ll(tail_rows, u, a, sigma, gamma)
    if tail == -np.inf:
        return -np.inf
    m = tail_rows.shape[0]
    if m > 0:
        lm = log_tail_mass_2d(mu, sd, ufac[0, 1], u)
        if lm == -np.inf:
            return -np.inf
        tail += m * lm
    return lp + tail + bulk_ll_stats(n_bulk, sx, sxx, center, mu, sd, ufac)
