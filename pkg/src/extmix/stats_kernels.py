"""Statistical primitives: (multivariate) normal, truncated normal, GPD, LKJ."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats
from scipy.stats import qmc

from . import _kernels
from .exceptions import UsageError

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class CholCorr:
    """Upper-triangular Cholesky factor ``U`` of a correlation matrix ``C = U'U``.

    Columns of ``U`` have unit Euclidean norm and the diagonal is strictly
    positive.
    """

    upper_factor: np.ndarray

    def __post_init__(self):
        U = np.array(self.upper_factor, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise UsageError("upper_factor must be a square matrix")
        if np.any(np.tril(U, -1) != 0.0):
            raise UsageError("upper_factor must be upper triangular")
        if np.any(np.diag(U) <= 0.0):
            raise UsageError("diagonal of upper_factor must be strictly positive")
        if np.any(np.abs(np.linalg.norm(U, axis=0) - 1.0) > 1e-12):
            raise UsageError("columns of upper_factor must have unit norm")
        U.setflags(write=False)
        object.__setattr__(self, "upper_factor", U)

    @property
    def dim(self) -> int:
        return self.upper_factor.shape[0]

    @property
    def corr(self) -> np.ndarray:
        return self.upper_factor.T @ self.upper_factor

    @property
    def free(self) -> np.ndarray:
        """Strictly-upper entries, column by column."""
        U = self.upper_factor
        return np.array([U[i, j] for j in range(1, self.dim) for i in range(j)])

    @classmethod
    def identity(cls, d: int) -> "CholCorr":
        return cls(np.eye(d))

    @classmethod
    def from_free(cls, free, d: int) -> "CholCorr":
        """Build the factor from its strictly-upper entries (column-major).

        The diagonal entry of each column is set so the column has unit norm.
        """
        free = np.asarray(free, dtype=float)
        if free.size != d * (d - 1) // 2:
            raise UsageError(f"expected {d * (d - 1) // 2} free entries, got {free.size}")
        U = np.zeros((d, d))
        U[0, 0] = 1.0
        pos = 0
        for j in range(1, d):
            col = free[pos:pos + j]
            ss = float(col @ col)
            if ss >= 1.0:
                raise UsageError("free entries of a column must have squared norm < 1")
            U[:j, j] = col
            U[j, j] = math.sqrt(1.0 - ss)
            pos += j
        return cls(U)

    @classmethod
    def from_corr(cls, C) -> "CholCorr":
        C = np.asarray(C, dtype=float)
        L = np.linalg.cholesky(C)
        U = L.T / np.linalg.norm(L.T, axis=0)
        return cls(np.triu(U))


@dataclass(frozen=True)
class MvnParams:
    """Mean, marginal standard deviations and correlation factor of a normal law."""

    mean: np.ndarray
    sd: np.ndarray
    corr: CholCorr

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        sd = np.atleast_1d(np.asarray(self.sd, dtype=float)).copy()
        if not (mean.shape == sd.shape and mean.size == self.corr.dim):
            raise UsageError("mean, sd and corr must share one dimension")
        if np.any(sd <= 0.0):
            raise UsageError("sd must be strictly positive")
        mean.setflags(write=False)
        sd.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sd", sd)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def cov(self) -> np.ndarray:
        return self.corr.corr * np.outer(self.sd, self.sd)

    @property
    def chol_lower(self) -> np.ndarray:
        """Lower Cholesky factor of the covariance, ``diag(sd) U'``."""
        return self.sd[:, None] * self.corr.upper_factor.T

    @classmethod
    def from_cov(cls, mean, cov) -> "MvnParams":
        cov = np.asarray(cov, dtype=float)
        sd = np.sqrt(np.diag(cov))
        return cls(mean, sd, CholCorr.from_corr(cov / np.outer(sd, sd)))


def _check_dim(x, p: MvnParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.dim:
        raise UsageError(f"dimension mismatch: x has {x.shape[-1]}, params have {p.dim}")
    return x


def mvn_logpdf(x, p: MvnParams):
    """Log density of the multivariate normal; ``x`` may be ``(d,)`` or ``(n, d)``."""
    x = _check_dim(x, p)
    L = p.chol_lower
    dev = np.atleast_2d(x) - p.mean
    v = np.linalg.solve(L, dev.T) if p.dim > 1 else dev.T / L[0, 0]
    out = (-0.5 * np.sum(v * v, axis=0) - 0.5 * p.dim * _LOG_2PI
           - np.sum(np.log(np.diag(L))))
    return float(out[0]) if x.ndim == 1 else out


def _qmc_mvn_cdf(b, L, n_samples, n_randomizations, rng):
    # Genz separation-of-variables integrand with scrambled Sobol' points.
    d = b.size
    estimates = np.empty(n_randomizations)
    seeds = rng.integers(0, 2**32, size=n_randomizations)
    for r in range(n_randomizations):
        w = qmc.Sobol(d=max(d - 1, 1), scramble=True, seed=int(seeds[r])).random(n_samples)
        e = np.full(n_samples, special.ndtr(b[0] / L[0, 0]))
        f = e.copy()
        y = np.empty((n_samples, d - 1))
        for i in range(1, d):
            y[:, i - 1] = special.ndtri(np.clip(w[:, i - 1] * e, 1e-300, 1 - 1e-16))
            e = special.ndtr((b[i] - y[:, :i] @ L[i, :i]) / L[i, i])
            f = f * e
        estimates[r] = f.mean()
    err = 3.0 * estimates.std(ddof=1) / math.sqrt(n_randomizations)
    return float(estimates.mean()), float(err)


def mvn_cdf_with_error(x, p: MvnParams, n_samples=4096, n_randomizations=16, rng=None):
    """``(P(X <= x), error_estimate)``.

    Exact to roughly machine precision for ``d <= 2``; randomized quasi-Monte
    Carlo for larger ``d`` with a 3-standard-error bound.
    """
    x = _check_dim(x, p)
    if x.ndim != 1:
        raise UsageError("mvn_cdf takes a single point")
    h = (x - p.mean) / p.sd
    if p.dim == 1:
        return float(special.ndtr(h[0])), 0.0
    if p.dim == 2:
        return float(_kernels.bvn_lower(h[0], h[1], p.corr.upper_factor[0, 1])), 1e-15
    if np.any(x == -np.inf):
        return 0.0, 0.0
    finite = np.isfinite(x)
    if not np.all(finite):
        keep = np.flatnonzero(finite)
        if keep.size == 0:
            return 1.0, 0.0
        sub = MvnParams.from_cov(p.mean[keep], p.cov[np.ix_(keep, keep)])
        return mvn_cdf_with_error(x[keep], sub, n_samples, n_randomizations, rng)
    rng = np.random.default_rng(0) if rng is None else rng
    val, err = _qmc_mvn_cdf(x - p.mean, np.linalg.cholesky(p.cov), n_samples,
                            n_randomizations, rng)
    return min(max(val, 0.0), 1.0), err


def mvn_cdf(x, p: MvnParams, **kwargs) -> float:
    """Multivariate normal CDF at a single point."""
    return mvn_cdf_with_error(x, p, **kwargs)[0]


def bvn_cdf_many(x, p: MvnParams) -> np.ndarray:
    """Vectorized bivariate normal CDF for an ``(n, 2)`` array of points."""
    x = _check_dim(np.atleast_2d(x), p)
    if p.dim != 2:
        raise UsageError("bvn_cdf_many requires d = 2")
    h = (x - p.mean) / p.sd
    return _kernels.bvn_lower_many(np.ascontiguousarray(h[:, 0]),
                                   np.ascontiguousarray(h[:, 1]),
                                   float(p.corr.upper_factor[0, 1]))


def truncnorm_logpdf(x, mean, sd, lo, hi):
    """Log density of ``N(mean, sd^2)`` truncated to ``[lo, hi]``."""
    if not lo < hi:
        raise UsageError("truncation bounds require lo < hi")
    if sd <= 0:
        raise UsageError("sd must be positive")
    x = np.asarray(x, dtype=float)
    a = (lo - mean) / sd
    b = (hi - mean) / sd
    # upper-tail form keeps the normalizer accurate when both bounds sit far right
    if a > 0:
        log_mass = np.log(special.ndtr(-a) - special.ndtr(-b))
    else:
        log_mass = np.log(special.ndtr(b) - special.ndtr(a))
    out = stats.norm.logpdf(x, mean, sd) - log_mass
    out = np.where((x >= lo) & (x <= hi), out, -np.inf)
    return float(out) if out.ndim == 0 else out


def gpd_sf(x, sigma, gamma):
    """Survival function of the generalized Pareto distribution for ``x >= 0``."""
    if np.any(np.asarray(sigma) <= 0):
        raise UsageError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    t = gamma * x / sigma
    small = (abs(gamma) < _kernels.GAMMA_ZERO_TOL) & (np.abs(t) < _kernels.SERIES_TOL)
    safe_gamma = gamma if gamma != 0.0 else 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(small, x / sigma * (1.0 - 0.5 * t),
                     np.where(1.0 + t > 0, np.log1p(np.maximum(t, -1.0)) / safe_gamma, np.inf))
    out = np.exp(-z)
    return float(out) if out.ndim == 0 else out


def lkj_log_normalizer(d: int, delta: float) -> float:
    """log of the integral of ``det(C)^(delta-1)`` over d-dimensional correlation matrices."""
    total = 0.0
    for k in range(1, d):
        total += (2 * delta - 2 + d - k) * (d - k) * math.log(2.0)
        b = delta + (d - k - 1) / 2.0
        total += (d - k) * special.betaln(b, b)
    return total


def lkj_chol_logdensity(corr: CholCorr, delta: float, normalized: bool = True) -> float:
    """LKJ log density expressed on the free entries of the upper Cholesky factor.

    Combines ``(delta - 1) log det C`` with the Jacobian of the map from the
    strictly-upper factor entries to the off-diagonal of ``C``.
    """
    if delta <= 0:
        raise UsageError("delta must be positive")
    d = corr.dim
    diag = np.diag(corr.upper_factor)
    j = np.arange(1, d + 1)
    out = float(np.sum((d - j + 2 * delta - 2) * np.log(diag)))
    if normalized:
        out -= lkj_log_normalizer(d, delta)
    return out


def lkj_jacobian_logterm(corr: CholCorr) -> float:
    """The factor-to-matrix change-of-variables part of ``lkj_chol_logdensity``."""
    d = corr.dim
    j = np.arange(1, d + 1)
    return float(np.sum((d - j) * np.log(np.diag(corr.upper_factor))))
