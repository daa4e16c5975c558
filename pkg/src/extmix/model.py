"""Multivariate extreme value mixture: Gaussian bulk below ``u``, mGPD tail above.

The density is ``f_bulk(x)`` when ``x <= u`` componentwise and
``(1 - F_bulk(u)) h(x - u)`` otherwise, where ``h`` is the observation-scale
mGPD density. Points exactly on the threshold belong to the bulk.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import special

from . import _kernels, mgpd
from .exceptions import DegenerateConfigurationError, UsageError
from .mgpd import TailParams
from .stats_kernels import (CholCorr, MvnParams, lkj_chol_logdensity, lkj_log_normalizer,
                            mvn_cdf, mvn_logpdf, truncnorm_logpdf)


@dataclass(frozen=True)
class Dataset:
    """An immutable ``n x d`` sample with column labels."""

    values: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        X = np.array(self.values, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise UsageError("dataset must be a non-empty 2-D array")
        if not np.all(np.isfinite(X)):
            raise UsageError("dataset contains missing or non-finite values")
        X.setflags(write=False)
        names = tuple(self.names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise UsageError("one name per column is required")
        object.__setattr__(self, "values", X)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def as_dataset(data) -> Dataset:
    return data if isinstance(data, Dataset) else Dataset(np.asarray(data, dtype=float))


@dataclass(frozen=True)
class ModelParams:
    bulk: MvnParams
    u: np.ndarray
    tail: TailParams

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=float)).copy()
        if not (u.size == self.bulk.dim == self.tail.dim):
            raise UsageError("bulk, threshold and tail dimensions differ")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def dim(self) -> int:
        return self.u.size

    def to_flat(self) -> np.ndarray:
        return np.concatenate([self.bulk.mean, self.bulk.sd, self.bulk.corr.free, self.u,
                               self.tail.a, self.tail.sigma, self.tail.gamma])

    @classmethod
    def from_flat(cls, theta, d: int) -> "ModelParams":
        theta = np.asarray(theta, dtype=float)
        nf = d * (d - 1) // 2
        if theta.size != 6 * d + nf:
            raise UsageError(f"flat vector for d={d} must have {6 * d + nf} entries")
        bulk = MvnParams(theta[:d], theta[d:2 * d], CholCorr.from_free(theta[2 * d:2 * d + nf], d))
        b = 2 * d + nf
        tail = TailParams(theta[b + d:b + 2 * d], theta[b + 2 * d:b + 3 * d], theta[b + 3 * d:b + 4 * d])
        return cls(bulk, theta[b:b + d], tail)

    def to_dict(self) -> dict:
        return dict(zip(summary_names(self.dim), self.summary_vector().tolist()))

    def summary_vector(self) -> np.ndarray:
        """Flat vector with the derived factor diagonal appended after the free entries."""
        return flat_to_summary(self.to_flat(), self.dim)


def free_names(d: int) -> list[str]:
    """Names of the sampled coordinates, in flat-vector order."""
    r = range(1, d + 1)
    corr = [f"U_{i}_{j}" for j in range(2, d + 1) for i in range(1, j)]
    return ([f"mu_{i}" for i in r] + [f"s_{i}" for i in r] + corr + [f"u_{i}" for i in r]
            + [f"a_{i}" for i in r] + [f"sigma_{i}" for i in r] + [f"gamma_{i}" for i in r])


def summary_names(d: int) -> list[str]:
    """Free names plus the derived diagonal ``U_j_j`` (j >= 2) after the correlation block."""
    names = free_names(d)
    nf = d * (d - 1) // 2
    diag = [f"U_{j}_{j}" for j in range(2, d + 1)]
    return names[:2 * d + nf] + diag + names[2 * d + nf:]


def flat_to_summary(theta: np.ndarray, d: int) -> np.ndarray:
    """Insert derived factor diagonals into flat draws; accepts ``(p,)`` or ``(n, p)``."""
    theta = np.asarray(theta, dtype=float)
    nf = d * (d - 1) // 2
    flat = np.atleast_2d(theta)
    diag = []
    pos = 2 * d
    for j in range(1, d):
        col = flat[:, pos:pos + j]
        diag.append(np.sqrt(np.clip(1.0 - np.sum(col * col, axis=1), 0.0, None)))
        pos += j
    diag = np.column_stack(diag) if diag else np.empty((flat.shape[0], 0))
    out = np.hstack([flat[:, :2 * d + nf], diag, flat[:, 2 * d + nf:]])
    return out[0] if theta.ndim == 1 else out


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters of the bulk, threshold and tail priors.

    Bulk: ``mu_i ~ N(m_i, t_i^2)``, ``s_i ~ U(0, b_i)``, correlation ~ LKJ(delta).
    Threshold: ``u_i ~ N(nu_i, s_u_i^2)`` truncated to ``[p_i, q_i]``.
    Tail: ``a_i ~ U(0, u_a)``, ``gamma_i ~ U(l_gamma, u_gamma)``, ``sigma_i ~ U(0, u_sigma)``.
    """

    m: np.ndarray
    t: np.ndarray
    b: np.ndarray
    nu: np.ndarray
    s_u: np.ndarray
    p: np.ndarray
    q: np.ndarray
    delta: float = 1.3
    u_a: float = 50.0
    l_gamma: float = -1.0
    u_gamma: float = 1.0
    u_sigma: float = 50.0
    finite_expectation: bool = False

    def __post_init__(self):
        vecs = {}
        for name in ("m", "t", "b", "nu", "s_u", "p", "q"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            v.setflags(write=False)
            vecs[name] = v
            object.__setattr__(self, name, v)
        d = vecs["m"].size
        if any(v.size != d for v in vecs.values()):
            raise UsageError("all prior vectors must have the same length")
        if np.any(vecs["p"] >= vecs["q"]):
            raise UsageError("threshold bounds require p < q")
        if np.any(vecs["t"] <= 0) or np.any(vecs["b"] <= 0) or np.any(vecs["s_u"] <= 0):
            raise UsageError("t, b and s_u must be positive")
        if self.u_a <= 0 or self.u_sigma <= 0 or self.delta <= 0:
            raise UsageError("u_a, u_sigma and delta must be positive")
        if not self.l_gamma < self.u_gamma:
            raise UsageError("l_gamma must be below u_gamma")

    @property
    def dim(self) -> int:
        return self.m.size

    @classmethod
    def default(cls, data, *, finite_expectation=False, t=100.0) -> "PriorSpec":
        """Weakly informative defaults built from the empirical margins of ``data``."""
        X = as_dataset(data).values
        d = X.shape[1]
        p80, p90, p99 = np.percentile(X, [80, 90, 99], axis=0)
        return cls(m=np.zeros(d), t=np.full(d, t), b=np.full(d, 50.0), nu=p90,
                   s_u=np.full(d, 10.0), p=p80, q=p99, finite_expectation=finite_expectation)

    def hyper_array(self) -> np.ndarray:
        d = self.dim
        return np.concatenate([self.m, self.t, self.b, self.nu, self.s_u, self.p, self.q,
                               [self.delta, self.u_a, self.l_gamma, self.u_gamma, self.u_sigma,
                                lkj_log_normalizer(d, self.delta)]])

    def to_dict(self) -> dict:
        out = asdict(self)
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in out.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        return cls(**d)


@dataclass(frozen=True)
class Partition:
    bulk_idx: np.ndarray
    tail_idx: np.ndarray

    @property
    def tail_count(self) -> int:
        return int(self.tail_idx.size)


def _exceeds(X, u) -> np.ndarray:
    return np.any(np.asarray(X) > u, axis=-1)


def partition(data, u) -> Partition:
    """Split rows into bulk (``x <= u``) and tail (at least one component above ``u``)."""
    X = as_dataset(data).values
    u = np.asarray(u, dtype=float)
    if u.size != X.shape[1]:
        raise UsageError("threshold dimension does not match the data")
    tail = _exceeds(X, u)
    return Partition(np.flatnonzero(~tail), np.flatnonzero(tail))


def log_tail_mass(bulk: MvnParams, u) -> float:
    """``log(1 - F_bulk(u))``."""
    u = np.asarray(u, dtype=float)
    if bulk.dim == 2:
        return float(_kernels.log_tail_mass_2d(bulk.mean, bulk.sd,
                                               float(bulk.corr.upper_factor[0, 1]), u))
    if bulk.dim == 1:
        return float(special.log_ndtr(-(u[0] - bulk.mean[0]) / bulk.sd[0]))
    mass = 1.0 - mvn_cdf(u, bulk)
    return math.log(mass) if mass > 0 else -math.inf


def mixture_logdensity(x, p: ModelParams):
    """Log density of the mixture at ``x`` (``(d,)`` or ``(n, d)``)."""
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    tail = _exceeds(X, p.u)
    out = np.empty(X.shape[0])
    if np.any(~tail):
        out[~tail] = mvn_logpdf(X[~tail], p.bulk)
    if np.any(tail):
        out[tail] = log_tail_mass(p.bulk, p.u) + np.atleast_1d(mgpd.obs_logdensity(X[tail] - p.u, p.tail))
    return float(out[0]) if x.ndim == 1 else out


def log_likelihood(data, p: ModelParams) -> float:
    X = as_dataset(data).values
    part = partition(X, p.u)
    total = 0.0
    if part.bulk_idx.size:
        total += float(np.sum(mvn_logpdf(X[part.bulk_idx], p.bulk)))
    if part.tail_count:
        lt = np.atleast_1d(mgpd.obs_logdensity(X[part.tail_idx] - p.u, p.tail))
        if np.any(np.isneginf(lt)):
            return -math.inf
        total += float(np.sum(lt)) + part.tail_count * log_tail_mass(p.bulk, p.u)
    return total


def _uniform_logpdf(x, lo, hi) -> float:
    x = np.asarray(x)
    if np.any(x <= lo) or np.any(x >= hi):
        return -math.inf
    return -x.size * math.log(hi - lo)


def log_prior(p: ModelParams, spec: PriorSpec) -> float:
    d = p.dim
    if spec.dim != d:
        raise UsageError("prior and parameter dimensions differ")
    lp = 0.0
    lp += float(np.sum(-0.5 * ((p.bulk.mean - spec.m) / spec.t) ** 2
                       - 0.5 * math.log(2 * math.pi) - np.log(spec.t)))
    for i in range(d):
        lp += _uniform_logpdf(p.bulk.sd[i], 0.0, spec.b[i])
        lp += truncnorm_logpdf(p.u[i], spec.nu[i], spec.s_u[i], spec.p[i], spec.q[i])
    if not math.isfinite(lp):
        return -math.inf
    lp += lkj_chol_logdensity(p.bulk.corr, spec.delta)
    lp += _uniform_logpdf(p.tail.a, 0.0, spec.u_a)
    lp += _uniform_logpdf(p.tail.gamma, spec.l_gamma, spec.u_gamma)
    lp += _uniform_logpdf(p.tail.sigma, 0.0, spec.u_sigma)
    if spec.finite_expectation and np.any(p.tail.gamma + 1.0 / p.tail.a < 0):
        return -math.inf
    return lp if math.isfinite(lp) else -math.inf


def log_posterior(data, p: ModelParams, spec: PriorSpec) -> float:
    lp = log_prior(p, spec)
    if lp == -math.inf:
        return -math.inf
    return lp + log_likelihood(data, p)


class PosteriorTarget:
    """Log posterior as a function of the flat parameter vector.

    Uses the compiled kernel for ``d = 2`` and the reference implementation
    otherwise. Invalid vectors (off the correlation manifold, negative scales)
    evaluate to ``-inf``.
    """

    def __init__(self, data, spec: PriorSpec):
        self.data = as_dataset(data)
        self.spec = spec
        self.d = self.data.d
        if spec.dim != self.d:
            raise UsageError("prior and data dimensions differ")
        self.names = free_names(self.d)
        self._X = np.ascontiguousarray(self.data.values)
        self._hyper = spec.hyper_array()
        self._fe = bool(spec.finite_expectation)
        self._center = self._X.mean(axis=0)
        nf = self.d * (self.d - 1) // 2
        self._u_slice = slice(2 * self.d + nf, 3 * self.d + nf)
        self._stats = {}

    def _partition_stats(self, u):
        # memo keyed by threshold: coordinate-wise samplers revisit the same u
        key = u.tobytes()
        hit = self._stats.get(key)
        if hit is None:
            if len(self._stats) >= 8:
                self._stats.pop(next(iter(self._stats)))
            hit = _kernels.partition_stats(self._X, u, self._center)
            self._stats[key] = hit
        return hit

    @property
    def n_params(self) -> int:
        return len(self.names)

    def __call__(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if self.d == 2:
            n_bulk, sx, sxx, tail_rows = self._partition_stats(theta[self._u_slice])
            return _kernels.log_posterior_stats_2d(theta, n_bulk, sx, sxx, self._center,
                                                   tail_rows, self._hyper, self._fe)
        lp = _kernels.log_prior_flat(theta, self.d, self._hyper, self._fe)
        if lp == -math.inf:
            return -math.inf
        return log_posterior(self.data, ModelParams.from_flat(theta, self.d), self.spec)


def simulate_model(p: ModelParams, n: int, rng: np.random.Generator,
                   names: Sequence[str] = ()) -> Dataset:
    """Draw ``n`` i.i.d. points from the mixture.

    Each row is bulk with probability ``F_bulk(u)``; bulk rows come from the
    normal truncated to ``x <= u`` by rejection, tail rows are ``u`` plus an
    mGPD draw.
    """
    if n < 1:
        raise UsageError("n must be at least 1")
    pi = 1.0 - math.exp(log_tail_mass(p.bulk, p.u))
    is_bulk = rng.random(n) < pi
    n_bulk = int(is_bulk.sum())
    out = np.empty((n, p.dim))
    if n_bulk:
        if pi < 1e-3:
            raise DegenerateConfigurationError(
                f"truncated-normal rejection rate too low (acceptance {pi:.2e})")
        L = p.bulk.chol_lower
        got = []
        have = 0
        while have < n_bulk:
            m = int(1.2 * (n_bulk - have) / pi) + 16
            z = p.bulk.mean + rng.standard_normal((m, p.dim)) @ L.T
            z = z[np.all(z <= p.u, axis=1)]
            got.append(z)
            have += z.shape[0]
        out[is_bulk] = np.vstack(got)[:n_bulk]
    if n_bulk < n:
        out[~is_bulk] = p.u + mgpd.simulate(p.tail, n - n_bulk, rng)
    return Dataset(out, tuple(names))


def scenario_params(name: str = "1.1") -> ModelParams:
    """True parameter values of the simulation scenarios 1.1-1.3."""
    gammas = {"1.1": (0.3, 0.1), "1.2": (0.2, -0.2), "1.3": (-0.1, -0.3)}
    if name not in gammas:
        raise UsageError(f"unknown scenario {name!r}")
    bulk = MvnParams([3.5, 4.0], [1.0, 1.5], CholCorr.from_free([0.7], 2))
    return ModelParams(bulk, [5.5, 6.7], TailParams([0.5, 1.2], [0.5, 1.2], gammas[name]))
