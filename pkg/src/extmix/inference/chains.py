"""Multi-chain orchestration, initialization and chain persistence."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from ..exceptions import InitializationError, UsageError
from ..model import (ModelParams, PosteriorTarget, PriorSpec, as_dataset,
                     flat_to_summary, summary_names)
from ..stats_kernels import CholCorr, MvnParams
from ..mgpd import TailParams
from .samplers import adapt_scales, afss_adapt, afss_step, rwmh_step

AFSS_ADAPT_INTERVAL = 200
_BLOCK = 512


class MixingWarning(UserWarning):
    """A chain rejected every proposal for some coordinate after burn-in."""


@dataclass(frozen=True)
class SamplerConfig:
    """MCMC run settings.

    Defaults reproduce the reference configuration: three chains of 30,000
    iterations, 20,000 of burn-in and a thinning interval of 10.
    """

    n_iter: int = 30000
    burn_in: int = 20000
    thin: int = 10
    n_chains: int = 3
    seed: int = 0
    algorithm: str = "RWMH"
    adapt_interval: int = 50
    target_accept: float = 0.44
    initial_scales: Optional[tuple] = None

    def __post_init__(self):
        if self.algorithm not in ("RWMH", "AFSS"):
            raise UsageError("algorithm must be 'RWMH' or 'AFSS'")
        if not (0 <= self.burn_in < self.n_iter):
            raise UsageError("need 0 <= burn_in < n_iter")
        if self.thin < 1 or self.n_chains < 1 or self.adapt_interval < 1:
            raise UsageError("thin, n_chains and adapt_interval must be at least 1")
        if not 0.0 < self.target_accept < 1.0:
            raise UsageError("target_accept must lie in (0, 1)")
        if self.initial_scales is not None:
            scales = tuple(float(s) for s in self.initial_scales)
            if any(not s > 0 for s in scales):
                raise UsageError("initial_scales must be positive")
            object.__setattr__(self, "initial_scales", scales)

    @property
    def n_stored(self) -> int:
        """Draws kept per chain."""
        return len(range(self.burn_in, self.n_iter, self.thin))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["initial_scales"] = list(self.initial_scales) if self.initial_scales else None
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        d = dict(d)
        if d.get("initial_scales") is not None:
            d["initial_scales"] = tuple(d["initial_scales"])
        return cls(**d)


@dataclass
class ChainStore:
    """Stored draws of one chain.

    Attributes
    ----------
    draws : ndarray of shape (n_stored, p)
        Flat parameter vectors.
    logpost : ndarray of shape (n_stored,)
    names : list of str
        Coordinate names matching the columns of ``draws``.
    accept_stats : ndarray of shape (p,)
        Post-burn-in acceptance rate per coordinate (RWMH) or mean number of
        interval moves per slice update (AFSS).
    scales : ndarray of shape (n_rounds, p)
        Proposal scales (RWMH) or slice widths (AFSS) after each adaptation.
    warnings : list of str
    """

    draws: np.ndarray
    logpost: np.ndarray
    names: list
    accept_stats: np.ndarray
    scales: np.ndarray
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.draws.shape[0] != self.logpost.shape[0]:
            raise UsageError("draws and logpost lengths differ")
        if self.draws.shape[1] != len(self.names):
            raise UsageError("one name per draw column is required")

    def __len__(self) -> int:
        return self.draws.shape[0]

    def params(self, d: int) -> list:
        """Draws as :class:`ModelParams` objects."""
        return [ModelParams.from_flat(row, d) for row in self.draws]

    def column(self, selector) -> np.ndarray:
        """One coordinate's trace selected by index or name."""
        if isinstance(selector, str):
            if selector not in self.names:
                raise UsageError(f"unknown parameter {selector!r}")
            selector = self.names.index(selector)
        return self.draws[:, selector]


def stream_generators(seed: int, n: int) -> list:
    """``n`` independent counter-based generators derived from one master seed."""
    return [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(seed).spawn(n)]


def run_chain(logpost_fn: Callable, theta0, cfg: SamplerConfig, rng: np.random.Generator,
              names: Optional[Sequence[str]] = None) -> ChainStore:
    """Run one chain of ``cfg.algorithm`` from ``theta0``.

    Adaptation happens only during burn-in; the kernel is frozen afterwards.
    """
    theta = np.array(theta0, dtype=float)
    p = theta.size
    names = list(names) if names is not None else [f"theta_{j}" for j in range(p)]
    lp = logpost_fn(theta)
    if not math.isfinite(lp):
        raise InitializationError("initial point has a non-finite log target")
    if cfg.initial_scales is not None:
        if len(cfg.initial_scales) != p:
            raise UsageError("initial_scales length does not match the parameter vector")
        scales = np.array(cfg.initial_scales)
    else:
        scales = np.full(p, 0.1)
    n_keep = cfg.n_stored
    draws = np.empty((n_keep, p))
    lps = np.empty(n_keep)
    trace = [scales.copy()]
    post_counts = np.zeros(p)
    post_moves = np.zeros(p)
    kept = 0
    if cfg.algorithm == "RWMH":
        window = np.zeros(p)
        rounds = 0
        for start in range(0, cfg.n_iter, _BLOCK):
            stop = min(start + _BLOCK, cfg.n_iter)
            normals = rng.standard_normal((stop - start, p))
            log_u = np.log(rng.random((stop - start, p)))
            for it in range(start, stop):
                theta, lp, acc = rwmh_step(theta, lp, logpost_fn, scales, rng,
                                           normals[it - start], log_u[it - start])
                if it < cfg.burn_in:
                    window += acc
                    if (it + 1) % cfg.adapt_interval == 0:
                        rounds += 1
                        scales = adapt_scales(window / cfg.adapt_interval, scales, rounds,
                                              cfg.target_accept)
                        trace.append(scales.copy())
                        window[:] = 0.0
                else:
                    post_counts += acc
                    if (it - cfg.burn_in) % cfg.thin == 0:
                        draws[kept] = theta
                        lps[kept] = lp
                        kept += 1
        n_post = cfg.n_iter - cfg.burn_in
        accept_stats = post_counts / n_post
    else:
        basis = np.eye(p)
        widths = scales.copy()
        exp_tot = np.zeros(p)
        con_tot = np.zeros(p)
        history = []
        for it in range(cfg.n_iter):
            theta, lp, ne, nc = afss_step(theta, lp, logpost_fn, basis, widths, rng)
            if it < cfg.burn_in:
                exp_tot += ne
                con_tot += nc
                history.append(theta)
                if (it + 1) % AFSS_ADAPT_INTERVAL == 0 and len(history) >= 50:
                    # forget the first half so early transients fade out
                    recent = np.asarray(history[len(history) // 2:])
                    if recent.shape[0] >= 50:
                        basis, widths = afss_adapt(recent, basis, widths, exp_tot, con_tot)
                        trace.append(widths.copy())
                    exp_tot[:] = 0.0
                    con_tot[:] = 0.0
            else:
                post_moves += ne + nc
                if (it - cfg.burn_in) % cfg.thin == 0:
                    draws[kept] = theta
                    lps[kept] = lp
                    kept += 1
        accept_stats = post_moves / (cfg.n_iter - cfg.burn_in)
    store = ChainStore(draws, lps, names, accept_stats, np.asarray(trace))
    if cfg.algorithm == "RWMH":
        stuck = [names[j] for j in range(p) if post_counts[j] == 0 and scales[j] > 0]
        if stuck:
            msg = "no accepted proposals after burn-in for: " + ", ".join(stuck)
            store.warnings.append(msg)
            warnings.warn(msg, MixingWarning, stacklevel=2)
    return store


def init_params(data, spec: PriorSpec, rng: Optional[np.random.Generator] = None,
                max_tries: int = 50) -> ModelParams:
    """Data-driven starting point with a finite log posterior.

    Thresholds start at the marginal 90th percentiles, the bulk at the
    moments of the rows below them, ``gamma = 0.1``, ``a = 1`` and ``sigma``
    at the standard deviation of the marginal exceedances. If that point has
    zero posterior density, ``gamma = 0`` and then small random jitters are
    tried.

    Raises
    ------
    InitializationError
        For constant columns or when no finite starting point is found.
    """
    data = as_dataset(data)
    X = data.values
    if data.n < 20:
        raise UsageError("initialization needs at least 20 observations")
    if np.any(np.std(X, axis=0) == 0.0):
        raise InitializationError("a data column has zero variance")
    d = data.d
    u = np.percentile(X, 90, axis=0)
    below = X[np.all(X <= u, axis=1)]
    if below.shape[0] < d + 2:
        raise InitializationError("too few rows below the initial threshold")
    mean = below.mean(axis=0)
    cov = np.atleast_2d(np.cov(below, rowvar=False))
    sd = np.sqrt(np.diag(cov))
    if np.any(sd == 0.0):
        raise InitializationError("sub-threshold rows have a constant column")
    corr = cov / np.outer(sd, sd)
    try:
        factor = CholCorr.from_corr(corr)
    except np.linalg.LinAlgError:
        factor = CholCorr.identity(d)
    sigma = np.empty(d)
    for j in range(d):
        exc = X[X[:, j] > u[j], j] - u[j]
        sigma[j] = exc.std(ddof=1) if exc.size > 1 else sd[j]
        if not sigma[j] > 0:
            sigma[j] = sd[j]
    sigma = np.minimum(sigma, 0.5 * spec.u_sigma)
    target = PosteriorTarget(data, spec)
    base = ModelParams(MvnParams(mean, sd, factor), u, TailParams(np.ones(d), sigma, np.full(d, 0.1)))
    theta = base.to_flat()
    if math.isfinite(target(theta)):
        return base
    nf = d * (d - 1) // 2
    g = slice(5 * d + nf, 6 * d + nf)
    theta[g] = 0.0
    if math.isfinite(target(theta)):
        return ModelParams.from_flat(theta, d)
    rng = np.random.default_rng(0) if rng is None else rng
    for _ in range(max_tries):
        trial = theta * (1.0 + 0.05 * rng.standard_normal(theta.size))
        trial[g] = 0.05 * rng.standard_normal(d)
        if math.isfinite(target(trial)):
            return ModelParams.from_flat(trial, d)
    raise InitializationError("no starting point with finite log posterior found")


def _jittered_start(target, theta, rng, tries=50):
    # small multiplicative jitter keeps chains from starting at one point
    for _ in range(tries):
        trial = theta * (1.0 + 0.01 * rng.standard_normal(theta.size))
        if math.isfinite(target(trial)):
            return trial
    return theta


def run_chains(data, spec: PriorSpec, cfg: SamplerConfig, n_jobs: int = 1) -> list:
    """Run ``cfg.n_chains`` independent chains on the model posterior.

    Each chain uses its own counter-based stream derived from ``cfg.seed``,
    so results do not depend on ``n_jobs``.
    """
    data = as_dataset(data)
    base = init_params(data, spec, np.random.Generator(np.random.Philox(cfg.seed)))
    gens = stream_generators(cfg.seed, cfg.n_chains)
    if n_jobs == 1:
        return [_model_chain(data, spec, cfg, base.to_flat(), g) for g in gens]
    from joblib import Parallel, delayed
    return Parallel(n_jobs=n_jobs)(delayed(_model_chain)(data, spec, cfg, base.to_flat(), g)
                                   for g in gens)


def _model_chain(data, spec, cfg, theta0, rng):
    target = PosteriorTarget(data, spec)
    start = _jittered_start(target, theta0, rng)
    return run_chain(target, start, cfg, rng, target.names)


def pooled_draws(chains: Sequence[ChainStore]) -> np.ndarray:
    if not chains:
        raise UsageError("no chains given")
    return np.vstack([c.draws for c in chains])


def posterior_summary(chains: Sequence[ChainStore], d: int, level: float = 0.95) -> dict:
    """Posterior mean and equal-tailed credible interval per summary parameter.

    Includes the derived diagonal entries of the correlation factor.
    """
    draws = flat_to_summary(pooled_draws(chains), d)
    lo, hi = np.percentile(draws, [50 * (1 - level), 50 * (1 + level)], axis=0)
    mean = draws.mean(axis=0)
    return {name: {"mean": float(mean[k]), "lower": float(lo[k]), "upper": float(hi[k])}
            for k, name in enumerate(summary_names(d))}


def _fmt(x: float) -> str:
    return repr(float(x))


def save_chains(chains: Sequence[ChainStore], out_dir, cfg: SamplerConfig,
                diagnostics: Optional[dict] = None) -> list:
    """Write ``chain_<k>.csv`` per chain plus ``manifest.json``.

    CSV columns are the flat parameter names in sampling order followed by
    ``logpost``. Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, c in enumerate(chains):
        path = out / f"chain_{k}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(c.names) + ["logpost"])
            for row, lp in zip(c.draws, c.logpost):
                w.writerow([_fmt(v) for v in row] + [_fmt(lp)])
        paths.append(path)
    manifest = {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "acceptance": [c.accept_stats.tolist() for c in chains],
        "warnings": [list(c.warnings) for c in chains],
        "diagnostics": diagnostics or {},
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    paths.append(mpath)
    return paths


def load_chain_csv(path) -> ChainStore:
    """Read a chain CSV written by :func:`save_chains`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "logpost":
        raise UsageError(f"{path} is not a chain file")
    names = rows[0][:-1]
    arr = np.array(rows[1:], dtype=float).reshape(-1, len(names) + 1)
    return ChainStore(arr[:, :-1], arr[:, -1], names, np.full(len(names), np.nan),
                      np.empty((0, len(names))))
