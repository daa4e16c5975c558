"""Posterior predictive replication and the summaries built from it."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..dependence import chi_empirical, chibar_empirical, kendall_tau
from ..exceptions import UsageError
from ..inference.chains import ChainStore, pooled_draws
from ..model import Dataset, ModelParams, simulate_model

DEFAULT_N_REP = 3000
DEFAULT_R_GRID = (0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95)
DEFAULT_PROBS = tuple(np.round(np.linspace(0.01, 0.99, 99), 2))


def _dim(chains: Sequence[ChainStore]) -> int:
    return sum(1 for n in chains[0].names if n.startswith("mu_"))


def posterior_predictive(chains: Sequence[ChainStore], n_rep: int = DEFAULT_N_REP,
                         n_points: int = 1000, rng: np.random.Generator = None) -> list:
    """Replicated datasets, each simulated from a uniformly drawn stored parameter.

    Raises
    ------
    UsageError
        If there are no stored draws.
    """
    if not chains or sum(len(c) for c in chains) == 0:
        raise UsageError("posterior predictive needs at least one stored draw")
    if n_rep < 1 or n_points < 1:
        raise UsageError("n_rep and n_points must be positive")
    rng = np.random.default_rng() if rng is None else rng
    draws = pooled_draws(chains)
    d = _dim(chains)
    picks = rng.integers(0, draws.shape[0], size=n_rep)
    names = tuple(f"x{j + 1}" for j in range(d))
    return [simulate_model(ModelParams.from_flat(draws[i], d), n_points, rng, names)
            for i in picks]


def qq_table(data: Dataset, reps: Sequence[Dataset], probs=DEFAULT_PROBS, level=0.95) -> list:
    """Rows ``(margin, prob, observed, lower, median, upper)`` of marginal quantile bands."""
    probs = np.asarray(probs, dtype=float)
    obs = np.quantile(data.values, probs, axis=0)
    rep_q = np.stack([np.quantile(r.values, probs, axis=0) for r in reps])
    tail = 50.0 * (1.0 - level)
    lo, med, hi = np.percentile(rep_q, [tail, 50.0, 100.0 - tail], axis=0)
    rows = []
    for j in range(data.d):
        for k, p in enumerate(probs):
            rows.append((data.names[j], float(p), float(obs[k, j]), float(lo[k, j]),
                         float(med[k, j]), float(hi[k, j])))
    return rows


def dependence_replicates(reps: Sequence[Dataset], r_grid=DEFAULT_R_GRID) -> dict:
    """Chi, chi-bar and Kendall's tau of every replicate (bivariate data only)."""
    chi = np.array([chi_empirical(r.values, r_grid).values for r in reps])
    chibar = np.array([chibar_empirical(r.values, r_grid).values for r in reps])
    tau = np.array([kendall_tau(r.values) for r in reps])
    return {"chi": chi, "chibar": chibar, "tau": tau}


def dependence_table(data: Dataset, reps: Sequence[Dataset], r_grid=DEFAULT_R_GRID,
                     level=0.95) -> list:
    """Rows ``(statistic, r, observed, lower, median, upper)``; tau has an empty ``r``."""
    rep = dependence_replicates(reps, r_grid)
    obs = {"chi": chi_empirical(data.values, r_grid).values,
           "chibar": chibar_empirical(data.values, r_grid).values}
    tail = 50.0 * (1.0 - level)
    rows = []
    for stat in ("chi", "chibar"):
        lo, med, hi = np.nanpercentile(rep[stat], [tail, 50.0, 100.0 - tail], axis=0)
        for k, r in enumerate(r_grid):
            rows.append((stat, float(r), float(obs[stat][k]), float(lo[k]), float(med[k]),
                         float(hi[k])))
    lo, med, hi = np.nanpercentile(rep["tau"], [tail, 50.0, 100.0 - tail])
    rows.append(("tau", "", float(kendall_tau(data.values)), float(lo), float(med), float(hi)))
    return rows
