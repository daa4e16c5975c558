"""Plot-ready output files for a fitted model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from ..dependence import kendall_tau
from ..inference.chains import ChainStore, SamplerConfig, pooled_draws, posterior_summary
from ..inference.diagnostics import effective_sample_size, gelman_rubin
from ..model import Dataset, ModelParams, simulate_model
from ..scoring import ScoreTable, WeightScheme, score_table
from .config import load_schema
from .io import write_table
from .ppc import dependence_table, posterior_predictive, qq_table

REPORT_FILES = ("summary.json", "chains.csv", "dependence.csv", "qq.csv", "scores.csv")
QQ_HEADER = ("margin", "prob", "observed", "lower", "median", "upper")
DEPENDENCE_HEADER = ("statistic", "r", "observed", "lower", "median", "upper")


@dataclass
class RunArtifacts:
    """Everything :func:`report` writes, computed by :func:`build_artifacts`."""

    data: Dataset
    cfg: SamplerConfig
    chains: list
    summary: dict
    rhat: dict
    ess: dict
    dependence_rows: list
    qq_rows: list
    scores: ScoreTable


def predictive_ensemble(chains: Sequence[ChainStore], size: int, rng) -> np.ndarray:
    """``size`` posterior predictive points, each from its own uniformly drawn parameter."""
    draws = pooled_draws(chains)
    d = sum(1 for n in chains[0].names if n.startswith("mu_"))
    picks = rng.integers(0, draws.shape[0], size=size)
    out = np.empty((size, d))
    # one simulation call per distinct parameter keeps this vectorized
    for i in np.unique(picks):
        rows = np.flatnonzero(picks == i)
        out[rows] = simulate_model(ModelParams.from_flat(draws[i], d), rows.size, rng).values
    return out


def gaussian_ensemble(data: Dataset, size: int, rng) -> np.ndarray:
    """Draws from the normal distribution fitted by maximum likelihood."""
    X = data.values
    cov = np.atleast_2d(np.cov(X, rowvar=False, bias=True))
    return rng.multivariate_normal(X.mean(axis=0), cov, size=size, method="cholesky")


def model_scores(data: Dataset, chains, rng, ensemble_size=500, max_obs=500) -> ScoreTable:
    """Mixture versus fitted normal, scored on (up to ``max_obs``) observed rows."""
    ens = {"mixture": predictive_ensemble(chains, ensemble_size, rng),
           "gaussian": gaussian_ensemble(data, ensemble_size, rng)}
    Y = data.values
    if Y.shape[0] > max_obs:
        Y = Y[np.sort(rng.choice(Y.shape[0], max_obs, replace=False))]
    schemes = {"W1": WeightScheme.hard_quantile(data.values),
               "W2": WeightScheme.gaussian_cdf(data.values)}
    return score_table(ens, Y, schemes)


def build_artifacts(data: Dataset, cfg: SamplerConfig, chains: list, rng,
                    n_rep: int = 200, n_points: Optional[int] = None,
                    ensemble_size: int = 500, max_score_obs: int = 500) -> RunArtifacts:
    """Diagnostics, predictive checks and scores of a finished run."""
    d = data.d
    names = chains[0].names
    summary = posterior_summary(chains, d)
    rhat, ess = {}, {}
    for j, name in enumerate(names):
        if len(chains) >= 2 and len(chains[0]) >= 10:
            rhat[name] = gelman_rubin(chains, j)
        else:
            rhat[name] = None
        ess[name] = (effective_sample_size([c.draws[:, j] for c in chains])
                     if len(chains[0]) >= 100 else float(sum(len(c) for c in chains)))
    reps = posterior_predictive(chains, n_rep, n_points or data.n, rng)
    dep = dependence_table(data, reps) if d == 2 else []
    qq = qq_table(data, reps)
    scores = model_scores(data, chains, rng, ensemble_size, max_score_obs)
    return RunArtifacts(data, cfg, chains, summary, rhat, ess, dep, qq, scores)


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


def _clean(obj):
    # strict JSON has no NaN or infinity
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, float):
        return _finite_or_none(obj)
    return obj


def report(art: RunArtifacts, out_dir) -> list:
    """Write the five report files to ``out_dir`` and return their paths.

    The summary JSON is validated against the shipped schema before it is
    written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = art.chains[0].names
    chain_rows = []
    for k, c in enumerate(art.chains):
        for i in range(len(c)):
            chain_rows.append([k, i, *map(float, c.draws[i]), float(c.logpost[i])])
    write_table(out / "chains.csv", ["chain", "draw", *names, "logpost"], chain_rows)
    write_table(out / "dependence.csv", DEPENDENCE_HEADER, art.dependence_rows)
    write_table(out / "qq.csv", QQ_HEADER, art.qq_rows)
    art.scores.to_csv(out / "scores.csv")
    tau = kendall_tau(art.data.values) if art.data.d == 2 else None
    summary = {
        "schema_version": "1.0",
        "seed": int(art.cfg.seed),
        "n_obs": int(art.data.n),
        "dim": int(art.data.d),
        "sampler": art.cfg.to_dict(),
        "parameters": art.summary,
        "diagnostics": {"rhat": {k: _finite_or_none(v) for k, v in art.rhat.items()},
                        "ess": {k: float(v) for k, v in art.ess.items()}},
        "acceptance": [c.accept_stats.tolist() for c in art.chains],
        "dependence": {"tau_observed": _finite_or_none(tau)},
        "scores": {"rows": _clean(art.scores.rows), "excluded": art.scores.excluded,
                   "w2_chain": "separable"},
        "files": list(REPORT_FILES),
        "warnings": [w for c in art.chains for w in c.warnings],
    }
    jsonschema.validate(summary, load_schema("summary"))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return [out / f for f in REPORT_FILES]
