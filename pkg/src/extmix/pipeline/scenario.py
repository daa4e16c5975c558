"""Replicated simulation studies: simulate, fit, and summarize recovery."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..exceptions import (DegenerateConfigurationError, InitializationError,
                          NumericPathologyError, UsageError)
from ..inference.chains import SamplerConfig, posterior_summary, run_chains
from ..inference.diagnostics import gelman_rubin
from ..model import ModelParams, PriorSpec, scenario_params, simulate_model, summary_names

log = logging.getLogger(__name__)

DESK_REPLICATIONS = 50
PAPER_REPLICATIONS = 1000


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation scenario.

    ``prior=None`` rebuilds the default data-driven prior for every
    replicated dataset.
    """

    name: str
    true_params: ModelParams
    n_points: int = 2000
    n_replications: int = DESK_REPLICATIONS
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    prior: Optional[PriorSpec] = None

    def __post_init__(self):
        if self.n_points < 20 or self.n_replications < 1:
            raise UsageError("need n_points >= 20 and n_replications >= 1")
        if self.prior is not None and self.prior.dim != self.true_params.dim:
            raise UsageError("prior and true parameters differ in dimension")

    @classmethod
    def named(cls, name: str, n_replications: Optional[int] = None, paper_scale: bool = False,
              **kwargs) -> "ScenarioSpec":
        """Scenario ``"1.1"``, ``"1.2"`` or ``"1.3"`` with desk or paper replication counts."""
        if paper_scale:
            n_replications = PAPER_REPLICATIONS
        reps = DESK_REPLICATIONS if n_replications is None else n_replications
        return cls(name, scenario_params(name), n_replications=reps, **kwargs)


@dataclass
class RunReport:
    """Aggregated recovery table and per-replication details.

    ``rows`` maps each summary parameter to its true value, mean posterior
    mean, mean 95% interval length and interval coverage rate.
    """

    scenario: str
    rows: dict
    n_replications: int
    n_failed: int
    replications: list
    max_rhat: list

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "n_replications": self.n_replications,
            "n_failed": self.n_failed,
            "rows": self.rows,
            "max_rhat": self.max_rhat,
        }


def run_scenario(spec: ScenarioSpec, seed: int = 0, n_jobs: int = 1) -> RunReport:
    """Simulate, fit and summarize ``spec.n_replications`` datasets.

    Replication ``k`` uses the ``k``-th stream spawned from ``seed`` for both
    its data and its chains, so any replication can be rerun on its own.
    Replications whose sampler fails are counted and left out.
    """
    d = spec.true_params.dim
    names = summary_names(d)
    truth = spec.true_params.summary_vector()
    kids = np.random.SeedSequence(seed).spawn(spec.n_replications)
    reps, rhats = [], []
    failed = 0
    for k, ss in enumerate(kids):
        data_ss, chain_ss = ss.spawn(2)
        rng = np.random.Generator(np.random.Philox(data_ss))
        data = simulate_model(spec.true_params, spec.n_points, rng)
        prior = spec.prior or PriorSpec.default(data)
        cfg = replace(spec.sampler, seed=int(chain_ss.generate_state(1)[0]))
        try:
            chains = run_chains(data, prior, cfg, n_jobs=n_jobs)
        except (InitializationError, NumericPathologyError, DegenerateConfigurationError) as exc:
            log.warning("replication %d failed: %s", k, exc)
            failed += 1
            continue
        summ = posterior_summary(chains, d)
        reps.append(summ)
        if cfg.n_chains >= 2 and len(chains[0]) >= 10:
            rhats.append(max(gelman_rubin(chains, j) for j in range(chains[0].draws.shape[1])))
        log.info("replication %d/%d done", k + 1, spec.n_replications)
    rows = {}
    for i, name in enumerate(names):
        if reps:
            means = np.array([r[name]["mean"] for r in reps])
            lo = np.array([r[name]["lower"] for r in reps])
            hi = np.array([r[name]["upper"] for r in reps])
            cover = float(np.mean((lo <= truth[i]) & (truth[i] <= hi)))
            rows[name] = {"true": float(truth[i]), "mean": float(means.mean()),
                          "ci_length": float(np.mean(hi - lo)), "coverage": cover}
        else:
            rows[name] = {"true": float(truth[i]), "mean": np.nan, "ci_length": np.nan,
                          "coverage": np.nan}
    return RunReport(spec.name, rows, spec.n_replications, failed, reps, rhats)
