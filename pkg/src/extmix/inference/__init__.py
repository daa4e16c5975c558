"""MCMC samplers, multi-chain runs and convergence diagnostics."""

from .chains import (ChainStore, MixingWarning, SamplerConfig, init_params, load_chain_csv,
                     posterior_summary, pooled_draws, run_chain, run_chains, save_chains,
                     stream_generators)
from .diagnostics import autocorrelation, effective_sample_size, gelman_rubin
from .samplers import adapt_scales, afss_adapt, afss_step, rwmh_step, slice_1d

__all__ = [
    "ChainStore", "MixingWarning", "SamplerConfig", "init_params", "load_chain_csv",
    "posterior_summary", "pooled_draws", "run_chain", "run_chains", "save_chains",
    "stream_generators", "autocorrelation", "effective_sample_size", "gelman_rubin",
    "adapt_scales", "afss_adapt", "afss_step", "rwmh_step", "slice_1d",
]
