"""Convergence diagnostics: potential scale reduction and effective sample size."""

from __future__ import annotations

import math

import numpy as np

from ..exceptions import UsageError
from .chains import ChainStore


def _trace(chain, selector) -> np.ndarray:
    if isinstance(chain, ChainStore):
        if selector is None:
            raise UsageError("a parameter selector is required for ChainStore input")
        return np.asarray(chain.column(selector), dtype=float)
    x = np.asarray(chain, dtype=float)
    if x.ndim == 2:
        if selector is None or isinstance(selector, str):
            raise UsageError("select a column of a 2-D chain by integer index")
        x = x[:, selector]
    return x


def gelman_rubin(chains, param_selector=None, split: bool = True) -> float:
    """Potential scale reduction factor.

    Parameters
    ----------
    chains : sequence of ChainStore or array-like
    param_selector : int or str, optional
        Column index or parameter name; not needed for 1-D traces.
    split : bool, default True
        Split each chain into halves first, which also detects drift within
        a chain.

    Returns
    -------
    float
        ``+inf`` when every chain is constant.
    """
    traces = [_trace(c, param_selector) for c in chains]
    if len(traces) < 2:
        raise UsageError("at least two chains are required")
    n = min(t.size for t in traces)
    if n < 10:
        raise UsageError("at least 10 draws per chain are required")
    traces = [t[:n] for t in traces]
    if split:
        h = n // 2
        traces = [part for t in traces for part in (t[:h], t[n - h:])]
        n = h
    x = np.vstack(traces)
    within = float(np.mean(np.var(x, axis=1, ddof=1)))
    if within == 0.0:
        return math.inf
    between = n * float(np.var(x.mean(axis=1), ddof=1))
    var_plus = (n - 1) / n * within + between / n
    return math.sqrt(var_plus / within)


def autocorrelation(x) -> np.ndarray:
    """Sample autocorrelation at all lags, computed by FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    if acov[0] == 0.0:
        return np.zeros(n)
    return acov / acov[0]


def effective_sample_size(chain, param_selector=None) -> float:
    """Effective sample size via Geyer's initial monotone sequence estimator.

    Accepts a single trace or a list of traces (the per-chain values are
    summed). A constant trace has ESS 0.
    """
    if isinstance(chain, (list, tuple)):
        return float(sum(effective_sample_size(c, param_selector) for c in chain))
    x = _trace(chain, param_selector)
    n = x.size
    if n < 100:
        raise UsageError("at least 100 draws are required")
    if np.all(x == x[0]):
        return 0.0
    rho = autocorrelation(x)
    n_pairs = n // 2
    gam = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    # truncate at the first non-positive pair sum, then enforce monotone decrease
    pos = np.flatnonzero(gam <= 0.0)
    m = pos[0] if pos.size else gam.size
    gam = np.minimum.accumulate(gam[:m])
    tau = -1.0 + 2.0 * float(np.sum(gam))
    tau = max(tau, 1.0 / math.log10(n))
    return n / tau
