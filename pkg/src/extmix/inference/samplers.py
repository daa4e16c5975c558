"""Single-chain MCMC transition kernels.

Every kernel works on a flat parameter vector ``theta`` together with its
cached log target value ``lp`` and a callable ``logpost_fn(theta) -> float``
that returns ``-inf`` outside the support.
"""

from __future__ import annotations

import math

import numpy as np

from ..exceptions import NumericPathologyError, UsageError

MAX_CONTRACTIONS = 1000
MAX_STEP_OUT = 100
# share of interval moves that should be expansions; 0.8 puts the width near
# 1.5 standard deviations on a Gaussian, about 2.6 moves per slice update
EXPANSION_SHARE = 0.8


def rwmh_step(theta, lp, logpost_fn, scales, rng, normals=None, log_uniforms=None):
    """One Metropolis-within-Gibbs sweep with an independent normal proposal per coordinate.

    Parameters
    ----------
    theta : ndarray of shape (p,)
        Current state. It is not modified.
    lp : float
        ``logpost_fn(theta)``; must be finite.
    logpost_fn : callable
    scales : ndarray of shape (p,)
        Proposal standard deviations. A zero scale leaves that coordinate fixed.
    rng : numpy.random.Generator
    normals, log_uniforms : ndarray of shape (p,), optional
        Pre-drawn innovations; drawn from ``rng`` when omitted.

    Returns
    -------
    theta_new : ndarray
    lp_new : float
    accepted : ndarray of bool, shape (p,)
    """
    theta = np.array(theta, dtype=float)
    if not math.isfinite(lp):
        raise UsageError("current log target must be finite")
    p = theta.size
    if normals is None:
        normals = rng.standard_normal(p)
    if log_uniforms is None:
        log_uniforms = np.log(rng.random(p))
    accepted = np.zeros(p, dtype=bool)
    for j in range(p):
        step = scales[j] * normals[j]
        if step == 0.0:
            continue
        old = theta[j]
        theta[j] = old + step
        lp_new = logpost_fn(theta)
        # -inf proposals fail this comparison and are rejected
        if lp_new - lp > log_uniforms[j]:
            lp = lp_new
            accepted[j] = True
        else:
            theta[j] = old
    return theta, lp, accepted


def adapt_scales(accept_rates, scales, round_index: int, target: float = 0.44):
    """Robbins-Monro update of log proposal scales toward ``target`` acceptance.

    The step size is ``1/sqrt(round_index)``, so the adaptation vanishes.

    Examples
    --------
    >>> adapt_scales([0.44], [1.0], 1)
    array([1.])
    """
    if round_index < 1:
        raise UsageError("round_index starts at 1")
    rates = np.asarray(accept_rates, dtype=float)
    scales = np.asarray(scales, dtype=float)
    return scales * np.exp((rates - target) / math.sqrt(round_index))


def slice_1d(theta, lp, direction, width, logpost_fn, rng, max_step_out=MAX_STEP_OUT):
    """Univariate slice update of ``theta`` along ``direction``.

    Uses stepping out with a randomly split step budget followed by
    shrinkage, which keeps the update reversible.

    Returns
    -------
    theta_new, lp_new, n_expansions, n_contractions

    Raises
    ------
    NumericPathologyError
        If shrinkage needs more than ``MAX_CONTRACTIONS`` contractions.
    """
    theta = np.asarray(theta, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if not width > 0:
        raise UsageError("slice width must be positive")
    level = lp - rng.standard_exponential()

    def f(t):
        return logpost_fn(theta + t * direction)

    left = -width * rng.random()
    right = left + width
    j = int(math.floor(max_step_out * rng.random()))
    k = max_step_out - 1 - j
    n_exp = 0
    while j > 0 and f(left) > level:
        left -= width
        j -= 1
        n_exp += 1
    while k > 0 and f(right) > level:
        right += width
        k -= 1
        n_exp += 1
    n_con = 0
    while True:
        t = left + (right - left) * rng.random()
        lp_new = f(t)
        if lp_new > level:
            return theta + t * direction, lp_new, n_exp, n_con
        n_con += 1
        if n_con > MAX_CONTRACTIONS:
            raise NumericPathologyError("slice shrinkage exceeded 1000 contractions")
        if t < 0.0:
            left = t
        else:
            right = t


def afss_step(theta, lp, logpost_fn, basis, widths, rng):
    """One factor slice sampling sweep along each column of ``basis`` in turn.

    Returns
    -------
    theta_new, lp_new, expansions (per direction), contractions (per direction)
    """
    basis = np.asarray(basis, dtype=float)
    p = basis.shape[1]
    exp_counts = np.zeros(p, dtype=int)
    con_counts = np.zeros(p, dtype=int)
    for k in range(p):
        theta, lp, ne, nc = slice_1d(theta, lp, basis[:, k], widths[k], logpost_fn, rng)
        exp_counts[k] = ne
        con_counts[k] = nc
    return theta, lp, exp_counts, con_counts


def afss_adapt(history, basis, widths, expansions=None, contractions=None):
    """New factor basis and slice widths from the sampling history.

    The basis holds the eigenvectors of the empirical covariance of
    ``history``. Widths start at the square-root eigenvalues and are then
    multiplied by a per-direction factor that pushes the share of
    expansions among all interval moves toward ``EXPANSION_SHARE`` (doubling
    or halving at most).

    Singular or non-finite covariances leave basis and widths unchanged.
    """
    history = np.asarray(history, dtype=float)
    basis = np.asarray(basis, dtype=float)
    widths = np.asarray(widths, dtype=float)
    if history.ndim != 2 or history.shape[0] < 50:
        raise UsageError("factor adaptation needs at least 50 stored draws")
    cov = np.cov(history, rowvar=False)
    cov = np.atleast_2d(cov)
    if not np.all(np.isfinite(cov)):
        return basis, widths
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-12 * max(evals[-1], 1e-300):
        return basis, widths
    order = np.argsort(evals)[::-1]
    new_basis = evecs[:, order]
    scale = np.sqrt(evals[order])
    mult = np.ones_like(scale)
    if expansions is not None and contractions is not None:
        # match each new direction with the old one it is closest to
        overlap = np.abs(basis.T @ new_basis)
        prev = overlap.argmax(axis=0)
        ne = np.asarray(expansions, dtype=float)[prev]
        nc = np.asarray(contractions, dtype=float)[prev]
        old_dirs = basis[:, prev]
        proj_var = np.sum(old_dirs * (cov @ old_dirs), axis=0)
        old_mult = widths[prev] / np.sqrt(np.maximum(proj_var, 1e-300))
        ratio = np.where(ne + nc > 0, ne / (EXPANSION_SHARE * np.maximum(ne + nc, 1.0)), 1.0)
        mult = np.clip(old_mult * np.clip(ratio, 0.5, 2.0), 1e-3, 1e3)
    return new_basis, scale * mult
