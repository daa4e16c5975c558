"""Empirical dependence diagnostics for bivariate samples: chi, chi-bar and Kendall's tau."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import _kernels
from .exceptions import InsufficientTailError, UsageError


@dataclass(frozen=True)
class DependenceCurve:
    """A dependence coefficient evaluated on a grid of probability levels.

    ``values`` may hold NaN where the coefficient is undefined (no joint
    exceedances); ``n_used`` is the sample size.
    """

    r_grid: np.ndarray
    values: np.ndarray
    n_used: int

    def __post_init__(self):
        r = np.asarray(self.r_grid, dtype=float)
        if r.ndim != 1 or np.any(r <= 0) or np.any(r >= 1) or np.any(np.diff(r) <= 0):
            raise UsageError("r_grid must be strictly increasing inside (0, 1)")
        object.__setattr__(self, "r_grid", r)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


def _check(data, min_n):
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise UsageError("data must be an n x 2 array")
    if X.shape[0] < min_n:
        raise UsageError(f"at least {min_n} observations are required")
    return X


def pseudo_observations(data) -> np.ndarray:
    """Column ranks divided by ``n + 1`` (ties get average ranks)."""
    X = np.asarray(data, dtype=float)
    return rankdata(X, axis=0) / (X.shape[0] + 1)


def _joint_and_grid(data, r_grid):
    X = _check(data, 50)
    n = X.shape[0]
    r = np.atleast_1d(np.asarray(r_grid, dtype=float))
    bad = r >= 1.0 - 1.0 / n
    if np.any(bad):
        raise InsufficientTailError(
            f"levels {r[bad].tolist()} leave fewer than one observation in the tail (n={n})")
    U = pseudo_observations(X)
    joint = np.array([np.count_nonzero((U[:, 0] > ri) & (U[:, 1] > ri)) for ri in r])
    return r, joint, n


def chi_empirical(data, r_grid) -> DependenceCurve:
    """``chi(r) = #(both pseudo-observations > r) / (n (1 - r))``.

    Raises
    ------
    InsufficientTailError
        If some ``r >= 1 - 1/n``.
    """
    r, joint, n = _joint_and_grid(data, r_grid)
    return DependenceCurve(r, joint / (n * (1.0 - r)), n)


def chibar_empirical(data, r_grid) -> DependenceCurve:
    """``chibar(r) = 2 log(1 - r) / log P(both > r) - 1``.

    Levels without joint exceedances give NaN.
    """
    r, joint, n = _joint_and_grid(data, r_grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = 2.0 * np.log1p(-r) / np.log(joint / n) - 1.0
    vals = np.where(joint > 0, vals, np.nan)
    return DependenceCurve(r, vals, n)


def kendall_tau(data) -> float:
    """Kendall's tau-b in ``O(n log n)`` (Knight's algorithm).

    Ties are handled with the tau-b correction
    ``(n_c - n_d) / sqrt((n0 - n1)(n0 - n2))`` where ``n1`` and ``n2`` count
    pairs tied in the first and second column. Returns NaN when a column is
    constant.
    """
    X = _check(data, 2)
    order = np.lexsort((X[:, 1], X[:, 0]))
    x = X[order, 0]
    y = np.ascontiguousarray(X[order, 1])
    n = x.size
    n0 = n * (n - 1) // 2

    def tied_pairs(v):
        _, counts = np.unique(v, return_counts=True)
        return int(np.sum(counts * (counts - 1) // 2))

    n1 = tied_pairs(x)
    n2 = tied_pairs(y)
    # pairs tied in both columns
    _, joint_counts = np.unique(X[order], axis=0, return_counts=True)
    n3 = int(np.sum(joint_counts * (joint_counts - 1) // 2))
    if n1 == n0 or n2 == n0:
        return math.nan
    # after sorting by (x, y), inversions in y are exactly the discordant pairs
    swaps = int(_kernels.merge_count_inversions(y.copy()))
    concord_minus_discord = n0 - n1 - n2 + n3 - 2 * swaps
    return concord_minus_discord / math.sqrt((n0 - n1) * (n0 - n2))


def kendall_tau_bruteforce(data) -> float:
    """Direct ``O(n^2)`` tau-b; reference for :func:`kendall_tau`."""
    X = _check(data, 2)
    n = X.shape[0]
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            sx = np.sign(X[i, 0] - X[j, 0])
            sy = np.sign(X[i, 1] - X[j, 1])
            if sx == 0 and sy == 0:
                continue
            if sx == 0:
                tx += 1
            elif sy == 0:
                ty += 1
            elif sx == sy:
                conc += 1
            else:
                disc += 1
    denom = math.sqrt((conc + disc + tx) * (conc + disc + ty))
    return (conc - disc) / denom if denom > 0 else math.nan
