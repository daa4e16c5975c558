"""Seasonal and lag-one detrending of daily series.

Each site is regressed on an intercept, annual sine and cosine terms and its
own value on the previous day. The negated residuals are the input of the
extreme value model, so that large values correspond to unusually low
original observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import RankDeficiencyError, UsageError
from ..inference.diagnostics import autocorrelation

PERIOD = 365.0


@dataclass(frozen=True)
class DetrendModel:
    """Per-site least-squares fit.

    Attributes
    ----------
    coefficients : ndarray of shape (n_sites, 4)
        Intercept, sine, cosine and lag-one coefficients.
    std_errors : ndarray of shape (n_sites, 4)
    residuals : ndarray of shape (n_used, n_sites)
        Ordinary residuals on the rows that have a previous day.
    day_index : ndarray of shape (n_used,)
        Day of each residual row.
    """

    coefficients: np.ndarray
    std_errors: np.ndarray
    residuals: np.ndarray
    day_index: np.ndarray
    fitted: bool = True

    @property
    def negative_residuals(self) -> np.ndarray:
        return -self.residuals

    def residual_acf(self, max_lag: int = 30) -> np.ndarray:
        """Residual autocorrelations, shape ``(max_lag + 1, n_sites)``."""
        return np.column_stack([autocorrelation(r)[:max_lag + 1] for r in self.residuals.T])


def design_matrix(day, lagged) -> np.ndarray:
    w = 2.0 * np.pi * np.asarray(day, dtype=float) / PERIOD
    return np.column_stack([np.ones_like(w), np.sin(w), np.cos(w), lagged])


def detrend(series, day_index) -> DetrendModel:
    """Fit the seasonal lag-one regression for each column of ``series``.

    Rows whose previous calendar day is absent have no lagged value and are
    dropped, which always removes the first day.

    Raises
    ------
    RankDeficiencyError
        When the design of a site is rank deficient, e.g. a constant series
        or a noise-free sinusoid whose lag is a combination of the seasonal
        terms.
    """
    Y = np.asarray(series, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    t = np.asarray(day_index, dtype=float)
    if t.shape[0] != Y.shape[0]:
        raise UsageError("series and day_index lengths differ")
    if np.any(np.diff(t) <= 0):
        raise UsageError("day_index must be strictly increasing")
    has_prev = np.concatenate([[False], np.diff(t) == 1.0])
    if has_prev.sum() < 10:
        raise UsageError("at least 10 observations with a previous day are required")
    rows = np.flatnonzero(has_prev)
    n_sites = Y.shape[1]
    coef = np.empty((n_sites, 4))
    se = np.empty((n_sites, 4))
    resid = np.empty((rows.size, n_sites))
    for j in range(n_sites):
        A = design_matrix(t[rows], Y[rows - 1, j])
        y = Y[rows, j]
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= s[0] * max(A.shape) * np.finfo(float).eps * 1e3:
            raise RankDeficiencyError(f"design matrix of site {j} is rank deficient")
        beta, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = y - A @ beta
        dof = rows.size - 4
        s2 = float(r @ r) / dof if dof > 0 else np.nan
        cov = s2 * np.linalg.inv(A.T @ A)
        coef[j] = beta
        se[j] = np.sqrt(np.diag(cov))
        resid[:, j] = r
    return DetrendModel(coef, se, resid, t[rows])
