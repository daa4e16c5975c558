"""Energy score and its outcome- and threshold-weighted variants.

Ensemble estimators use the "fair" pair normalization ``1/(2M(M-1))`` so
that expected scores do not depend on the ensemble size.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
from scipy import special
from scipy.spatial.distance import cdist, pdist

from .exceptions import UsageError
from .stats_kernels import MvnParams, bvn_cdf_many, mvn_cdf

_SQRT_2PI = math.sqrt(2.0 * math.pi)
CHAIN_ANCHOR = 6.0


def _ensemble(ensemble, y):
    E = np.asarray(ensemble, dtype=float)
    y = np.asarray(y, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    if y.ndim == 0:
        y = y[None]
    if E.shape[1] != y.shape[0]:
        raise UsageError("ensemble members and observation differ in dimension")
    if E.shape[0] < 2:
        raise UsageError("the ensemble needs at least two members")
    return E, y


def energy_score(ensemble, y) -> float:
    """Fair ensemble energy score.

    ``(1/M) sum_m |x_m - y| - 1/(2M(M-1)) sum_{m != k} |x_m - x_k|``

    Parameters
    ----------
    ensemble : array-like of shape (M, d)
    y : array-like of shape (d,)

    Examples
    --------
    >>> energy_score([[0.0, 0.0], [2.0, 0.0]], [1.0, 0.0])
    0.0
    """
    E, y = _ensemble(ensemble, y)
    return _weighted_energy(E, y, np.ones(E.shape[0]))


def _weighted_energy(E, y, wm):
    # shared by the plain and outcome-weighted scores so that unit weights agree bit for bit
    first = float(np.sum(wm * np.linalg.norm(E - y, axis=1))) / float(np.sum(wm))
    i, j = np.triu_indices(E.shape[0], 1)
    pair_w = wm[i] * wm[j]
    total_pair = float(np.sum(pair_w))
    if total_pair == 0.0:
        return first
    return first - 0.5 * float(np.sum(pair_w * pdist(E))) / total_pair


@dataclass(frozen=True)
class WeightScheme:
    """Weight function on the outcome space.

    ``kind="W1"``: indicator that every component exceeds its threshold in
    ``q``. ``kind="W2"``: the normal CDF with parameters ``gauss``.
    """

    kind: str
    q: Optional[np.ndarray] = None
    gauss: Optional[MvnParams] = None

    def __post_init__(self):
        if self.kind == "W1":
            if self.q is None or self.gauss is not None:
                raise UsageError("W1 needs thresholds q and no Gaussian payload")
            object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        elif self.kind == "W2":
            if self.gauss is None or self.q is not None:
                raise UsageError("W2 needs a Gaussian payload and no thresholds")
        else:
            raise UsageError("kind must be 'W1' or 'W2'")

    @property
    def dim(self) -> int:
        return self.q.size if self.kind == "W1" else self.gauss.dim

    @classmethod
    def hard_quantile(cls, data, level: float = 0.9) -> "WeightScheme":
        """W1 with thresholds at the marginal ``level`` quantiles of ``data``."""
        return cls("W1", q=np.quantile(np.asarray(data, dtype=float), level, axis=0))

    @classmethod
    def gaussian_cdf(cls, data) -> "WeightScheme":
        """W2 with the sample mean and covariance of ``data``."""
        X = np.asarray(data, dtype=float)
        return cls("W2", gauss=MvnParams.from_cov(X.mean(axis=0), np.cov(X, rowvar=False)))


def weight(x, w: WeightScheme):
    """Weight of one point ``(d,)`` or of each row of ``(n, d)``."""
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    if X.shape[1] != w.dim:
        raise UsageError("point and weight scheme differ in dimension")
    if w.kind == "W1":
        out = np.all(X > w.q, axis=1).astype(float)
    elif w.dim == 2:
        out = bvn_cdf_many(X, w.gauss)
    else:
        out = np.array([mvn_cdf(row, w.gauss) for row in X])
    return float(out[0]) if x.ndim == 1 else out


def owes(ensemble, y, w: WeightScheme) -> float:
    """Outcome-weighted energy score.

    The ensemble is reweighted by ``w(x_m)`` and the result is multiplied by
    ``w(y)``::

        w(y) [ sum_m w_m |x_m - y| / sum_m w_m
               - 1/2 sum_{m != k} w_m w_k |x_m - x_k| / sum_{m != k} w_m w_k ]

    With ``w = 1`` this is :func:`energy_score` exactly. Returns ``0`` when
    ``w(y) = 0`` and NaN when ``w(y) > 0`` but all member weights vanish.
    """
    E, y = _ensemble(ensemble, y)
    wy = weight(y, w)
    if wy == 0.0:
        return 0.0
    wm = weight(E, w)
    if float(np.sum(wm)) == 0.0:
        return math.nan
    keep = wm > 0
    return wy * _weighted_energy(E[keep], y, wm[keep])


def chain_function(x, w: WeightScheme) -> np.ndarray:
    """Chain function ``v`` of the threshold-weighted score.

    W1: ``v(x)_j = max(x_j, q_j)``. W2: per margin, the antiderivative of
    the marginal normal CDF weight,
    ``(x_j - mu_j) Phi(z_j) + s_j phi(z_j) + c_j`` with ``z_j = (x_j - mu_j)/s_j``
    and ``c_j`` chosen so that ``v_j(mu_j - 6 s_j) = mu_j - 6 s_j``. The
    margins are treated as independent, which is exact only for zero
    correlation.
    """
    x = np.asarray(x, dtype=float)
    if w.kind == "W1":
        return np.maximum(x, w.q)
    mu, s = w.gauss.mean, w.gauss.sd
    z = (x - mu) / s
    phi = np.exp(-0.5 * z * z) / _SQRT_2PI
    k = CHAIN_ANCHOR
    phi_k = math.exp(-0.5 * k * k) / _SQRT_2PI
    c = mu - k * s + k * s * special.ndtr(-k) - s * phi_k
    return (x - mu) * special.ndtr(z) + s * phi + c


def twes(ensemble, y, w: WeightScheme) -> float:
    """Threshold-weighted energy score: :func:`energy_score` after the chain function."""
    E, y = _ensemble(ensemble, y)
    return energy_score(chain_function(E, w), chain_function(y, w))


SCORE_COLUMNS = ("ES", "OWES_W1", "OWES_W2", "TWES_W1", "TWES_W2")


@dataclass
class ScoreTable:
    """Mean scores per model (rows) and score variant (columns); lower is better.

    ``excluded`` counts observations dropped from a mean because the score
    was undefined there.
    """

    rows: dict
    excluded: dict = field(default_factory=dict)
    columns: tuple = SCORE_COLUMNS

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["model", *self.columns])
            for name, vals in self.rows.items():
                wr.writerow([name, *[repr(float(vals[c])) for c in self.columns]])
        return path


def _pair_sums(E, w, chunk=512):
    """``sum_{m != k} w_m w_k |x_m - x_k|`` and ``sum_{m != k} w_m w_k`` over ordered pairs."""
    total = 0.0
    for start in range(0, E.shape[0], chunk):
        block = slice(start, start + chunk)
        total += float(w[block] @ (cdist(E[block], E) @ w))
    return total, float(np.sum(w)) ** 2 - float(np.sum(w * w))


def _mean_distance(E, Y, w, chunk=512):
    """Weighted mean distance from each row of ``Y`` to the members of ``E``."""
    out = np.empty(Y.shape[0])
    for start in range(0, Y.shape[0], chunk):
        block = slice(start, start + chunk)
        out[block] = (cdist(Y[block], E) @ w) / float(np.sum(w))
    return out


def _shared_scores(E, Y, schemes):
    """All score variants for one ensemble shared by every observation.

    Pair terms do not depend on the observation, so they are computed once;
    the results equal the per-observation functions up to rounding.
    """
    M = E.shape[0]
    if M < 2:
        raise UsageError("the ensemble needs at least two members")
    ones = np.ones(M)
    pair, norm = _pair_sums(E, ones)
    vals = {"ES": _mean_distance(E, Y, ones) - 0.5 * pair / norm}
    for k, sch in schemes.items():
        wm = weight(E, sch)
        wy = weight(Y, sch)
        keep = wm > 0
        if not np.any(keep):
            ow = np.where(wy == 0.0, 0.0, np.nan)
        else:
            Ek, wk = E[keep], wm[keep]
            pair_w, norm_w = _pair_sums(Ek, wk)
            second = 0.5 * pair_w / norm_w if norm_w > 0 else 0.0
            ow = wy * (_mean_distance(Ek, Y, wk) - second)
        vals[f"OWES_{k}"] = ow
        V, vy = chain_function(E, sch), chain_function(Y, sch)
        pair_v, norm_v = _pair_sums(V, ones)
        vals[f"TWES_{k}"] = _mean_distance(V, vy, ones) - 0.5 * pair_v / norm_v
    return vals


def score_table(model_ensembles: Mapping[str, np.ndarray], y_series,
                schemes: Mapping[str, WeightScheme]) -> ScoreTable:
    """Average ES, OWES and TWES over a forecast/observation series.

    Parameters
    ----------
    model_ensembles : mapping of model name to array
        Shape ``(T, M, d)`` gives a separate ensemble for each of the ``T``
        observations; shape ``(M, d)`` gives one ensemble shared by all of
        them, which is much cheaper for large ``M``.
    y_series : array-like of shape (T, d)
    schemes : mapping with keys ``"W1"`` and/or ``"W2"``
    """
    Y = np.asarray(y_series, dtype=float)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise UsageError("the observation series is empty")
    columns = ["ES"] + [f"{v}_{k}" for v in ("OWES", "TWES") for k in schemes]
    rows, excluded = {}, {}
    for name, ens in model_ensembles.items():
        ens = np.asarray(ens, dtype=float)
        if ens.ndim == 2 and ens.shape[1] == Y.shape[1]:
            vals = _shared_scores(ens, Y, schemes)
        elif ens.ndim == 3 and ens.shape[0] == Y.shape[0]:
            vals = {"ES": [energy_score(ens[t], Y[t]) for t in range(Y.shape[0])]}
            for k, sch in schemes.items():
                vals[f"OWES_{k}"] = [owes(ens[t], Y[t], sch) for t in range(Y.shape[0])]
                vals[f"TWES_{k}"] = [twes(ens[t], Y[t], sch) for t in range(Y.shape[0])]
        else:
            raise UsageError(f"ensembles of {name!r} are not aligned with the observations")
        rows[name] = {}
        excluded[name] = {}
        for c in columns:
            v = np.asarray(vals[c])
            bad = np.isnan(v)
            excluded[name][c] = int(bad.sum())
            rows[name][c] = float(v[~bad].mean()) if np.any(~bad) else math.nan
    return ScoreTable(rows, excluded, tuple(columns))
