"""Multivariate generalized Pareto distribution, U-representation.

The generator ``U`` has independent reverse-exponential components with
rates ``1/a_i`` (density ``a_i^-1 exp(x/a_i)`` on ``x < 0``), which gives the
closed-form standardized density used throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import GAMMA_ZERO_TOL, SERIES_TOL
from .exceptions import SupportError, UsageError


@dataclass(frozen=True)
class TailParams:
    """Dependence rates ``a``, marginal scales ``sigma`` and shapes ``gamma``."""

    a: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(v, dtype=float)).copy()
                for v in (self.a, self.sigma, self.gamma)]
        if not (arrs[0].shape == arrs[1].shape == arrs[2].shape) or arrs[0].ndim != 1:
            raise UsageError("a, sigma and gamma must be vectors of one length")
        if np.any(arrs[0] <= 0) or np.any(arrs[1] <= 0):
            raise UsageError("a and sigma must be strictly positive")
        for name, v in zip(("a", "sigma", "gamma"), arrs):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def dim(self) -> int:
        return self.a.size

    @property
    def lower_endpoint(self) -> np.ndarray:
        """Marginal lower endpoints: ``-sigma/gamma`` when ``gamma > 0``, else ``-inf``."""
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(self.gamma > 0, -self.sigma / self.gamma, -np.inf)

    @property
    def upper_endpoint(self) -> np.ndarray:
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(self.gamma < 0, -self.sigma / self.gamma, np.inf)


def exp_max_u(a) -> float:
    """``E[exp(max U)]`` for the reverse-exponential generator."""
    s = float(np.sum(1.0 / np.asarray(a, dtype=float)))
    return s / (1.0 + s)


def std_logdensity(z, a):
    """Log of the standardized density; ``z`` may be ``(d,)`` or ``(n, d)``.

    ``-inf`` wherever ``max(z) <= 0``.
    """
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    if z.shape[-1] != a.size:
        raise UsageError("z and a must have the same length")
    A = np.sum(1.0 / a)
    zmax = np.max(z, axis=-1)
    with np.errstate(invalid="ignore"):
        out = (-zmax * (1.0 + A) + np.sum(z / a, axis=-1) - np.sum(np.log(a))
               - math.log(A))
    out = np.where(zmax > 0, out, -np.inf)
    return float(out) if out.ndim == 0 else out


def _std_transform(x, sigma, gamma):
    t = gamma * x / sigma
    small = (np.abs(gamma) < GAMMA_ZERO_TOL) & (np.abs(t) < SERIES_TOL)
    safe_gamma = np.where(small, 1.0, gamma)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(small, x / sigma * (1.0 - 0.5 * t), np.log1p(t) / safe_gamma)
    return np.where(1.0 + t > 0, z, np.nan)


def to_std(x, t: TailParams):
    """Map observation-scale points to the standardized scale.

    Raises
    ------
    SupportError
        If any component violates ``1 + gamma x / sigma > 0``.
    """
    z = _std_transform(np.asarray(x, dtype=float), t.sigma, t.gamma)
    if np.any(np.isnan(z)):
        raise SupportError("point outside the generalized Pareto support")
    return z


def from_std(z, t: TailParams):
    """Inverse of :func:`to_std`."""
    z = np.asarray(z, dtype=float)
    gz = t.gamma * z
    small = (np.abs(t.gamma) < GAMMA_ZERO_TOL) & (np.abs(gz) < SERIES_TOL)
    safe_gamma = np.where(t.gamma == 0.0, 1.0, t.gamma)
    # second-order inverse of the series used in the forward map
    lin = t.sigma * (z + 0.5 * gz * z)
    with np.errstate(invalid="ignore", over="ignore"):
        return np.where(small, lin, t.sigma * np.expm1(gz) / safe_gamma)


def obs_logdensity(x, t: TailParams):
    """Log density on the observation scale; ``-inf`` off the support."""
    x = np.asarray(x, dtype=float)
    z = _std_transform(x, t.sigma, t.gamma)
    off = np.any(np.isnan(z), axis=-1)
    z = np.where(np.isnan(z), -1.0, z)
    with np.errstate(invalid="ignore", divide="ignore"):
        jac = -np.sum(np.log(t.gamma * x + t.sigma), axis=-1)
    out = np.where(off, -np.inf, std_logdensity(z, t.a) + np.where(off, 0.0, jac))
    return float(out) if out.ndim == 0 else out


def simulate_std(a, n: int, rng: np.random.Generator) -> np.ndarray:
    """Standardized draws ``E + U - max(U)``.

    With independent reverse-exponential ``U``, ``max(U)`` is independent of
    ``U - max(U)``, so the untilted generator already yields the
    U-representation law.
    """
    if n < 1:
        raise UsageError("n must be at least 1")
    a = np.asarray(a, dtype=float)
    U = -rng.standard_exponential((n, a.size)) * a
    E = rng.standard_exponential(n)
    return E[:, None] + U - U.max(axis=1, keepdims=True)


def simulate(t: TailParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` observation-scale draws from the mGPD."""
    return from_std(simulate_std(t.a, n, rng), t)


def theoretical_chi(a) -> float:
    """Limiting tail dependence coefficient for ``d = 2``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (2,):
        raise UsageError("theoretical_chi is defined for d = 2 only")
    if np.any(a <= 0):
        raise UsageError("a must be positive")
    lo, hi = float(a.min()), float(a.max())
    a1, a2 = float(a[0]), float(a[1])
    return 1.0 - ((1 + lo) / (1 + hi)) ** (1 + 1 / hi) * (hi / lo) * (a1 * a2 / (a1 * a2 + a1 + a2))
