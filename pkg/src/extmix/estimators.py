"""Scikit-learn style wrappers around the model, the samplers and the detrender."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .inference.chains import SamplerConfig, pooled_draws, posterior_summary, run_chains
from .model import ModelParams, PriorSpec, mixture_logdensity
from .pipeline.detrend import design_matrix, detrend
from .pipeline.report import predictive_ensemble
from .stats_kernels import MvnParams, mvn_logpdf


class ExtremeMixture(BaseEstimator):
    """Bayesian bulk-and-tail mixture fitted by MCMC.

    Parameters
    ----------
    n_iter, burn_in, thin, n_chains : int
        Chain settings; the defaults give 3,000 stored draws.
    algorithm : {"RWMH", "AFSS"}
    random_state : int
        Master seed for all chains.
    prior : PriorSpec, optional
        Defaults to the data-driven prior of :meth:`PriorSpec.default`.

    Attributes
    ----------
    chains_ : list of ChainStore
    params_ : ModelParams
        Posterior mean of the sampled coordinates.
    summary_ : dict
        Posterior mean and 95% interval per parameter.
    prior_ : PriorSpec
    """

    def __init__(self, n_iter: int = 30000, burn_in: int = 20000, thin: int = 10,
                 n_chains: int = 3, algorithm: str = "RWMH", random_state: int = 0,
                 prior: Optional[PriorSpec] = None):
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.n_chains = n_chains
        self.algorithm = algorithm
        self.random_state = random_state
        self.prior = prior

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=20)
        cfg = SamplerConfig(n_iter=self.n_iter, burn_in=self.burn_in, thin=self.thin,
                            n_chains=self.n_chains, seed=self.random_state,
                            algorithm=self.algorithm)
        self.prior_ = self.prior if self.prior is not None else PriorSpec.default(X)
        self.chains_ = run_chains(X, self.prior_, cfg)
        self.params_ = ModelParams.from_flat(pooled_draws(self.chains_).mean(axis=0), X.shape[1])
        self.summary_ = posterior_summary(self.chains_, X.shape[1])
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X):
        """Log density at the posterior-mean parameters."""
        check_is_fitted(self, "params_")
        X = check_array(X)
        return mixture_logdensity(X, self.params_)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples: int = 1, random_state=None):
        """Posterior predictive draws, one stored parameter per draw."""
        check_is_fitted(self, "chains_")
        rng = np.random.default_rng(random_state)
        return predictive_ensemble(self.chains_, n_samples, rng)


class GaussianModel(BaseEstimator):
    """Multivariate normal fitted by maximum likelihood; the reference competitor."""

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        self.mean_ = X.mean(axis=0)
        self.covariance_ = np.atleast_2d(np.cov(X, rowvar=False, bias=True))
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X)
        return mvn_logpdf(X, MvnParams.from_cov(self.mean_, self.covariance_))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples: int = 1, random_state=None):
        check_is_fitted(self, "mean_")
        rng = np.random.default_rng(random_state)
        return rng.multivariate_normal(self.mean_, self.covariance_, size=n_samples,
                                       method="cholesky")


class Detrender(TransformerMixin, BaseEstimator):
    """Seasonal lag-one detrending of consecutive daily rows.

    ``fit`` and ``transform`` take an ``(n_days, n_sites)`` array whose rows
    are consecutive days starting at ``start_day``. ``transform`` returns the
    negated residuals for every row except the first.
    """

    def __init__(self, start_day: int = 0):
        self.start_day = start_day

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=11)
        model = detrend(X, self.start_day + np.arange(X.shape[0]))
        self.coef_ = model.coefficients
        self.std_errors_ = model.std_errors
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, ensure_min_samples=2)
        day = self.start_day + np.arange(1, X.shape[0])
        out = np.empty((X.shape[0] - 1, X.shape[1]))
        for j in range(X.shape[1]):
            out[:, j] = -(X[1:, j] - design_matrix(day, X[:-1, j]) @ self.coef_[j])
        return out
