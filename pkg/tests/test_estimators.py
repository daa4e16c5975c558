import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from extmix.estimators import Detrender, ExtremeMixture, GaussianModel
from extmix.model import mixture_logdensity, scenario_params, simulate_model, summary_names
from extmix.pipeline.detrend import detrend


@pytest.fixture(scope="module")
def data():
    return simulate_model(scenario_params("1.1"), 400, np.random.default_rng(6)).values


@pytest.fixture(scope="module")
def fitted(data):
    return ExtremeMixture(n_iter=300, burn_in=200, thin=5, n_chains=2, random_state=2).fit(data)


def test_mixture_fit_attributes(fitted, data):
    assert len(fitted.chains_) == 2 and len(fitted.chains_[0]) == 20
    assert list(fitted.summary_) == summary_names(2)
    assert fitted.n_features_in_ == 2
    assert np.allclose(fitted.score_samples(data[:5]), mixture_logdensity(data[:5], fitted.params_))
    assert np.isfinite(fitted.score(data))


def test_mixture_sample(fitted):
    a = fitted.sample(50, random_state=1)
    b = fitted.sample(50, random_state=1)
    assert a.shape == (50, 2) and np.array_equal(a, b)


def test_mixture_reproducible(data, fitted):
    again = clone(fitted).fit(data)
    assert np.array_equal(again.chains_[0].draws, fitted.chains_[0].draws)


def test_mixture_not_fitted():
    with pytest.raises(NotFittedError):
        ExtremeMixture().score_samples(np.zeros((3, 2)))


def test_get_params_round_trip():
    est = ExtremeMixture(n_iter=10, burn_in=5, algorithm="AFSS")
    assert clone(est).get_params() == est.get_params()


def test_gaussian_model(data):
    g = GaussianModel().fit(data)
    assert np.allclose(g.mean_, data.mean(axis=0))
    from scipy import stats
    oracle = stats.multivariate_normal(g.mean_, np.cov(data, rowvar=False, bias=True))
    assert np.allclose(g.score_samples(data[:10]), oracle.logpdf(data[:10]))
    assert g.sample(7, random_state=0).shape == (7, 2)


def test_detrender_matches_function(rng):
    X = rng.standard_normal((200, 2)).cumsum(axis=0) * 0.1 + rng.standard_normal((200, 2))
    det = Detrender(start_day=10).fit(X)
    model = detrend(X, 10 + np.arange(200))
    assert np.allclose(det.coef_, model.coefficients)
    assert np.allclose(det.transform(X), model.negative_residuals)
    assert np.allclose(Detrender(start_day=10).fit_transform(X), model.negative_residuals)
