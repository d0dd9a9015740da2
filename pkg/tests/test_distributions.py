"""분포와 링크 함수 테스트 (scipy.stats 기준값과 비교)"""

import numpy as np
import pytest
from scipy import stats

from src.distributions import (
    beta_logpdf,
    binomial_logpmf,
    clm_probs,
    gamma_logpdf,
    gaussian_logpdf,
    linkinv,
    log_trunc_mass,
    lognorm_logpdf,
    mlogit_logpmf,
    model_family,
    poisson_logpmf,
    weibull_logpdf,
)
from src.errors import ConfigError


Y = np.array([0.3, 1.2, 2.5])


def test_model_family_lookup_and_aliases():
    assert model_family("glm_binomial_probit").link == "probit"
    assert model_family("beta").model_type == "betareg"
    assert model_family("lmm").mixed
    assert model_family("clm").has_intercept is False
    assert model_family("lm").residual == "sigma"
    assert model_family("glm_gamma_inverse").residual == "tau"
    with pytest.raises(ConfigError):
        model_family("glm_binomial_identity")


@pytest.mark.parametrize("link, expected", [
    ("identity", 0.5),
    ("log", np.exp(0.5)),
    ("logit", 1 / (1 + np.exp(-0.5))),
    ("probit", stats.norm.cdf(0.5)),
    ("cloglog", 1 - np.exp(-np.exp(0.5))),
    ("inverse", 2.0),
])
def test_linkinv(link, expected):
    assert linkinv(np.array([0.5]), link)[0] == pytest.approx(expected)


def test_gaussian_matches_scipy():
    np.testing.assert_allclose(gaussian_logpdf(Y, 1.0, 4.0), stats.norm.logpdf(Y, 1.0, 0.5))


@pytest.mark.parametrize("link", ["logit", "probit", "cloglog"])
def test_binomial_matches_scipy(link):
    eta = np.array([-1.0, 0.2, 1.5])
    y = np.array([1.0, 0.0, 1.0])
    p = linkinv(eta, link)
    np.testing.assert_allclose(binomial_logpmf(y, eta, link), stats.bernoulli.logpmf(y, p))


def test_binomial_log_link_outside_unit_interval_is_minus_inf():
    assert binomial_logpmf(np.array([1.0]), np.array([0.5]), "log")[0] == -np.inf


def test_poisson_matches_scipy():
    y = np.array([0.0, 2.0, 5.0])
    np.testing.assert_allclose(poisson_logpmf(y, 2.5), stats.poisson.logpmf(y, 2.5))
    assert poisson_logpmf(np.array([1.5]), 2.0)[0] == -np.inf


def test_gamma_mean_precision_parameterisation():
    mu, tau = 2.0, 3.0
    expected = stats.gamma.logpdf(Y, a=mu ** 2 * tau, scale=1 / (mu * tau))
    np.testing.assert_allclose(gamma_logpdf(Y, mu, tau), expected)


def test_lognorm_matches_scipy():
    np.testing.assert_allclose(lognorm_logpdf(Y, 0.2, 4.0),
                               stats.lognorm.logpdf(Y, s=0.5, scale=np.exp(0.2)))
    assert lognorm_logpdf(np.array([-1.0]), 0.0, 1.0)[0] == -np.inf


def test_beta_matches_scipy():
    y = np.array([0.1, 0.5, 0.9])
    mu, tau = 0.3, 5.0
    np.testing.assert_allclose(beta_logpdf(y, mu, tau),
                               stats.beta.logpdf(y, mu * tau, (1 - mu) * tau))
    assert beta_logpdf(np.array([1.0]), mu, tau)[0] == -np.inf


def test_clm_probs_sum_to_one_and_shift_with_eta():
    gammas = np.array([-1.0, 0.5, 2.0])
    probs = clm_probs(np.array([0.0, 3.0]), gammas)
    assert probs.shape == (2, 4)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    # 선형예측이 커지면 높은 범주 확률 증가
    assert probs[1, 3] > probs[0, 3]
    assert probs[0, 0] == pytest.approx(1 / (1 + np.exp(1.0)))


def test_mlogit_logpmf():
    eta = np.array([[0.0, 1.0, -1.0]])
    expected = 1.0 - np.log(1 + np.e + np.exp(-1))
    assert mlogit_logpmf(np.array([1]), eta)[0] == pytest.approx(expected)


def test_weibull_matches_scipy():
    t = np.array([0.5, 1.5])
    eta, shape = 0.3, 1.7
    scale = np.exp(eta)
    event = weibull_logpdf(t, np.array([1.0, 1.0]), eta, shape)
    censored = weibull_logpdf(t, np.array([0.0, 0.0]), eta, shape)
    np.testing.assert_allclose(event, stats.weibull_min.logpdf(t, shape, scale=scale))
    np.testing.assert_allclose(censored, stats.weibull_min.logsf(t, shape, scale=scale))


def test_truncation_mass():
    fam = model_family("lm")
    mass = log_trunc_mass(fam, np.array([0.0]), 1.0, 0.0, None)
    assert mass[0] == pytest.approx(np.log(0.5))
    assert log_trunc_mass(model_family("glm_poisson_log"), np.array([1.0]), 1.0, 0.0, 2.0)[0] == 0.0
