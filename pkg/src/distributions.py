"""
분포 / 링크 함수 모듈

모델 종류 표(MODEL_TYPES)와 단위(행 또는 그룹)별 로그 밀도를 벡터 연산으로 제공합니다.
지지집합 밖의 값은 -inf를 돌려주며, NaN은 호출한 쪽에서 오류로 처리합니다.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import special, stats

from src.errors import ConfigError


LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ModelFamily:
    """모델 종류별 분포 정보"""
    model_type: str
    family: str            # gaussian, binomial, poisson, gamma, lognorm, beta, ordinal, multinomial, weibull
    link: str
    mixed: bool = False

    @property
    def hyper_group(self) -> str:
        return {
            "gaussian": "norm", "lognorm": "norm", "gamma": "gamma", "beta": "beta",
            "binomial": "binom", "poisson": "poisson", "ordinal": "ordinal",
            "multinomial": "multinomial", "weibull": "surv",
        }[self.family]

    @property
    def residual(self) -> Optional[str]:
        """정밀도 파라미터의 보고 형태: 'sigma'(표준편차), 'tau'(정밀도), None"""
        if self.family in ("gaussian", "lognorm"):
            return "sigma"
        if self.family in ("gamma", "beta"):
            return "tau"
        return None

    @property
    def has_precision(self) -> bool:
        return self.residual is not None

    @property
    def is_categorical(self) -> bool:
        return self.family in ("binomial", "ordinal", "multinomial")

    @property
    def has_intercept(self) -> bool:
        return self.family not in ("ordinal", "multinomial")

    @property
    def conjugate(self) -> bool:
        """정규-감마 켤레 갱신이 가능한지 (절단 없을 때)"""
        return (self.family == "gaussian" and self.link == "identity") or self.family == "lognorm"

    @property
    def support(self) -> Tuple[float, float, bool]:
        """(하한, 상한, 경계 제외 여부)"""
        if self.family in ("gamma", "lognorm", "weibull"):
            return 0.0, np.inf, True
        if self.family == "beta":
            return 0.0, 1.0, True
        if self.family == "poisson":
            return 0.0, np.inf, False
        return -np.inf, np.inf, False


FAMILY_LINKS = {
    "gaussian": ("identity", "log", "inverse"),
    "binomial": ("logit", "probit", "log", "cloglog"),
    "gamma": ("inverse", "identity", "log"),
    "poisson": ("log", "identity"),
}

MODEL_TYPES: Dict[str, ModelFamily] = {
    "lm": ModelFamily("lm", "gaussian", "identity"),
    "lognorm": ModelFamily("lognorm", "lognorm", "identity"),
    "betareg": ModelFamily("betareg", "beta", "logit"),
    "clm": ModelFamily("clm", "ordinal", "logit"),
    "mlogit": ModelFamily("mlogit", "multinomial", "logit"),
    "lmm": ModelFamily("lmm", "gaussian", "identity", mixed=True),
    "glmm_binomial_logit": ModelFamily("glmm_binomial_logit", "binomial", "logit", mixed=True),
    "survreg": ModelFamily("survreg", "weibull", "log"),
}
for _family, _links in FAMILY_LINKS.items():
    for _link in _links:
        _name = f"glm_{_family}_{_link}"
        MODEL_TYPES[_name] = ModelFamily(_name, _family, _link)

ALIASES = {"beta": "betareg", "glmm_gaussian_identity": "lmm"}


def model_family(model_type: str) -> ModelFamily:
    """
    모델 종류 이름 → ModelFamily

    Raises:
        ConfigError: 지원하지 않는 모델 종류
    """
    name = ALIASES.get(model_type, model_type)
    if name not in MODEL_TYPES:
        raise ConfigError(
            f"지원하지 않는 모델 종류 '{model_type}'\n"
            f"사용 가능: {', '.join(sorted(MODEL_TYPES))}"
        )
    return MODEL_TYPES[name]


# ===== 링크 =====

def linkinv(eta: np.ndarray, link: str) -> np.ndarray:
    """역링크 함수"""
    with np.errstate(all="ignore"):
        if link == "identity":
            return eta
        if link == "log":
            return np.exp(eta)
        if link == "inverse":
            return 1.0 / eta
        if link == "logit":
            return special.expit(eta)
        if link == "probit":
            return special.ndtr(eta)
        if link == "cloglog":
            return -np.expm1(-np.exp(eta))
    raise ConfigError(f"알 수 없는 링크 함수 '{link}'")


def _where_valid(valid: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.where(valid, values, -np.inf)


# ===== 로그 밀도 (벡터) =====

def gaussian_logpdf(y, mu, tau):
    return 0.5 * np.log(tau) - 0.5 * LOG_2PI - 0.5 * tau * (y - mu) ** 2


def binomial_logpmf(y, eta, link: str):
    """y ∈ {0,1}"""
    with np.errstate(all="ignore"):
        if link == "logit":
            return np.where(y > 0.5, special.log_expit(eta), special.log_expit(-eta))
        if link == "probit":
            return np.where(y > 0.5, special.log_ndtr(eta), special.log_ndtr(-eta))
        p = linkinv(eta, link)
        valid = (p >= 0) & (p <= 1)
        p = np.clip(p, 0.0, 1.0)
        out = np.where(y > 0.5, np.log(p), np.log1p(-p))
        return _where_valid(valid, out)


def poisson_logpmf(y, mu):
    with np.errstate(all="ignore"):
        valid = (mu >= 0) & (y >= 0) & (np.floor(y) == y)
        out = special.xlogy(y, mu) - mu - special.gammaln(y + 1.0)
        return _where_valid(valid, out)


def gamma_logpdf(y, mu, tau):
    """평균 mu, 분산 1/tau (shape = mu²τ, rate = μτ)"""
    with np.errstate(all="ignore"):
        valid = (y > 0) & (mu > 0)
        shape = mu ** 2 * tau
        rate = mu * tau
        out = shape * np.log(rate) - special.gammaln(shape) + (shape - 1.0) * np.log(y) - rate * y
        return _where_valid(valid, out)


def lognorm_logpdf(y, eta, tau):
    with np.errstate(all="ignore"):
        valid = y > 0
        logy = np.log(np.where(valid, y, 1.0))
        return _where_valid(valid, gaussian_logpdf(logy, eta, tau) - logy)


def beta_logpdf(y, mu, tau):
    """a = μτ, b = (1-μ)τ"""
    with np.errstate(all="ignore"):
        valid = (y > 0) & (y < 1)
        a = mu * tau
        b = (1.0 - mu) * tau
        ys = np.where(valid, y, 0.5)
        out = (special.gammaln(tau) - special.gammaln(a) - special.gammaln(b)
               + (a - 1.0) * np.log(ys) + (b - 1.0) * np.log1p(-ys))
        return _where_valid(valid, out)


def clm_probs(eta: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """
    누적 로짓 범주 확률 (n, K)

    P(y ≤ k) = logistic(γ_k − η), k = 1..K−1
    """
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    cum = special.expit(gammas[None, :] - eta[:, None])
    upper = np.concatenate([cum, np.ones((len(eta), 1))], axis=1)
    lower = np.concatenate([np.zeros((len(eta), 1)), cum], axis=1)
    return np.clip(upper - lower, 0.0, 1.0)


def clm_logpmf(y, eta, gammas):
    """y: 0부터 시작하는 범주 코드"""
    probs = clm_probs(eta, gammas)
    idx = np.asarray(y, dtype=int)
    with np.errstate(divide="ignore"):
        return np.log(probs[np.arange(len(idx)), idx])


def mlogit_logprobs(eta_matrix: np.ndarray) -> np.ndarray:
    """(n, K) 선형예측 (기준 범주 열은 0) → 로그 확률"""
    return special.log_softmax(eta_matrix, axis=1)


def mlogit_logpmf(y, eta_matrix):
    idx = np.asarray(y, dtype=int)
    return mlogit_logprobs(eta_matrix)[np.arange(len(idx)), idx]


def weibull_logpdf(t, event, eta, shape):
    """
    와이블 생존 로그우도

    S(t) = exp(-(r t)^s), log r = -η
    사건: log s + s log r + (s-1) log t - (r t)^s, 중도절단: -(r t)^s
    """
    with np.errstate(all="ignore"):
        valid = t > 0
        ts = np.where(valid, t, 1.0)
        log_r = -eta
        cum_hazard = np.exp(shape * (log_r + np.log(ts)))
        log_hazard = np.log(shape) + shape * log_r + (shape - 1.0) * np.log(ts)
        out = np.where(event > 0.5, log_hazard - cum_hazard, -cum_hazard)
        return _where_valid(valid, out)


def log_trunc_mass(family: ModelFamily, mu: np.ndarray, tau: float,
                   lower: Optional[float], upper: Optional[float]) -> np.ndarray:
    """
    절단 구간 [lower, upper]의 로그 확률질량 (정규화 상수)

    gaussian(identity), lognorm, gamma만 계산하며 나머지는 0을 돌려줍니다.
    """
    lo = -np.inf if lower is None else lower
    hi = np.inf if upper is None else upper
    with np.errstate(all="ignore"):
        if family.family == "gaussian" and family.link == "identity":
            sd = 1.0 / np.sqrt(tau)
            dist = stats.norm(loc=mu, scale=sd)
        elif family.family == "lognorm":
            sd = 1.0 / np.sqrt(tau)
            dist = stats.norm(loc=mu, scale=sd)
            lo = np.log(lo) if lo > 0 else -np.inf
            hi = np.log(hi) if hi > 0 else -np.inf
        elif family.family == "gamma":
            # mu <= 0이면 밀도가 이미 -inf
            safe_mu = np.where(np.asarray(mu) > 0, mu, 1.0)
            dist = stats.gamma(a=safe_mu ** 2 * tau, scale=1.0 / (safe_mu * tau))
        else:
            return np.zeros_like(np.asarray(mu, dtype=float))
        mass = dist.cdf(hi) - dist.cdf(lo)
        return np.log(mass)
