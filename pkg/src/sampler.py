"""
MCMC 샘플러 모듈

모델 그래프의 결합 사후분포에서 Metropolis-within-Gibbs로 표본을 뽑습니다.
  - 정규(identity)/로그정규 계수와 정밀도: 켤레 Gibbs
  - 그 밖의 계수, 정밀도, 순서형 절편, 와이블 shape: 적응형 random-walk MH
  - 결측값: 연속형은 셀별 MH, 범주형은 범주 열거 Gibbs
  - 랜덤효과: lmm은 정확한 다변량 정규, glmm은 그룹별 블록 MH
  - 공분산: Wishart / 감마 켤레 갱신

한 스윕의 순서: 분석 모델 파라미터 → 공변량 모델 파라미터 → 결측값 → 랜덤효과 → 공분산
"""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, special, stats

from src.data_frame import LVLONE, unscale
from src.distributions import (
    beta_logpdf, binomial_logpmf, clm_logpmf, gamma_logpdf, gaussian_logpdf, linkinv,
    log_trunc_mass, lognorm_logpdf, mlogit_logpmf, poisson_logpmf, weibull_logpdf,
)
from src.errors import ConfigError, DataError, SamplerError
from src.hyperpars import RIDGE_RATE, RIDGE_SHAPE
from src.model_graph import ColumnSpec, ModelGraph, SubModel
from src.monitors import base_name
from src.samples import McmcSamples


TARGET_ACCEPT = 0.44
ACCEPT_RANGE = (0.1, 0.7)
ADAPT_WINDOW = 50
THREADS_ENV = "JOINTGIBBS_THREADS"

InitSpec = Union[None, Mapping[str, object], Sequence[Mapping[str, object]], Callable[[int], Mapping[str, object]]]


# ===== 설정 =====

@dataclass
class McmcSettings:
    """MCMC 실행 설정"""
    n_chains: int = 3
    n_adapt: int = 100
    n_iter: int = 0
    thin: int = 1
    seed: Optional[int] = None
    inits: InitSpec = None
    parallel: int = 1
    monitor_params: Optional[Dict[str, object]] = None

    def validate(self) -> "McmcSettings":
        """
        Raises:
            ConfigError: 정수가 아니거나 범위를 벗어난 값
        """
        for name, minimum in (("n_chains", 1), ("n_adapt", 0), ("n_iter", 0), ("thin", 1), ("parallel", 1)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"mcmc.{name}은(는) 정수여야 합니다 (입력: {value!r})")
            if value < minimum:
                raise ConfigError(f"mcmc.{name}은(는) {minimum} 이상이어야 합니다 (입력: {value})")
        if self.seed is not None and (isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer))
                                      or self.seed < 0):
            raise ConfigError(f"mcmc.seed는 0 이상의 정수여야 합니다 (입력: {self.seed!r})")
        if isinstance(self.inits, (list, tuple)) and len(self.inits) != self.n_chains:
            raise ConfigError(f"초기값 목록 길이({len(self.inits)})가 체인 수({self.n_chains})와 다릅니다")
        return self

    @property
    def iterations(self) -> np.ndarray:
        """저장되는 반복 번호 (n_adapt+thin ... n_adapt+n_iter, 간격 thin)"""
        return np.arange(self.n_adapt + self.thin, self.n_adapt + self.n_iter + 1, self.thin)

    def to_dict(self) -> Dict[str, object]:
        return {"n_chains": self.n_chains, "n_adapt": self.n_adapt, "n_iter": self.n_iter,
                "thin": self.thin, "seed": self.seed, "parallel": self.parallel,
                "inits": None if self.inits is None else ("callable" if callable(self.inits) else "given")}


def effective_parallelism(requested: int, n_chains: int) -> int:
    """요청한 병렬도를 체인 수와 JOINTGIBBS_THREADS 상한으로 제한"""
    cap = os.environ.get(THREADS_ENV)
    limit = n_chains
    if cap:
        try:
            limit = min(limit, int(cap))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} 값이 정수가 아닙니다: {cap!r}")
    return max(1, min(int(requested), limit))


# ===== 체인 상태 =====

@dataclass
class AdaptiveStep:
    """노드별 제안 폭 (로그 척도) 과 적응 구간 수락 기록"""
    log_step: np.ndarray
    accepted: np.ndarray
    proposed: np.ndarray

    @classmethod
    def create(cls, size: int, scale=1.0) -> "AdaptiveStep":
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (size,))
        return cls(np.log(np.maximum(scale, 1e-8)), np.zeros(size), np.zeros(size))

    @property
    def step(self) -> np.ndarray:
        return np.exp(self.log_step)

    def record(self, accepted, state: "ChainState", index=None):
        """Robbins-Monro 적응 (적응 단계에서만)"""
        if not state.adapting:
            return
        idx = slice(None) if index is None else index
        acc = np.asarray(accepted, dtype=float)
        gain = state.iteration ** -0.6
        self.log_step[idx] = np.clip(self.log_step[idx] + gain * (acc - TARGET_ACCEPT), -15.0, 5.0)
        if state.counting:
            self.accepted[idx] += acc
            self.proposed[idx] += 1.0


@dataclass
class ModelState:
    """하위 모델 하나의 파라미터와 현재 설계 행렬"""
    coef: np.ndarray
    X: np.ndarray
    tau: Optional[float] = None
    ridge: Optional[np.ndarray] = None
    cut: Optional[np.ndarray] = None        # [γ1, δ1, ..., δ_{K-2}]
    shape: Optional[float] = None
    Z: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    invD: Optional[np.ndarray] = None
    RinvD: Optional[np.ndarray] = None

    @property
    def gammas(self) -> np.ndarray:
        """γ_k = γ_{k-1} + exp(δ_{k-1})"""
        return np.concatenate([self.cut[:1], self.cut[0] + np.cumsum(np.exp(self.cut[1:]))])


@dataclass
class ChainState:
    """체인 하나의 전체 상태"""
    chain: int
    rng: np.random.Generator
    values: Dict[str, np.ndarray]
    models: Dict[str, ModelState]
    steps: Dict[str, AdaptiveStep] = field(default_factory=dict)
    categories: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    iteration: int = 0
    adapting: bool = False
    counting: bool = False


# ===== 설계 / 선형예측 =====

def _eval_column(graph: ModelGraph, sm: SubModel, col: ColumnSpec, values, rows, categories) -> np.ndarray:
    env = {d: graph.level_values(values, d, sm.level)[rows] for d in col.deps}
    out = col.evaluate(env, categories, len(rows))
    return np.where(np.isfinite(out), out, np.nan)


def _refresh(graph: ModelGraph, sm: SubModel, plan, matrix: np.ndarray, values, categories,
             var: Optional[str] = None) -> np.ndarray:
    """동적 열을 해당 행에서 다시 계산 (var가 있으면 그 변수에 의존하는 열만)"""
    if plan is None or not plan.dynamic:
        return matrix
    cols = plan.columns_depending_on(var) if var is not None else list(plan.dynamic)
    if not cols:
        return matrix
    matrix = matrix.copy()
    for j in cols:
        rows = plan.rows[j]
        matrix[rows, j] = _eval_column(graph, sm, plan.columns[j], values, rows, categories)
    return matrix


def _with_design(graph: ModelGraph, sm: SubModel, ms: ModelState, values, categories, var: str) -> ModelState:
    X = _refresh(graph, sm, sm.plan, ms.X, values, categories, var)
    Z = _refresh(graph, sm, sm.random_plan, ms.Z, values, categories, var) if ms.Z is not None else None
    if X is ms.X and Z is ms.Z:
        return ms
    return replace(ms, X=X, Z=Z)


def _nonref_index(sm: SubModel) -> List[int]:
    return [k for k in range(sm.n_categories) if k != sm.ref_index]


def ranef_part(graph: ModelGraph, ms: ModelState) -> np.ndarray:
    return np.einsum("ij,ij->i", ms.Z, ms.b[graph.group_ids])


def linear_predictor(graph: ModelGraph, sm: SubModel, ms: ModelState,
                     coef: Optional[np.ndarray] = None) -> np.ndarray:
    """선형예측 η (multinomial은 (n, K) 행렬, 기준 범주 열은 0)"""
    coef = ms.coef if coef is None else coef
    n = ms.X.shape[0]
    if sm.family.family == "multinomial":
        K = sm.n_categories
        C = coef.reshape(K - 1, -1)
        Xa = np.column_stack([np.ones(n), ms.X])
        eta = np.zeros((n, K))
        eta[:, _nonref_index(sm)] = Xa @ C.T
        return eta
    eta = ms.X @ coef
    if ms.b is not None:
        eta = eta + ranef_part(graph, ms)
    return eta


def response_values(graph: ModelGraph, sm: SubModel, values) -> np.ndarray:
    y = graph.level_values(values, sm.response, sm.level)
    if sm.family.family == "binomial":
        return (y != sm.ref_index).astype(float)
    return y


def family_loglik(sm: SubModel, y: np.ndarray, eta: np.ndarray, ms: ModelState) -> np.ndarray:
    """단위별 로그우도 (지지집합/절단 밖 또는 정의되지 않는 η는 -inf)"""
    fam = sm.family
    kind = fam.family
    center = eta
    with np.errstate(all="ignore"):
        if kind == "gaussian":
            center = linkinv(eta, fam.link)
            ll = gaussian_logpdf(y, center, ms.tau)
        elif kind == "binomial":
            ll = binomial_logpmf(y, eta, fam.link)
        elif kind == "poisson":
            ll = poisson_logpmf(y, linkinv(eta, fam.link))
        elif kind == "gamma":
            center = linkinv(eta, fam.link)
            ll = gamma_logpdf(y, center, ms.tau)
        elif kind == "lognorm":
            ll = lognorm_logpdf(y, eta, ms.tau)
        elif kind == "beta":
            ll = beta_logpdf(y, linkinv(eta, "logit"), ms.tau)
        elif kind == "ordinal":
            ll = clm_logpmf(y, eta, ms.gammas)
        elif kind == "multinomial":
            ll = mlogit_logpmf(y, eta)
        elif kind == "weibull":
            ll = weibull_logpdf(y, sm.event, eta, ms.shape)
        else:
            raise SamplerError(f"지원하지 않는 분포 '{kind}'", node=sm.response)
        finite = np.isfinite(eta) if eta.ndim == 1 else np.all(np.isfinite(eta), axis=1)
        finite &= np.isfinite(center) if center.ndim == 1 else True
        ll = np.where(finite, ll, -np.inf)
        if sm.trunc is not None:
            lo, hi = sm.trunc
            inside = np.ones(len(y), dtype=bool)
            if lo is not None:
                inside &= y >= lo
            if hi is not None:
                inside &= y <= hi
            mass = log_trunc_mass(fam, center, ms.tau if ms.tau is not None else 1.0, lo, hi)
            ll = np.where(inside & finite, ll - mass, -np.inf)
    return ll


def unit_loglik(graph: ModelGraph, sm: SubModel, ms: ModelState, values,
                eta: Optional[np.ndarray] = None) -> np.ndarray:
    if eta is None:
        eta = linear_predictor(graph, sm, ms)
    return family_loglik(sm, response_values(graph, sm, values), eta, ms)


def log_density(graph: ModelGraph, sm: SubModel, state: ChainState, rows=None) -> np.ndarray:
    """
    하위 모델의 단위별 로그 밀도 log p(y | η, θ)

    Args:
        rows: 단위(행 또는 그룹) 인덱스 (None이면 전체)
    """
    ll = unit_loglik(graph, sm, state.models[sm.response], state.values)
    return ll if rows is None else ll[rows]


# ===== MH 기본 연산 =====

def _log_ratio(new, cur) -> np.ndarray:
    new = np.asarray(new, dtype=float)
    cur = np.asarray(cur, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where(np.isneginf(new), -np.inf, new - cur)


def mh_accept(rng: np.random.Generator, log_ratio, node: Optional[str] = None):
    """
    MH 수락 판정 (대칭 제안)

    Raises:
        SamplerError: 로그 비율이 NaN일 때
    """
    log_ratio = np.asarray(log_ratio, dtype=float)
    if np.isnan(log_ratio).any():
        raise SamplerError("목표 로그밀도가 NaN입니다", node=node)
    with np.errstate(divide="ignore"):
        accepted = np.log(rng.random(log_ratio.shape)) < log_ratio
    return bool(accepted) if accepted.ndim == 0 else accepted


TRANSFORMS = {
    "identity": (lambda v: v, lambda z: z, lambda z: 0.0),
    "log": (np.log, np.exp, lambda z: z),
    "logit": (special.logit, special.expit, lambda z: special.log_expit(z) + special.log_expit(-z)),
}


def update_mh_scalar(state: ChainState, node: str, target: Callable[[float], float], value: float,
                     step: AdaptiveStep, index: int = 0, transform: str = "identity",
                     current: Optional[float] = None) -> Tuple[float, float]:
    """
    변환 척도에서 random-walk MH 한 단계 (야코비안 보정 포함)

    Returns:
        (새 값, 새 값의 목표 로그밀도)

    Raises:
        SamplerError: 목표 로그밀도가 NaN일 때
    """
    to_z, from_z, log_jac = TRANSFORMS[transform]
    z = to_z(value)
    z_new = z + step.step[index] * state.rng.standard_normal()
    v_new = float(from_z(z_new))
    lp_cur = target(value) if current is None else current
    lp_new = target(v_new)
    if np.isnan(lp_new):
        raise SamplerError("목표 로그밀도가 NaN입니다", node=node)
    ratio = _log_ratio(lp_new + log_jac(z_new), lp_cur + log_jac(z))
    accepted = mh_accept(state.rng, ratio, node)
    step.record(accepted, state, index)
    return (v_new, lp_new) if accepted else (value, lp_cur)


# ===== 사전분포 =====

def intercept_mask(sm: SubModel) -> np.ndarray:
    mask = np.array([c.is_intercept for c in sm.columns], dtype=bool)
    if sm.family.family == "multinomial":
        row = np.concatenate([[True], mask])
        return np.tile(row, sm.n_categories - 1)
    return mask


def coef_prior(graph: ModelGraph, sm: SubModel, ms: ModelState) -> Tuple[float, np.ndarray]:
    """(사전 평균, 계수별 사전 정밀도)"""
    mu, tau = graph.hyper.regression_prior(sm.family.hyper_group)
    prec = np.full(len(ms.coef), tau)
    if ms.ridge is not None:
        shrink = ~intercept_mask(sm)
        prec[shrink] = ms.ridge[shrink]
    return mu, prec


def _normal_logprior(x, mu, prec) -> float:
    return float(np.sum(-0.5 * prec * (np.asarray(x) - mu) ** 2))


# ===== 파라미터 갱신 =====

def update_ridge(graph: ModelGraph, sm: SubModel, state: ChainState):
    """
    능형 정밀도 τ_j ~ Gamma(0.01 + 1/2, 0.01 + (β_j − μ)²/2), 절편 제외

    계수마다 별도의 Gamma(0.01, 0.01) 정밀도를 둔다 (모델 전체 공통 정밀도 하나가 아님)
    """
    ms = state.models[sm.response]
    mu, _ = graph.hyper.regression_prior(sm.family.hyper_group)
    shrink = ~intercept_mask(sm)
    rate = RIDGE_RATE + 0.5 * (ms.coef[shrink] - mu) ** 2
    ms.ridge[shrink] = state.rng.gamma(RIDGE_SHAPE + 0.5, 1.0 / rate)


def _conjugate_response(graph: ModelGraph, sm: SubModel, ms: ModelState, values) -> np.ndarray:
    y = response_values(graph, sm, values)
    if sm.family.family == "lognorm":
        y = np.log(y)
    if ms.b is not None:
        y = y - ranef_part(graph, ms)
    return y


def update_conjugate_normal_coefs(graph: ModelGraph, sm: SubModel, state: ChainState):
    """
    정규 선형모형 계수의 정확한 다변량 정규 완전조건부 추출

    Raises:
        SamplerError: 사후 정밀도 행렬이 특이할 때 (condition number 포함)
    """
    ms = state.models[sm.response]
    r = _conjugate_response(graph, sm, ms, state.values)
    X = ms.X
    mu0, prec0 = coef_prior(graph, sm, ms)
    P = ms.tau * (X.T @ X) + np.diag(prec0)
    rhs = ms.tau * (X.T @ r) + prec0 * mu0
    try:
        factor = linalg.cho_factor(P, lower=True)
    except linalg.LinAlgError:
        raise SamplerError(f"계수 사후 정밀도 행렬이 특이합니다 (condition number {np.linalg.cond(P):.3g})",
                           node=f"{sm.coef_kind}_{sm.response}")
    mean = linalg.cho_solve(factor, rhs)
    z = state.rng.standard_normal(len(mean))
    ms.coef = mean + linalg.solve_triangular(factor[0], z, lower=True, trans="T")


def _update_coefs_mh(graph: ModelGraph, sm: SubModel, state: ChainState):
    """계수별 scalar MH (선형예측을 증분으로 갱신)"""
    ms = state.models[sm.response]
    rng = state.rng
    key = f"{sm.coef_kind}_{sm.response}"
    step = state.steps[key]
    y = response_values(graph, sm, state.values)
    mu0, prec0 = coef_prior(graph, sm, ms)
    eta = linear_predictor(graph, sm, ms)
    ll = float(np.sum(family_loglik(sm, y, eta, ms)))
    multinomial = sm.family.family == "multinomial"
    if multinomial:
        Xa = np.column_stack([np.ones(ms.X.shape[0]), ms.X])
        width = Xa.shape[1]
        nonref = _nonref_index(sm)
    labels = sm.coef_labels
    for j in range(len(ms.coef)):
        old = ms.coef[j]
        new = old + step.step[j] * rng.standard_normal()
        delta = new - old
        if multinomial:
            eta_new = eta.copy()
            eta_new[:, nonref[j // width]] += delta * Xa[:, j % width]
        else:
            eta_new = eta + delta * ms.X[:, j]
        ll_new = float(np.sum(family_loglik(sm, y, eta_new, ms)))
        node = f"{key}[{labels[j % len(labels)]}]"
        if np.isnan(ll_new):
            raise SamplerError("목표 로그밀도가 NaN입니다", node=node)
        ratio = _log_ratio(ll_new - 0.5 * prec0[j] * (new - mu0) ** 2,
                           ll - 0.5 * prec0[j] * (old - mu0) ** 2)
        accepted = mh_accept(rng, ratio, node)
        step.record(accepted, state, j)
        if accepted:
            ms.coef[j] = new
            eta = eta_new
            ll = ll_new


def update_precision(graph: ModelGraph, sm: SubModel, state: ChainState):
    """잔차 정밀도 τ: 켤레면 Gamma(shape + n/2, rate + SSR/2), 아니면 로그 척도 MH"""
    ms = state.models[sm.response]
    shape, rate = graph.hyper.precision_prior(sm.family.hyper_group)
    if sm.family.conjugate and sm.trunc is None:
        r = _conjugate_response(graph, sm, ms, state.values) - ms.X @ ms.coef
        ms.tau = float(state.rng.gamma(shape + 0.5 * len(r), 1.0 / (rate + 0.5 * float(r @ r))))
        return
    y = response_values(graph, sm, state.values)
    eta = linear_predictor(graph, sm, ms)

    def target(tau):
        trial = replace(ms, tau=tau)
        return float(np.sum(family_loglik(sm, y, eta, trial))) + (shape - 1.0) * np.log(tau) - rate * tau

    ms.tau, _ = update_mh_scalar(state, f"tau_{sm.response}", target, ms.tau,
                                 state.steps[f"tau_{sm.response}"], transform="log")


def update_cutpoints(graph: ModelGraph, sm: SubModel, state: ChainState):
    """순서형 절편: γ1과 증분 δ를 각각 MH (사전분포 N(mu_delta, 1/tau_delta))"""
    ms = state.models[sm.response]
    mu = graph.hyper.value("ordinal", "mu_delta")
    prec = graph.hyper.value("ordinal", "tau_delta")
    y = response_values(graph, sm, state.values)
    eta = linear_predictor(graph, sm, ms)
    step = state.steps[f"gamma_{sm.response}"]
    current = None
    for k in range(len(ms.cut)):

        def target(v, k=k):
            cut = ms.cut.copy()
            cut[k] = v
            trial = replace(ms, cut=cut)
            return float(np.sum(family_loglik(sm, y, eta, trial))) - 0.5 * prec * float(np.sum((cut - mu) ** 2))

        node = f"gamma_{sm.response}[1]" if k == 0 else f"delta_{sm.response}[{k}]"
        value, current = update_mh_scalar(state, node, target, float(ms.cut[k]), step, k, current=current)
        ms.cut[k] = value


def update_weibull_shape(graph: ModelGraph, sm: SubModel, state: ChainState):
    """와이블 shape s ~ Exp(rate_shape_weibull), 로그 척도 MH"""
    ms = state.models[sm.response]
    rate = graph.hyper.value("weibull", "rate_shape")
    y = response_values(graph, sm, state.values)
    eta = linear_predictor(graph, sm, ms)

    def target(s):
        return float(np.sum(weibull_logpdf(y, sm.event, eta, s))) - rate * s

    ms.shape, _ = update_mh_scalar(state, f"shape_{sm.response}", target, ms.shape,
                                   state.steps[f"shape_{sm.response}"], transform="log")


def update_submodel_parameters(graph: ModelGraph, sm: SubModel, state: ChainState):
    ms = state.models[sm.response]
    if ms.ridge is not None:
        update_ridge(graph, sm, state)
    if sm.family.conjugate and sm.trunc is None:
        update_conjugate_normal_coefs(graph, sm, state)
    else:
        _update_coefs_mh(graph, sm, state)
    if sm.family.has_precision:
        update_precision(graph, sm, state)
    if sm.family.family == "ordinal" and len(ms.cut):
        update_cutpoints(graph, sm, state)
    if sm.family.family == "weibull":
        update_weibull_shape(graph, sm, state)


# ===== 결측값 =====

def _to_units(graph: ModelGraph, ll: np.ndarray, model_level: str, var_level: str, units: np.ndarray) -> np.ndarray:
    if model_level == var_level:
        return ll[units]
    return np.bincount(graph.group_ids, weights=ll, minlength=graph.n_groups)[units]


def imputation_target(graph: ModelGraph, state: ChainState, var: str, values, units: np.ndarray) -> np.ndarray:
    """
    결측 단위별 완전조건부 로그밀도

    자기 모델 + var를 설계 열에 쓰는 모든 하위 모델의 로그우도 (level-2 변수는 그룹 안 행의 합)
    """
    level = graph.metas[var].level
    total = np.zeros(len(units))
    owner = graph.owner_index(var)
    for idx in [owner] + graph.dependent_indices(var):
        sm = graph.submodels[idx]
        ms = state.models[sm.response]
        if idx != owner:
            ms = _with_design(graph, sm, ms, values, state.categories, var)
        ll = unit_loglik(graph, sm, ms, values)
        total += _to_units(graph, ll, sm.level, level, units)
    return total


def _commit_values(graph: ModelGraph, state: ChainState, var: str):
    """var 변경 후 의존 모델의 설계 행렬 갱신"""
    for idx in graph.dependent_indices(var):
        sm = graph.submodels[idx]
        ms = state.models[sm.response]
        updated = _with_design(graph, sm, ms, state.values, state.categories, var)
        ms.X, ms.Z = updated.X, updated.Z


def update_missing_continuous(graph: ModelGraph, var: str, state: ChainState):
    """연속형 결측값: 셀별 random-walk MH (모든 결측 셀을 한 번에, 셀마다 독립 수락)"""
    units = graph.missing_units(var)
    if not len(units):
        return
    step = state.steps[f"imp_{var}"]
    current = state.values[var]
    proposal = current.copy()
    proposal[units] = current[units] + step.step * state.rng.standard_normal(len(units))
    trial = dict(state.values)
    trial[var] = proposal
    lp_cur = imputation_target(graph, state, var, state.values, units)
    lp_new = imputation_target(graph, state, var, trial, units)
    if np.isnan(lp_new).any():
        bad = units[np.isnan(lp_new)][0]
        raise SamplerError("목표 로그밀도가 NaN입니다", node=f"imp_{var}[{bad + 1}]")
    accepted = mh_accept(state.rng, _log_ratio(lp_new, lp_cur), f"imp_{var}")
    step.record(accepted, state)
    updated = current.copy()
    updated[units[accepted]] = proposal[units[accepted]]
    state.values[var] = updated
    _commit_values(graph, state, var)


def update_missing_categorical(graph: ModelGraph, var: str, state: ChainState):
    """
    범주형 결측값: 모든 범주에서 목표 밀도를 계산해 정확히 추출

    Raises:
        SamplerError: 한 행의 모든 범주가 -inf일 때
    """
    units = graph.missing_units(var)
    if not len(units):
        return
    K = graph.metas[var].n_categories
    table = np.empty((len(units), K))
    for k in range(K):
        trial = dict(state.values)
        candidate = state.values[var].copy()
        candidate[units] = k
        trial[var] = candidate
        table[:, k] = imputation_target(graph, state, var, trial, units)
    if np.isnan(table).any():
        raise SamplerError("목표 로그밀도가 NaN입니다", node=f"imp_{var}")
    dead = np.all(np.isneginf(table), axis=1)
    if dead.any():
        unit = int(units[dead][0]) + 1
        raise SamplerError(f"❌ 변수 '{var}'의 {unit}번째 단위에서 모든 범주의 밀도가 0입니다",
                           node=f"imp_{var}[{unit}]")
    probs = np.exp(table - table.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    u = state.rng.random(len(units))
    choice = np.minimum((np.cumsum(probs, axis=1) < u[:, None]).sum(axis=1), K - 1)
    updated = state.values[var].copy()
    updated[units] = choice
    state.values[var] = updated
    _commit_values(graph, state, var)


def update_missing(graph: ModelGraph, var: str, state: ChainState):
    if graph.metas[var].is_categorical:
        update_missing_categorical(graph, var, state)
    else:
        update_missing_continuous(graph, var, state)


# ===== 랜덤효과 =====

def update_random_effects(graph: ModelGraph, sm: SubModel, state: ChainState):
    """
    랜덤효과 b_i 갱신

    lmm(절단 없음): 그룹별 정확한 다변량 정규 추출 (배치 Cholesky)
    그 외: 그룹별 블록 random-walk MH
    """
    ms = state.models[sm.response]
    g = graph.group_ids
    G = graph.n_groups
    q = ms.b.shape[1]
    rng = state.rng
    if sm.family.conjugate and sm.trunc is None:
        r = _conjugate_response(graph, sm, replace(ms, b=None), state.values) - ms.X @ ms.coef
        ZtZ = np.zeros((G, q, q))
        np.add.at(ZtZ, g, ms.Z[:, :, None] * ms.Z[:, None, :])
        Ztr = np.zeros((G, q))
        np.add.at(Ztr, g, ms.Z * r[:, None])
        P = ms.invD[None, :, :] + ms.tau * ZtZ
        try:
            L = np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            raise SamplerError("랜덤효과 사후 정밀도 행렬이 양의 정부호가 아닙니다", node=f"b_{sm.response}")
        mean = np.linalg.solve(P, (ms.tau * Ztr)[..., None])[..., 0]
        z = rng.standard_normal((G, q))
        ms.b = mean + np.linalg.solve(np.swapaxes(L, 1, 2), z[..., None])[..., 0]
        return

    step = state.steps[f"b_{sm.response}"]
    y = response_values(graph, sm, state.values)
    eta_fixed = ms.X @ ms.coef
    proposal = ms.b + step.step[0] * rng.standard_normal((G, q))

    def group_target(b):
        eta = eta_fixed + np.einsum("ij,ij->i", ms.Z, b[g])
        ll = np.bincount(g, weights=family_loglik(sm, y, eta, ms), minlength=G)
        return ll - 0.5 * np.einsum("ij,jk,ik->i", b, ms.invD, b)

    lp_new = group_target(proposal)
    if np.isnan(lp_new).any():
        raise SamplerError("목표 로그밀도가 NaN입니다", node=f"b_{sm.response}")
    accepted = mh_accept(rng, _log_ratio(lp_new, group_target(ms.b)), f"b_{sm.response}")
    step.record(accepted.mean(), state)
    ms.b = np.where(accepted[:, None], proposal, ms.b)


def update_ranef_covariance(graph: ModelGraph, sm: SubModel, state: ChainState):
    """
    invD, D, RinvD 갱신

    q = 1: invD ~ Gamma(KinvD/2 + N/2, RinvD/2 + Σb²/2)
    q > 1: invD ~ Wishart(KinvD + N, (RinvD + Σ b bᵀ)⁻¹)
    RinvD_jj ~ Gamma(shape + KinvD/2, rate + invD_jj/2)

    Raises:
        SamplerError: 갱신 후 공분산 행렬이 양의 정부호가 아닐 때
    """
    ms = state.models[sm.response]
    rng = state.rng
    q = ms.b.shape[1]
    N = ms.b.shape[0]
    K = graph.hyper.kinvd(q)
    shape = float(graph.hyper.group("ranef")["shape_diag_RinvD"])
    rate = float(graph.hyper.group("ranef")["rate_diag_RinvD"])
    if q == 1:
        prec = rng.gamma(0.5 * K + 0.5 * N, 1.0 / (0.5 * ms.RinvD[0, 0] + 0.5 * float(ms.b[:, 0] @ ms.b[:, 0])))
        invD = np.array([[prec]])
    else:
        scale = np.linalg.inv(ms.RinvD + ms.b.T @ ms.b)
        scale = 0.5 * (scale + scale.T)
        invD = np.atleast_2d(stats.wishart.rvs(df=K + N, scale=scale, random_state=rng))
    invD = 0.5 * (invD + invD.T)
    try:
        np.linalg.cholesky(invD)
    except np.linalg.LinAlgError:
        raise SamplerError("랜덤효과 공분산 행렬이 양의 정부호가 아닙니다", node=f"D_{sm.response}")
    ms.invD = invD
    D = np.linalg.inv(invD)
    ms.D = 0.5 * (D + D.T)
    diag = rng.gamma(shape + 0.5 * K, 1.0 / (rate + 0.5 * np.diag(invD)))
    ms.RinvD = np.diag(diag)


# ===== 스윕 =====

def sweep(graph: ModelGraph, state: ChainState):
    """분석 모델 → 공변량 모델 파라미터 → 결측값 → 랜덤효과 → 공분산"""
    for sm in graph.submodels:
        update_submodel_parameters(graph, sm, state)
    for var in graph.imputed:
        update_missing(graph, var, state)
    mixed = [sm for sm in graph.submodels if sm.family.mixed]
    for sm in mixed:
        update_random_effects(graph, sm, state)
    for sm in mixed:
        update_ranef_covariance(graph, sm, state)


# ===== 초기값 =====

def _link(mean: float, link: str) -> float:
    with np.errstate(all="ignore"):
        value = {
            "identity": mean, "log": np.log(mean), "inverse": 1.0 / mean,
            "logit": special.logit(mean), "probit": special.ndtri(mean),
            "cloglog": np.log(-np.log1p(-mean)),
        }[link]
    return float(value) if np.isfinite(value) else 0.0


def _support_ok(sm: SubModel, x: np.ndarray) -> np.ndarray:
    lo, hi, open_bounds = sm.family.support
    ok = (x > lo) & (x < hi) if open_bounds else (x >= lo) & (x <= hi)
    if sm.trunc is not None:
        if sm.trunc[0] is not None:
            ok &= x >= sm.trunc[0]
        if sm.trunc[1] is not None:
            ok &= x <= sm.trunc[1]
    return ok


def _init_values(graph: ModelGraph, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """결측 연속형 = 관측 평균 + 잡음 (지지집합 밖이면 관측값 추출), 범주형 = 관측 빈도 추출"""
    values = {name: arr.copy() for name, arr in graph.values.items()}
    for var in graph.imputed:
        meta = graph.metas[var]
        arr = values[var]
        units = np.flatnonzero(np.isnan(arr))
        observed = arr[~np.isnan(arr)]
        if not len(observed):
            raise DataError(f"변수 '{var}'에 관측값이 없어 대체할 수 없습니다")
        if meta.is_categorical:
            freq = np.bincount(observed.astype(int), minlength=meta.n_categories).astype(float)
            arr[units] = rng.choice(meta.n_categories, size=len(units), p=freq / freq.sum())
        else:
            sd = float(np.std(observed)) if len(observed) > 1 else 1.0
            draws = observed.mean() + 0.1 * (sd if sd > 0 else 1.0) * rng.standard_normal(len(units))
            sm = graph.submodel(var)
            bad = ~_support_ok(sm, draws)
            draws[bad] = rng.choice(observed, size=int(bad.sum()))
            arr[units] = draws
    return values


def _init_model(graph: ModelGraph, sm: SubModel, values, categories, rng: np.random.Generator) -> ModelState:
    fam = sm.family
    n_units = graph.n_units(sm.level)
    X = _refresh(graph, sm, sm.plan, sm.plan.matrix, values, categories)
    n_coef = len(sm.coef_labels) * (sm.n_categories - 1 if fam.family == "multinomial" else 1)
    coef = 0.1 * rng.standard_normal(n_coef)
    y = graph.level_values(values, sm.response, sm.level)
    intercepts = [j for j, c in enumerate(sm.columns) if c.is_intercept]
    if intercepts and fam.family not in ("multinomial", "ordinal"):
        if fam.family == "binomial":
            mean = float(np.clip(np.mean(y != sm.ref_index), 0.05, 0.95))
        elif fam.family == "lognorm":
            mean = float(np.mean(np.log(y)))
        else:
            mean = float(np.mean(y))
        if fam.family == "weibull":
            start = float(np.log(mean))
        elif fam.family == "lognorm":
            start = mean
        elif fam.family == "beta":
            start = _link(mean, "logit")
        else:
            start = _link(mean, fam.link)
        if fam.link == "inverse" or (fam.family in ("gamma", "poisson") and fam.link == "identity"):
            # 평균이 양수여야 하는 링크: 기울기 잡음을 절편 크기에 맞춤
            coef *= min(1.0, 0.1 * abs(start))
        coef[intercepts[0]] = start + 0.1 * rng.standard_normal()
    ms = ModelState(coef=coef, X=X)
    if fam.has_precision:
        ms.tau = 1.0
    if sm.shrinkage == "ridge":
        ms.ridge = np.ones(n_coef)
    if fam.family == "ordinal":
        K = sm.n_categories
        cum = np.array([np.mean(y <= k) for k in range(K - 1)])
        cuts = np.sort(special.logit(np.clip(cum, 0.01, 0.99)) + 0.1 * rng.standard_normal(K - 1))
        ms.cut = np.concatenate([cuts[:1], np.log(np.maximum(np.diff(cuts), 1e-3))])
    if fam.family == "weibull":
        ms.shape = 1.0
    if fam.mixed:
        q = sm.nranef
        ms.Z = _refresh(graph, sm, sm.random_plan, sm.random_plan.matrix, values, categories)
        ms.b = 0.1 * rng.standard_normal((graph.n_groups, q))
        ms.D = np.eye(q)
        ms.invD = np.eye(q)
        ms.RinvD = np.eye(q)
    return ms


def _init_steps(graph: ModelGraph, models: Mapping[str, ModelState], values) -> Dict[str, AdaptiveStep]:
    steps = {}
    for sm in graph.submodels:
        ms = models[sm.response]
        steps[f"{sm.coef_kind}_{sm.response}"] = AdaptiveStep.create(len(ms.coef), 0.1)
        if sm.family.has_precision:
            steps[f"tau_{sm.response}"] = AdaptiveStep.create(1, 0.3)
        if ms.cut is not None:
            steps[f"gamma_{sm.response}"] = AdaptiveStep.create(len(ms.cut), 0.1)
        if ms.shape is not None:
            steps[f"shape_{sm.response}"] = AdaptiveStep.create(1, 0.1)
        if ms.b is not None:
            steps[f"b_{sm.response}"] = AdaptiveStep.create(1, 0.3)
    for var in graph.imputed:
        if graph.metas[var].is_categorical:
            continue
        observed = graph.values[var][~np.isnan(graph.values[var])]
        sd = float(np.std(observed)) if len(observed) > 1 else 1.0
        steps[f"imp_{var}"] = AdaptiveStep.create(len(graph.missing_units(var)), sd if sd > 0 else 1.0)
    return steps


def _as_array(value, key: str) -> np.ndarray:
    try:
        return np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"초기값 '{key}'이(가) 숫자가 아닙니다")


def _check_length(arr: np.ndarray, size: int, key: str):
    if arr.size != size:
        raise ConfigError(f"초기값 '{key}'의 길이({arr.size})가 노드 수({size})와 다릅니다")


def apply_inits(graph: ModelGraph, state: ChainState, inits: Optional[Mapping[str, object]]):
    """
    사용자 초기값 적용 (샘플러 척도)

    키: 'beta'/'alpha' (모델이 하나일 때), 'beta_y', 'beta_y[label]', 'tau_y', 'sigma_y',
        'gamma_y', 'shape_y', 'b_y', 'D_y', 'imp_x[i]'

    Raises:
        ConfigError: 알 수 없는 노드 이름, 길이 불일치, 잘못된 값
    """
    if not inits:
        return
    by_kind: Dict[str, List[SubModel]] = {}
    for sm in graph.submodels:
        by_kind.setdefault(sm.coef_kind, []).append(sm)
    imputed_changed = set()
    for key, value in inits.items():
        base = base_name(key)
        label = key[len(base) + 1:-1] if "[" in key else None
        if base in ("beta", "alpha"):
            models = by_kind.get(base, [])
            if len(models) != 1:
                raise ConfigError(f"초기값 '{key}': 해당 모델이 하나가 아닙니다 ({len(models)}개), 'beta_<반응변수>' 형식을 쓰세요")
            base = f"{base}_{models[0].response}"
        kind, _, resp = base.partition("_")
        if kind == "imp":
            if resp not in graph.imputed or label is None:
                raise ConfigError(f"알 수 없는 초기값 이름 '{key}'")
            try:
                unit = int(label) - 1
            except ValueError:
                raise ConfigError(f"알 수 없는 초기값 이름 '{key}'")
            if unit not in set(graph.missing_units(resp).tolist()):
                raise ConfigError(f"초기값 '{key}': 결측 셀이 아닙니다")
            v = float(_as_array(value, key))
            meta = graph.metas[resp]
            if meta.is_categorical:
                if not (1 <= v <= meta.n_categories) or v != int(v):
                    raise ConfigError(f"초기값 '{key}'은(는) 1..{meta.n_categories} 범주 코드여야 합니다")
                v -= 1.0
            state.values[resp][unit] = v
            imputed_changed.add(resp)
            continue
        if resp not in state.models:
            raise ConfigError(f"알 수 없는 초기값 이름 '{key}'")
        sm = graph.submodel(resp)
        ms = state.models[resp]
        arr = _as_array(value, key)
        if kind in ("beta", "alpha") and kind == sm.coef_kind:
            if label is None:
                _check_length(arr, len(ms.coef), key)
                ms.coef = arr.ravel().copy()
            else:
                names = [n for n, leaf in graph.node_groups.items() if base_name(n) == base]
                if key not in names:
                    raise ConfigError(f"알 수 없는 초기값 이름 '{key}'")
                ms.coef[names.index(key)] = float(arr)
        elif kind in ("tau", "sigma") and ms.tau is not None and label is None:
            v = float(arr)
            if not v > 0:
                raise ConfigError(f"초기값 '{key}'은(는) 0보다 커야 합니다")
            ms.tau = v if kind == "tau" else 1.0 / v ** 2
        elif kind == "gamma" and ms.cut is not None and label is None:
            _check_length(arr, len(ms.cut), key)
            if np.any(np.diff(arr) <= 0):
                raise ConfigError(f"초기값 '{key}'은(는) 증가하는 값이어야 합니다")
            ms.cut = np.concatenate([arr[:1], np.log(np.diff(arr))])
        elif kind == "shape" and ms.shape is not None and label is None:
            if not float(arr) > 0:
                raise ConfigError(f"초기값 '{key}'은(는) 0보다 커야 합니다")
            ms.shape = float(arr)
        elif kind == "b" and ms.b is not None and label is None:
            _check_length(arr, ms.b.size, key)
            ms.b = arr.reshape(ms.b.shape).copy()
        elif kind == "D" and ms.D is not None and label is None:
            _check_length(arr, ms.D.size, key)
            D = arr.reshape(ms.D.shape)
            try:
                np.linalg.cholesky(D)
            except np.linalg.LinAlgError:
                raise ConfigError(f"초기값 '{key}'은(는) 양의 정부호 행렬이어야 합니다")
            ms.D = D.copy()
            ms.invD = np.linalg.inv(D)
        else:
            raise ConfigError(f"알 수 없는 초기값 이름 '{key}'")
    for var in imputed_changed:
        _commit_values(graph, state, var)


def chain_seeds(settings: McmcSettings) -> Tuple[List[np.random.SeedSequence], int]:
    """체인별 독립 난수 스트림 (seed가 없으면 엔트로피 기록)"""
    root = np.random.SeedSequence(settings.seed)
    return root.spawn(settings.n_chains), int(root.entropy)


def resolve_inits(settings: McmcSettings, chain: int) -> Optional[Mapping[str, object]]:
    inits = settings.inits
    if inits is None:
        return None
    if callable(inits):
        return inits(chain)
    if isinstance(inits, Mapping):
        return inits
    return inits[chain]


def init_chain(graph: ModelGraph, chain: int, seed_seq: np.random.SeedSequence,
               inits: Optional[Mapping[str, object]] = None) -> ChainState:
    rng = np.random.default_rng(seed_seq)
    categories = graph.categories
    values = _init_values(graph, rng)
    models = {sm.response: _init_model(graph, sm, values, categories, rng) for sm in graph.submodels}
    state = ChainState(chain=chain, rng=rng, values=values, models=models, categories=categories)
    state.steps = _init_steps(graph, models, values)
    apply_inits(graph, state, inits)
    return state


def init_chains(graph: ModelGraph, settings: McmcSettings) -> List[ChainState]:
    """
    체인별 초기 상태

    Raises:
        ConfigError: 초기값 이름/길이 오류
    """
    settings.validate()
    seeds, _ = chain_seeds(settings)
    return [init_chain(graph, c + 1, seeds[c], resolve_inits(settings, c)) for c in range(settings.n_chains)]


# ===== 저장 / 역변환 =====

def backtransform_coefs(draws, scaling: Sequence[Tuple[float, float]], has_intercept: bool = True,
                        sd_y: float = 1.0, mean_y: float = 0.0,
                        intercept_index: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    척도화된 계수 → 데이터 척도

    slope_j = slope_j · sd_y / s_j
    intercept = sd_y · (int − Σ slope_j · m_j / s_j) + mean_y

    Returns:
        (데이터 척도 계수, 반복별 이동량 Σ slope_j · m_j / s_j)

    Raises:
        SamplerError: 척도화 항목 수가 계수 수와 다를 때
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[1] != len(scaling):
        raise SamplerError(f"척도화 정보({len(scaling)}개)와 계수 수({draws.shape[1]})가 다릅니다")
    if not len(scaling):
        return draws.copy(), np.zeros(draws.shape[0])
    centers = np.array([c for c, _ in scaling], dtype=float)
    scales = np.array([s for _, s in scaling], dtype=float)
    out = draws * (sd_y / scales)
    shift = (draws * (centers / scales)).sum(axis=1)
    if has_intercept:
        out[:, intercept_index] = unscale(draws[:, intercept_index] - shift, (mean_y, sd_y))
    return out, shift


def _column_scaling(sm: SubModel) -> List[Tuple[float, float]]:
    return [(c.center, c.scale) for c in sm.columns]


def state_vector(graph: ModelGraph, state: ChainState) -> np.ndarray:
    """전체 노드 값 (graph.node_groups 순서, 계수는 데이터 척도)"""
    parts: List[np.ndarray] = []
    for sm in graph.submodels:
        ms = state.models[sm.response]
        fam = sm.family
        scaling = _column_scaling(sm)
        shift = np.zeros(1)
        if fam.family == "multinomial":
            C = ms.coef.reshape(sm.n_categories - 1, -1)
            coefs, _ = backtransform_coefs(C, [(0.0, 1.0)] + scaling, True)
            parts.append(coefs.ravel())
        else:
            intercepts = [j for j, c in enumerate(sm.columns) if c.is_intercept]
            coefs, shift = backtransform_coefs(ms.coef[None, :], scaling, bool(intercepts),
                                               intercept_index=intercepts[0] if intercepts else 0)
            parts.append(coefs.ravel())
        if fam.residual == "sigma":
            parts.append(np.array([1.0 / np.sqrt(ms.tau)]))
        elif fam.residual == "tau":
            parts.append(np.array([ms.tau]))
        if fam.family == "ordinal":
            parts.append(ms.gammas + shift[0])
            parts.append(ms.cut[1:])
        if fam.family == "weibull":
            parts.append(np.array([ms.shape]))
        if fam.mixed:
            upper = np.triu_indices(ms.D.shape[0])
            parts.append(ms.D[upper])
            parts.append(ms.invD[upper])
            parts.append(np.diag(ms.RinvD))
            parts.append(ms.b.ravel())
    for var in graph.imputed:
        imp = state.values[var][graph.missing_units(var)]
        parts.append(imp + 1.0 if graph.metas[var].is_categorical else imp)
    return np.concatenate(parts) if parts else np.zeros(0)


def adaptation_warnings(state: ChainState) -> List[str]:
    """적응 마지막 구간의 수락률이 [0.1, 0.7] 밖인 노드"""
    messages = []
    for key, step in state.steps.items():
        if not step.proposed.sum():
            continue
        if key.startswith(("imp_", "b_")):
            rates = np.array([step.accepted.sum() / step.proposed.sum()])
        else:
            seen = step.proposed > 0
            rates = step.accepted[seen] / step.proposed[seen]
        worst = rates[np.argmax(np.abs(rates - TARGET_ACCEPT))]
        if worst < ACCEPT_RANGE[0] or worst > ACCEPT_RANGE[1]:
            messages.append(f"적응 미완료 (chain {state.chain}): {key} 수락률 {worst:.2f} "
                            f"(권장 {ACCEPT_RANGE[0]}~{ACCEPT_RANGE[1]}, n_adapt를 늘리세요)")
    return messages


@dataclass
class ChainResult:
    draws: np.ndarray
    messages: List[str]


def run_chain(graph: ModelGraph, settings: McmcSettings, chain: int, seed_seq: np.random.SeedSequence,
              monitor_index: np.ndarray, inits: Optional[Mapping[str, object]] = None) -> ChainResult:
    """
    체인 하나 실행

    Raises:
        SamplerError: 체인/반복/노드 정보를 담아 전달
    """
    state = init_chain(graph, chain, seed_seq, inits)
    n_adapt, n_iter, thin = settings.n_adapt, settings.n_iter, settings.thin
    window_start = n_adapt - min(ADAPT_WINDOW, n_adapt)
    draws = np.empty((n_iter // thin, len(monitor_index)))
    messages: List[str] = []
    stored = 0
    for t in range(1, n_adapt + n_iter + 1):
        state.iteration = t
        state.adapting = t <= n_adapt
        state.counting = state.adapting and t > window_start
        try:
            sweep(graph, state)
        except SamplerError as e:
            raise e.with_context(chain, t)
        if t == n_adapt:
            messages.extend(adaptation_warnings(state))
        if t > n_adapt and (t - n_adapt) % thin == 0:
            draws[stored] = state_vector(graph, state)[monitor_index]
            stored += 1
    return ChainResult(draws=draws, messages=messages)


def _chain_job(args) -> ChainResult:
    return run_chain(*args)


def run_mcmc(graph: ModelGraph, settings: McmcSettings, log_callback=None) -> McmcSamples:
    """
    MCMC 실행

    체인은 서로 독립이며 병렬로 실행할 수 있고, 결과는 체인 순서로 합칩니다.
    병렬도는 결과에 영향을 주지 않습니다.

    Returns:
        McmcSamples (모니터 노드, 데이터 척도)
    """
    def log(level, message):
        if log_callback:
            log_callback(level, message)

    settings.validate()
    monitor_params = settings.monitor_params if settings.monitor_params is not None else graph.monitor_params
    monitors = graph.monitored_nodes(monitor_params)
    all_nodes = list(graph.node_groups)
    position = {name: i for i, name in enumerate(all_nodes)}
    monitor_index = np.array([position[n] for n in monitors], dtype=int)

    seeds, entropy = chain_seeds(settings)
    jobs = [(graph, replace(settings, inits=None), c + 1, seeds[c], monitor_index, resolve_inits(settings, c))
            for c in range(settings.n_chains)]
    workers = effective_parallelism(settings.parallel, settings.n_chains)
    log("INFO", f"MCMC 시작: 체인 {settings.n_chains}개, 적응 {settings.n_adapt}, 반복 {settings.n_iter}, "
                f"thin {settings.thin}, 병렬 {workers}")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chain_job, jobs))
    else:
        results = [_chain_job(job) for job in jobs]

    warnings = []
    for result in results:
        for message in result.messages:
            log("WARNING", message)
            warnings.append(message)

    meta = {
        "n_adapt": settings.n_adapt,
        "n_iter": settings.n_iter,
        "thin": settings.thin,
        "n_chains": settings.n_chains,
        "seed": settings.seed,
        "entropy": None if settings.seed is not None else str(entropy),
        "settings": settings.to_dict(),
        "node_groups": {n: graph.node_groups[n] for n in monitors},
        "composites": graph.composites,
        "scaling": graph.scaling_table(),
        "warnings": warnings,
    }
    samples = McmcSamples(chains=[r.draws for r in results], nodes=monitors,
                          iterations=settings.iterations, meta=meta)
    log("SUCCESS", f"MCMC 완료: 체인당 표본 {samples.n_stored}개, 노드 {len(monitors)}개")
    return samples
