"""
모델 그래프 모듈

분석 모델 수식과 데이터로부터 하위 모델의 순서 있는 목록을 만듭니다.
  - 분석 모델이 맨 앞, 그 뒤에 공변량(대체) 모델
  - 공변량 모델은 level-1 먼저, 같은 수준 안에서는 결측 수 내림차순
  - 각 공변량 모델은 목록에서 뒤에 오는 변수와 모델 없는 완전 공변량을 조건으로 함
설계 열, 척도화 통계, 모니터 노드 이름도 여기서 정합니다.
"""

import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.data_frame import (
    LVLONE, Dataset, VariableMeta, apply_scaling, contrast_matrix, group_values, infer_variable_meta,
    scaling_stats, variable_codes,
)
from src.distributions import ModelFamily, model_family
from src.errors import ConfigError, DataError
from src.formula_parser import (
    Arith, ArithOp, FormulaAst, Func, Negate, RandomPart, StringLit, Term, Variable,
    evaluate_arith, expand_terms, factor_label, formula_variables, is_plain_factor,
    parse_formula, parse_random, term_dependencies, FUNCTIONS,
)
from src.hyperpars import HyperParameters, default_hyperparameters
from src.monitors import DEFAULT_COMPOSITES, DEFAULT_MONITOR, resolve_monitors, validate_monitor_params


ROLES = ("analysis", "covariate")


# ===== 설계 열 =====

@dataclass(frozen=True)
class FactorSpec:
    """설계 열을 이루는 인자 하나"""
    kind: str                          # "value" | "contrast" | "expr"
    var: Optional[str] = None
    node: object = None
    weights: Tuple[float, ...] = ()    # contrast: 범주 코드별 값

    def evaluate(self, env: Mapping[str, np.ndarray], categories: Mapping[str, Tuple[str, ...]]) -> np.ndarray:
        if self.kind == "value":
            return np.asarray(env[self.var], dtype=float)
        if self.kind == "contrast":
            codes = np.asarray(env[self.var], dtype=float)
            out = np.full(len(codes), np.nan)
            observed = ~np.isnan(codes)
            out[observed] = np.asarray(self.weights)[codes[observed].astype(int)]
            return out
        deps = term_dependencies(self.node)
        labels = {v: code_labels(env[v], categories[v]) for v in deps if v in categories}
        numeric_env = {v: env[v] for v in deps}
        return evaluate_arith(self.node, numeric_env, labels)


@dataclass(frozen=True)
class ColumnSpec:
    """설계 행렬의 열 하나: 인자들의 곱, (값 - center) / scale"""
    label: str
    term: str
    factors: Tuple[FactorSpec, ...] = ()
    deps: FrozenSet[str] = frozenset()
    center: float = 0.0
    scale: float = 1.0

    @property
    def is_intercept(self) -> bool:
        return not self.factors

    @property
    def is_scaled(self) -> bool:
        return self.center != 0.0 or self.scale != 1.0

    def raw(self, env: Mapping[str, np.ndarray], categories: Mapping[str, Tuple[str, ...]],
            n_units: int) -> np.ndarray:
        out = np.ones(n_units)
        for factor in self.factors:
            out = out * factor.evaluate(env, categories)
        return out

    def evaluate(self, env: Mapping[str, np.ndarray], categories: Mapping[str, Tuple[str, ...]],
                 n_units: int) -> np.ndarray:
        return apply_scaling(self.raw(env, categories, n_units), (self.center, self.scale))


INTERCEPT_COLUMN = ColumnSpec(label="(Intercept)", term="(Intercept)")


def code_labels(codes: np.ndarray, categories: Sequence[str]) -> np.ndarray:
    out = np.empty(len(codes), dtype=object)
    for i, c in enumerate(np.asarray(codes, dtype=float)):
        out[i] = None if np.isnan(c) else categories[int(c)]
    return out


def _factor_options(node, metas: Mapping[str, VariableMeta], coding: str) -> List[Tuple[str, FactorSpec]]:
    """항의 인자 하나 → (열 이름 조각, FactorSpec) 후보 목록"""
    if isinstance(node, Variable):
        meta = metas.get(node.name)
        if meta is None:
            raise ConfigError(f"수식의 변수 '{node.name}'이(가) 데이터에 없습니다")
        if not meta.is_categorical:
            return [(node.name, FactorSpec("value", var=node.name))]
        matrix = contrast_matrix(meta.n_categories, meta.ref_index, coding)
        keep = [c for c in meta.categories if c != meta.ref_cat]
        return [(f"{node.name}{cat}", FactorSpec("contrast", var=node.name, weights=tuple(matrix[:, j])))
                for j, cat in enumerate(keep)]
    _check_expression(node, metas)
    return [(factor_label(node), FactorSpec("expr", node=node))]


def _check_expression(node, metas: Mapping[str, VariableMeta]):
    """함수/산술식 안의 변수 검사 (범주형은 문자열 비교에서만 허용)"""
    if isinstance(node, Variable):
        meta = metas.get(node.name)
        if meta is None:
            raise ConfigError(f"수식의 변수 '{node.name}'이(가) 데이터에 없습니다")
        if meta.is_categorical:
            raise ConfigError(f"범주형 변수 '{node.name}'은(는) 함수/산술식 안에서 쓸 수 없습니다")
        return
    if isinstance(node, Func):
        if node.name not in FUNCTIONS:
            raise ConfigError(f"지원하지 않는 함수 '{node.name}'")
        for a in node.args:
            _check_expression(a, metas)
    elif isinstance(node, Arith):
        _check_expression(node.expr, metas)
    elif isinstance(node, Negate):
        _check_expression(node.operand, metas)
    elif isinstance(node, ArithOp):
        if node.op in ("==", "!=") and (isinstance(node.left, StringLit) or isinstance(node.right, StringLit)):
            var_node = node.right if isinstance(node.left, StringLit) else node.left
            if not isinstance(var_node, Variable) or var_node.name not in metas:
                raise ConfigError("문자열 비교의 한쪽은 데이터의 변수여야 합니다")
            return
        _check_expression(node.left, metas)
        _check_expression(node.right, metas)


def term_columns(term: Term, metas: Mapping[str, VariableMeta], coding: str = "dummy") -> List[ColumnSpec]:
    """항 → 설계 열 (범주형 인자는 K-1개 대비 열로 펼침)"""
    if term.is_intercept:
        return [INTERCEPT_COLUMN]
    options = [_factor_options(f, metas, coding) for f in term.factors]
    deps = frozenset(term_dependencies(term))
    columns = []
    for combo in itertools.product(*options):
        label = ":".join(piece for piece, _ in combo)
        columns.append(ColumnSpec(label=label, term=term.name,
                                  factors=tuple(spec for _, spec in combo), deps=deps))
    return columns


@dataclass
class DesignPlan:
    """
    설계 계획

    matrix는 관측값으로 계산한 설계 행렬이며, 결측 의존 변수가 있는 행은 nan입니다.
    dynamic[j]는 열 j가 의존하는 불완전 변수, rows[j]는 매 반복 다시 계산할 행입니다.
    """
    columns: List[ColumnSpec]
    matrix: np.ndarray
    dynamic: Dict[int, FrozenSet[str]] = field(default_factory=dict)
    rows: Dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def static_columns(self) -> List[int]:
        return [j for j in range(len(self.columns)) if j not in self.dynamic]

    @property
    def dynamic_terms(self) -> List[str]:
        return list(dict.fromkeys(self.columns[j].term for j in self.dynamic))

    def columns_depending_on(self, var: str) -> List[int]:
        return [j for j, deps in self.dynamic.items() if var in deps]


def build_design_plan(columns: Sequence[ColumnSpec], env: Mapping[str, np.ndarray],
                      categories: Mapping[str, Tuple[str, ...]], n_units: int,
                      incomplete: Iterable[str], owner: str = "") -> DesignPlan:
    """
    설계 열을 관측값으로 계산하고 동적 열/행을 표시

    Raises:
        DataError: 완전한 행에서 함수 값이 정의되지 않을 때
    """
    incomplete = set(incomplete)
    matrix = np.empty((n_units, len(columns)))
    dynamic: Dict[int, FrozenSet[str]] = {}
    rows: Dict[int, np.ndarray] = {}
    for j, col in enumerate(columns):
        values = col.evaluate(env, categories, n_units)
        missing_deps = frozenset(d for d in col.deps if d in incomplete)
        if missing_deps:
            mask = np.zeros(n_units, dtype=bool)
            for d in missing_deps:
                mask |= np.isnan(np.asarray(env[d], dtype=float))
            if mask.any():
                dynamic[j] = missing_deps
                rows[j] = np.flatnonzero(mask)
                values = values.copy()
                values[mask] = np.nan
        fixed_rows = np.ones(n_units, dtype=bool)
        if j in dynamic:
            fixed_rows[rows[j]] = False
        if not np.all(np.isfinite(values[fixed_rows])):
            raise DataError(
                f"❌ '{owner}' 모델의 설계 열 '{col.label}' 값이 정의되지 않는 행이 있습니다\n"
                f"함수의 정의역(log, sqrt 등)과 데이터를 확인하세요."
            )
        matrix[:, j] = values
    return DesignPlan(columns=list(columns), matrix=matrix, dynamic=dynamic, rows=rows)


# ===== 하위 모델 / 그래프 =====

@dataclass
class SubModel:
    """모델 순서열의 하위 모델 하나"""
    response: str
    model_type: str
    role: str
    level: str = LVLONE
    columns: List[ColumnSpec] = field(default_factory=list)
    random_columns: List[ColumnSpec] = field(default_factory=list)
    group: Optional[str] = None
    trunc: Optional[Tuple[Optional[float], Optional[float]]] = None
    shrinkage: Optional[str] = None
    categories: Tuple[str, ...] = ()
    ref_index: Optional[int] = None
    event: Optional[np.ndarray] = None
    event_label: Optional[str] = None
    plan: Optional[DesignPlan] = None
    random_plan: Optional[DesignPlan] = None

    @property
    def family(self) -> ModelFamily:
        return model_family(self.model_type)

    @property
    def coef_kind(self) -> str:
        return "beta" if self.role == "analysis" else "alpha"

    @property
    def predictor_terms(self) -> List[str]:
        return list(dict.fromkeys(c.term for c in self.columns))

    @property
    def coef_labels(self) -> List[str]:
        labels = [c.label for c in self.columns]
        if self.family.family == "multinomial":
            return ["(Intercept)"] + labels
        return labels

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def nranef(self) -> int:
        return len(self.random_columns)

    @property
    def deps(self) -> FrozenSet[str]:
        out = set()
        for col in self.columns + self.random_columns:
            out |= col.deps
        return frozenset(out)

    @property
    def nonref_categories(self) -> List[str]:
        return [c for k, c in enumerate(self.categories) if k != self.ref_index]


@dataclass
class ModelGraph:
    """하위 모델 순서열 + 하이퍼파라미터 + 데이터 값 + 모니터 노드"""
    submodels: List[SubModel]
    metas: Dict[str, VariableMeta]
    hyper: HyperParameters
    values: Dict[str, np.ndarray]
    n_rows: int
    group_var: Optional[str] = None
    group_ids: Optional[np.ndarray] = None
    n_groups: int = 0
    group_labels: Tuple[str, ...] = ()
    imputed: List[str] = field(default_factory=list)
    monitor_params: Dict[str, object] = field(default_factory=lambda: dict(DEFAULT_MONITOR))
    composites: Dict[str, List[str]] = field(default_factory=dict)
    node_groups: Dict[str, str] = field(default_factory=dict)
    contrasts: str = "dummy"
    no_model: Tuple[str, ...] = ()
    formulas: Tuple[str, ...] = ()

    @property
    def analysis_models(self) -> List[SubModel]:
        return [sm for sm in self.submodels if sm.role == "analysis"]

    @property
    def covariate_models(self) -> List[SubModel]:
        return [sm for sm in self.submodels if sm.role == "covariate"]

    @property
    def categories(self) -> Dict[str, Tuple[str, ...]]:
        return {name: m.categories for name, m in self.metas.items() if m.is_categorical}

    def submodel(self, response: str) -> SubModel:
        for sm in self.submodels:
            if sm.response == response:
                return sm
        raise ConfigError(f"'{response}'에 대한 모델이 없습니다")

    def owner_index(self, var: str) -> Optional[int]:
        for i, sm in enumerate(self.submodels):
            if sm.response == var:
                return i
        return None

    def dependent_indices(self, var: str) -> List[int]:
        """var를 설계 열(고정/랜덤)에 쓰는 하위 모델 (자기 모델 제외)"""
        return [i for i, sm in enumerate(self.submodels) if var in sm.deps and sm.response != var]

    def n_units(self, level: str) -> int:
        return self.n_rows if level == LVLONE else self.n_groups

    def missing_units(self, var: str) -> np.ndarray:
        return np.flatnonzero(np.isnan(self.values[var]))

    def level_values(self, values: Mapping[str, np.ndarray], var: str, level: str) -> np.ndarray:
        """변수 값을 주어진 수준의 단위로 맞춤 (level-2 → 행 전개)"""
        own = self.metas[var].level
        arr = values[var]
        if own == level:
            return arr
        if level == LVLONE:
            return arr[self.group_ids]
        raise ConfigError(f"level-1 변수 '{var}'을(를) level-2 모델에서 쓸 수 없습니다")

    def env_for(self, sm: SubModel, values: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
        return {d: self.level_values(values, d, sm.level) for d in sm.deps}

    def monitored_nodes(self, params: Optional[Mapping[str, object]] = None) -> List[str]:
        return resolve_monitors(self.node_groups, params if params is not None else self.monitor_params,
                                self.composites)

    def scaling_table(self) -> Dict[str, Dict[str, List[float]]]:
        """하위 모델별 척도화된 열의 (center, scale)"""
        table = {}
        for sm in self.submodels:
            entries = {c.label: [c.center, c.scale] for c in sm.columns if c.is_scaled}
            table[sm.response] = entries
        return table


# ===== 모델 종류 =====

GLM_FAMILIES = {"gaussian": "gaussian", "binomial": "binomial", "gamma": "gamma", "Gamma": "gamma",
                "poisson": "poisson"}

DEFAULT_LINKS = {"gaussian": "identity", "binomial": "logit", "gamma": "inverse", "poisson": "log"}


def analysis_model_type(kind: str, family: Optional[str] = None, link: Optional[str] = None,
                        mixed: bool = False) -> str:
    """
    분석 모델 진입점 이름 → 하위 모델 종류

    lm → lm, glm + family/link → glm_<family>_<link>, lme → lmm,
    glme(binomial/logit) → glmm_binomial_logit, 그 외 lognorm/betareg/clm/mlogit/survreg.
    모델 종류 이름을 그대로 넘겨도 됩니다.

    Raises:
        ConfigError: 지원하지 않는 family/link 조합
    """
    if kind in ("lm", "lme"):
        return "lmm" if (mixed or kind == "lme") else "lm"
    if kind in ("glm", "glme"):
        if family is None:
            raise ConfigError(f"'{kind}' 모델에는 family가 필요합니다")
        fam = GLM_FAMILIES.get(family)
        if fam is None:
            raise ConfigError(f"지원하지 않는 family '{family}' (가능: gaussian, binomial, Gamma, poisson)")
        link = link or DEFAULT_LINKS[fam]
        if kind == "glme" or mixed:
            if fam == "gaussian" and link == "identity":
                return "lmm"
            if fam == "binomial" and link == "logit":
                return "glmm_binomial_logit"
            raise ConfigError(f"혼합모형은 gaussian/identity, binomial/logit만 지원합니다 (입력: {family}/{link})")
        name = f"glm_{fam}_{link}"
        model_family(name)
        return name
    if family is not None or link is not None:
        raise ConfigError(f"'{kind}' 모델에는 family/link를 지정할 수 없습니다")
    family_info = model_family(kind)
    if mixed and not family_info.mixed:
        raise ConfigError(f"'{kind}'은(는) 혼합모형으로 쓸 수 없습니다")
    return family_info.model_type


def select_model_type(meta: VariableMeta, group: Optional[str] = None) -> str:
    """
    공변량 기본 모델 종류

    최상위 수준: continuous→lm, 범주 2개→glm_binomial_logit, 순서형→clm, 명목형→mlogit
    하위 수준(level-1, 그룹 있음): continuous→lmm, 범주 2개→glmm_binomial_logit

    Raises:
        ConfigError: 하위 수준의 다범주 변수 (clmm/mlogitmm 미지원)
    """
    lower = group is not None and meta.level == LVLONE
    if meta.vtype == "continuous":
        return "lmm" if lower else "lm"
    if meta.n_categories == 2:
        return "glmm_binomial_logit" if lower else "glm_binomial_logit"
    if lower:
        kind = "clmm" if meta.vtype == "ordered" else "mlogitmm"
        raise ConfigError(
            f"❌ level-1 범주형 변수 '{meta.name}'({meta.describe()})에는 {kind} 모델이 필요하지만\n"
            f"지원하지 않습니다. 변수를 합치거나 no_model/다른 수준을 고려하세요."
        )
    return "clm" if meta.vtype == "ordered" else "mlogit"


def validate_model_type(meta: VariableMeta, model_type: str, group: Optional[str] = None,
                        observed: Optional[np.ndarray] = None) -> str:
    """
    변수 타입/수준과 모델 종류의 조합 검사

    Raises:
        ConfigError: 타입과 맞지 않는 모델 종류
        DataError: 관측값이 모델의 지지집합 밖에 있을 때
    """
    fam = model_family(model_type)
    lower = group is not None and meta.level == LVLONE
    if fam.mixed != lower:
        where = "하위 수준(level-1)" if lower else "최상위 수준"
        raise ConfigError(f"'{meta.name}'은(는) {where} 변수라 '{model_type}'을(를) 쓸 수 없습니다")
    if fam.family == "weibull":
        raise ConfigError("survreg는 Surv() 반응변수에만 쓸 수 있습니다")
    if fam.family == "binomial":
        if not meta.is_categorical or meta.n_categories != 2:
            raise ConfigError(f"'{model_type}'은(는) 범주 2개 변수에만 쓸 수 있습니다 ('{meta.name}': {meta.describe()})")
    elif fam.family in ("ordinal", "multinomial"):
        if not meta.is_categorical:
            raise ConfigError(f"'{model_type}'은(는) 범주형 변수에만 쓸 수 있습니다 ('{meta.name}')")
    elif meta.is_categorical:
        raise ConfigError(f"범주형 변수 '{meta.name}'에는 '{model_type}'을(를) 쓸 수 없습니다")
    if observed is not None and not meta.is_categorical:
        values = observed[~np.isnan(observed)]
        lower_b, upper_b, open_b = fam.support
        bad = (values <= lower_b) | (values >= upper_b) if open_b else (values < lower_b) | (values > upper_b)
        if fam.family == "poisson":
            bad |= np.floor(values) != values
        if bad.any():
            raise DataError(f"'{meta.name}'의 관측값이 '{model_type}' 모델의 지지집합 밖에 있습니다")
    return fam.model_type


def order_submodels(metas: Sequence[VariableMeta], user_models: Optional[Mapping[str, str]] = None,
                    no_model: Iterable[str] = (), log_callback=None) -> List[str]:
    """
    공변량 모델 순서 결정

    level-1 모델이 level-2 모델보다 항상 앞선다 (결측 비율과 무관).
    예: hc(level-1) 다음에 SMOKE, MARITAL, ETHN, HEIGHT_M(level-2, 결측 비율 순)

    Args:
        metas: 후보 공변량 메타정보 (수식 등장 순서, 분석 반응변수 제외)
        user_models: 사용자가 모델 종류를 지정한 변수 (완전 변수라도 모델을 가짐)
        no_model: 모델을 만들지 않을 완전 변수

    Returns:
        모델을 가질 변수 이름 (level-1 먼저, 수준 안에서 결측 수 내림차순, 동률은 등장 순서)

    Raises:
        ConfigError: no_model에 불완전 변수 또는 후보에 없는 변수가 있을 때
    """
    user_models = dict(user_models or {})
    no_model = set(no_model)
    by_name = {m.name: m for m in metas}
    for name in no_model:
        if name not in by_name:
            raise ConfigError(f"no_model의 '{name}'은(는) 모델 공변량이 아닙니다")
        if by_name[name].n_missing > 0:
            raise ConfigError(
                f"❌ no_model에 불완전 변수 '{name}'(결측 {by_name[name].n_missing}개)이 있습니다\n"
                f"no_model은 완전히 관측된 변수에만 쓸 수 있습니다."
            )
    for name in user_models:
        if name in no_model:
            raise ConfigError(f"'{name}'이(가) models와 no_model에 모두 있습니다")

    incomplete_upper = any(m.level != LVLONE and m.n_missing > 0 for m in metas)
    chosen = []
    for position, meta in enumerate(metas):
        if meta.name in no_model:
            continue
        needs = meta.n_missing > 0 or meta.name in user_models
        if meta.level == LVLONE and incomplete_upper:
            needs = True
        if needs:
            chosen.append((0 if meta.level == LVLONE else 1, -meta.n_missing, position, meta.name))
    chosen.sort()
    if log_callback and no_model:
        log_callback("WARNING", f"no_model 변수 {sorted(no_model)}은(는) 불완전 공변량과 독립이라고 가정합니다")
    return [name for *_, name in chosen]


# ===== 그래프 생성 =====

def _as_ast(formula: Union[str, FormulaAst]) -> FormulaAst:
    return parse_formula(formula) if isinstance(formula, str) else formula


def _response_vars(ast: FormulaAst) -> List[str]:
    if ast.response is None:
        raise ConfigError("분석 모델 수식에는 반응변수가 필요합니다")
    if ast.response.kind == "survival":
        return [ast.response.time] + sorted(ast.response.variables() - {ast.response.time})
    return [ast.response.name]


def _default_analysis_type(ast: FormulaAst, meta: Optional[VariableMeta], mixed: bool) -> str:
    if ast.response.kind == "survival":
        return "survreg"
    if meta.vtype == "continuous":
        return "lmm" if mixed else "lm"
    if meta.n_categories == 2:
        return "glmm_binomial_logit" if mixed else "glm_binomial_logit"
    if mixed:
        raise ConfigError(f"범주형 반응변수 '{meta.name}'의 혼합모형(clmm/mlogitmm)은 지원하지 않습니다")
    return "clm" if meta.vtype == "ordered" else "mlogit"


def _normalize_per_var(value, name: str) -> Dict[str, object]:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"'{name}'은(는) 변수 이름 → 값 형식이어야 합니다")
    return dict(value)


def _scalable(col: ColumnSpec, metas: Mapping[str, VariableMeta], scale_vars: Optional[set]) -> bool:
    if col.is_intercept:
        return False
    for dep in col.deps:
        meta = metas[dep]
        if meta.vtype == "continuous" and (scale_vars is None or dep in scale_vars):
            return True
    return False


def _scale_columns(columns: List[ColumnSpec], env: Mapping[str, np.ndarray],
                   categories: Mapping[str, Tuple[str, ...]], n_units: int,
                   metas: Mapping[str, VariableMeta], scale_vars: Optional[set]) -> List[ColumnSpec]:
    """관측된 행에서 열 평균/표준편차를 계산해 척도화 정보 기록"""
    out = []
    for col in columns:
        if not _scalable(col, metas, scale_vars):
            out.append(col)
            continue
        raw = col.raw(env, categories, n_units)
        raw = np.where(np.isfinite(raw), raw, np.nan)
        if len(np.unique(raw[~np.isnan(raw)])) < 2:
            out.append(col)
            continue
        center, scale = scaling_stats(raw)
        out.append(replace(col, center=center, scale=scale))
    return out


def build_model_graph(formulas: Union[str, FormulaAst, Sequence[Union[str, FormulaAst]]], ds: Dataset,
                      options: Optional[Mapping[str, object]] = None, log_callback=None) -> ModelGraph:
    """
    모델 그래프 생성

    Args:
        formulas: 분석 모델 수식 (문자열/AST 또는 그 목록)
        ds: 데이터셋
        options: {model_type, random, models, no_model, auxvars, refcats, contrasts, trunc,
                  shrinkage, monitor_params, hyperpars, scale_vars, types}
        log_callback: 로그 콜백 (level, message)

    Returns:
        ModelGraph

    Raises:
        ConfigError: 수식/옵션 오류, 데이터에 없는 변수
        DataError: 데이터가 모델과 맞지 않을 때
    """
    options = dict(options or {})
    known = {"model_type", "random", "models", "no_model", "auxvars", "refcats", "contrasts", "trunc",
             "shrinkage", "monitor_params", "hyperpars", "scale_vars", "types", "group"}
    unknown = set(options) - known
    if unknown:
        raise ConfigError(f"알 수 없는 모델 옵션: {sorted(unknown)}")

    def log(level, message):
        if log_callback:
            log_callback(level, message)

    if isinstance(formulas, (str, FormulaAst)):
        formulas = [formulas]
    asts = [_as_ast(f) for f in formulas]
    if not asts:
        raise ConfigError("분석 모델 수식이 없습니다")
    if options.get("random"):
        if len(asts) != 1 or asts[0].random_parts:
            raise ConfigError("'random'은 랜덤효과가 없는 단일 수식에만 쓸 수 있습니다")
        asts[0] = replace(asts[0], random_parts=tuple(parse_random(str(options["random"]))))

    # 그룹 변수
    groups = {p.group for ast in asts for p in ast.random_parts}
    if options.get("group"):
        groups.add(str(options["group"]))
    if len(groups) > 1:
        raise ConfigError(f"그룹 변수는 하나만 지원합니다 (2수준 모형): {sorted(groups)}")
    group = next(iter(groups)) if groups else None
    if len([p for ast in asts for p in ast.random_parts]) > 1:
        raise ConfigError("랜덤효과 부분은 수식당 하나만 지원합니다 ((a + b | ID) 형식으로 합치세요)")

    # 변수 존재 확인
    responses = [_response_vars(ast) for ast in asts]
    aux_ast = None
    if options.get("auxvars"):
        aux_ast = parse_formula(str(options["auxvars"]), one_sided=True)
    referenced = set(itertools.chain.from_iterable(responses))
    for ast in asts:
        referenced |= set(formula_variables(ast))
    if aux_ast is not None:
        referenced |= set(formula_variables(aux_ast))
    if group:
        referenced.add(group)
    missing_vars = sorted(v for v in referenced if v not in ds)
    if missing_vars:
        raise ConfigError(f"❌ 데이터에 없는 변수: {', '.join(missing_vars)}\n수식과 CSV 열 이름을 확인하세요.")
    if group is not None:
        ds = ds.with_grouping(group)

    # 변수 메타정보 (기준 범주 포함)
    overrides = {k: dict(v) for k, v in _normalize_per_var(options.get("types"), "types").items()}
    refcats = options.get("refcats")
    if isinstance(refcats, str):
        refcats = {name: refcats for name in ds.columns}
    for name, spec in _normalize_per_var(refcats, "refcats").items():
        if name not in ds:
            raise ConfigError(f"refcats의 변수 '{name}'이(가) 데이터에 없습니다")
        overrides.setdefault(name, {})["refcat"] = spec
    meta_list = infer_variable_meta(ds, group, {k: v for k, v in overrides.items() if k != group},
                                    log_callback=log_callback)
    metas = {m.name: m for m in meta_list if m.name in referenced}
    if isinstance(options.get("refcats"), Mapping):
        for name in options["refcats"]:
            if name in metas and not metas[name].is_categorical:
                raise ConfigError(f"연속형 변수 '{name}'에는 기준 범주를 지정할 수 없습니다")

    coding = str(options.get("contrasts", "dummy"))
    contrast_matrix(2, 0, coding)

    # 분석 모델 종류
    type_opt = options.get("model_type")
    analysis_types = []
    for idx, ast in enumerate(asts):
        mixed = bool(ast.random_parts)
        resp = responses[idx][0]
        if mixed and ast.response.kind == "variable" and metas[resp].level != LVLONE:
            metas[resp] = replace(metas[resp], level=LVLONE, n_units=ds.n_rows,
                                  n_missing=int(np.isnan(ds.column(resp).values).sum()))
        if isinstance(type_opt, Mapping):
            kind = type_opt.get(resp)
        elif isinstance(type_opt, (list, tuple)):
            kind = type_opt[idx] if idx < len(type_opt) else None
        else:
            kind = type_opt
        if kind is None:
            kind = _default_analysis_type(ast, metas.get(resp), mixed)
        else:
            kind = analysis_model_type(str(kind), mixed=mixed) if kind in ("lm", "lme") else str(kind)
        fam = model_family(kind)
        if fam.mixed != mixed:
            raise ConfigError(f"'{kind}' 모델과 랜덤효과 지정이 맞지 않습니다 (랜덤효과 {'있음' if mixed else '없음'})")
        if (fam.family == "weibull") != (ast.response.kind == "survival"):
            raise ConfigError("Surv() 반응변수는 survreg 모델에서만 쓸 수 있습니다")
        analysis_types.append(fam.model_type)

    all_responses = set(itertools.chain.from_iterable(responses))
    for idx, ast in enumerate(asts):
        clash = set(formula_variables(ast)) & all_responses
        if clash:
            raise ConfigError(f"반응변수 {sorted(clash)}은(는) 분석 모델의 공변량으로 쓸 수 없습니다")
    if aux_ast is not None:
        clash = set(formula_variables(aux_ast)) & all_responses
        if clash:
            raise ConfigError(f"auxvars에 분석 모델 반응변수가 있습니다: {sorted(clash)}")

    # 공변량 후보 (등장 순서) 와 주효과 여부
    candidates: List[str] = []
    for ast in asts:
        for v in formula_variables(ast):
            if v not in candidates and v != group:
                candidates.append(v)
    main_effects = set(candidates)
    aux_terms: List[Term] = []
    if aux_ast is not None:
        for term in expand_terms(aux_ast, include_intercept=False):
            if term.degree == 1 and is_plain_factor(term.factors[0]):
                main_effects.add(term.factors[0].name)
            else:
                aux_terms.append(term)
        for v in formula_variables(aux_ast):
            if v not in candidates and v != group:
                candidates.append(v)

    user_models = _normalize_per_var(options.get("models"), "models")
    for name in user_models:
        if name not in candidates:
            raise ConfigError(f"models의 '{name}'은(는) 모델 공변량이 아닙니다")
    no_model = tuple(options.get("no_model") or ())
    if isinstance(options.get("no_model"), str):
        no_model = (options["no_model"],)
    modelled = order_submodels([metas[v] for v in candidates], user_models, no_model, log_callback)

    # 절단 / 축소
    trunc_opt = _normalize_per_var(options.get("trunc"), "trunc")
    trunc: Dict[str, Tuple[Optional[float], Optional[float]]] = {}
    for name, bounds in trunc_opt.items():
        if name not in metas or (name not in modelled and name not in all_responses):
            raise ConfigError(f"trunc의 '{name}'은(는) 모델을 가진 변수가 아닙니다")
        if metas[name].is_categorical:
            raise ConfigError(f"범주형 변수 '{name}'에는 trunc를 쓸 수 없습니다")
        if not isinstance(bounds, (list, tuple)) or len(bounds) != 2:
            raise ConfigError(f"trunc['{name}']은(는) [하한, 상한] 형식이어야 합니다 (없으면 null)")
        lo, hi = (None if b is None else float(b) for b in bounds)
        if lo is not None and hi is not None and not lo < hi:
            raise ConfigError(f"trunc['{name}']의 하한({lo})은 상한({hi})보다 작아야 합니다")
        observed = ds.column(name).values
        observed = observed[~np.isnan(observed)]
        if (lo is not None and (observed < lo).any()) or (hi is not None and (observed > hi).any()):
            raise DataError(f"'{name}'의 관측값 중 trunc 범위 [{lo}, {hi}] 밖의 값이 있습니다")
        trunc[name] = (lo, hi)

    shrink_opt = options.get("shrinkage")
    if isinstance(shrink_opt, str) or shrink_opt is None:
        shrinkage = {}
        default_shrink = shrink_opt
    else:
        shrinkage = _normalize_per_var(shrink_opt, "shrinkage")
        default_shrink = None
    for name, value in list(shrinkage.items()) + ([("*", default_shrink)] if default_shrink else []):
        if value not in (None, "ridge"):
            raise ConfigError(f"지원하지 않는 shrinkage '{value}' (ridge만 가능)")

    scale_opt = options.get("scale_vars", True)
    if scale_opt is True or scale_opt is None:
        scale_vars = None
    elif scale_opt is False:
        scale_vars = set()
    else:
        scale_vars = {str(v) for v in scale_opt}
        unknown_scale = scale_vars - set(metas)
        if unknown_scale:
            raise ConfigError(f"scale_vars에 모델에 없는 변수가 있습니다: {sorted(unknown_scale)}")

    # 단위(행/그룹)별 값
    values: Dict[str, np.ndarray] = {}
    for name, meta in metas.items():
        col = ds.column(name)
        codes = variable_codes(col, meta.categories) if meta.is_categorical else col.values
        if meta.level != LVLONE:
            codes = group_values(codes, ds.group_ids, ds.n_groups)
        values[name] = codes
    categories = {name: m.categories for name, m in metas.items() if m.is_categorical}
    incomplete = {name for name in values if np.isnan(values[name]).any()}

    def env_at(level: str, deps: Iterable[str]) -> Dict[str, np.ndarray]:
        env = {}
        for d in deps:
            arr = values[d]
            if metas[d].level != level:
                if level != LVLONE:
                    raise ConfigError(f"level-1 변수 '{d}'을(를) level-2 모델에서 쓸 수 없습니다")
                arr = arr[ds.group_ids]
            env[d] = arr
        return env

    submodels: List[SubModel] = []

    # 분석 모델
    for idx, ast in enumerate(asts):
        kind = analysis_types[idx]
        fam = model_family(kind)
        resp = responses[idx][0]
        terms = expand_terms(ast)
        if not fam.has_intercept:
            terms = [t for t in terms if not t.is_intercept]
        columns = [c for t in terms for c in term_columns(t, metas, coding)]
        random_columns: List[ColumnSpec] = []
        for part in ast.random_parts:
            for t in expand_terms(part):
                random_columns.extend(term_columns(t, metas, coding))
        sm = SubModel(response=resp, model_type=kind, role="analysis", level=LVLONE,
                      columns=columns, random_columns=random_columns,
                      group=group if fam.mixed else None, trunc=trunc.get(resp),
                      shrinkage=shrinkage.get(resp, default_shrink))
        if ast.response.kind == "survival":
            for v in responses[idx]:
                if v in incomplete:
                    raise DataError(f"생존 반응변수 '{v}'에 결측값이 있습니다 (시간/사건 변수는 완전해야 함)")
            time_meta = metas[resp]
            if time_meta.is_categorical:
                raise DataError(f"생존 시간 변수 '{resp}'은(는) 수치형이어야 합니다")
            sm.event = _event_indicator(ast.response.event, metas, values, categories)
            sm.event_label = ast.response.event and factor_label(ast.response.event)
            if (values[resp] <= 0).any():
                raise DataError(f"생존 시간 '{resp}'은(는) 0보다 커야 합니다")
        else:
            meta = metas[resp]
            _validate_analysis_response(meta, fam, values[resp])
            if meta.is_categorical:
                sm.categories = meta.categories
                sm.ref_index = meta.ref_index
        submodels.append(sm)

    # 공변량 모델
    for position, name in enumerate(modelled):
        meta = metas[name]
        kind = user_models.get(name)
        if kind is None:
            kind = select_model_type(meta, group)
        kind = validate_model_type(meta, str(kind), group, values[name])
        fam = model_family(kind)
        later = set(modelled[position + 1:])
        allowed = {v for v in candidates
                   if v != name and v not in no_model and (v in later or (v not in modelled and v not in incomplete))}
        allowed |= {v for v in no_model if v != name}
        if meta.level != LVLONE:
            allowed = {v for v in allowed if metas[v].level != LVLONE}
        terms: List[Term] = []
        if fam.has_intercept:
            terms.append(Term(()))
        for v in candidates:
            if v in allowed and v in main_effects:
                terms.append(Term((Variable(v),)))
        for term in aux_terms:
            deps = term_dependencies(term)
            if deps and deps <= allowed:
                terms.append(term)
        columns = [c for t in terms for c in term_columns(t, metas, coding)]
        sm = SubModel(response=name, model_type=kind, role="covariate", level=meta.level,
                      columns=columns, random_columns=[INTERCEPT_COLUMN] if fam.mixed else [],
                      group=group if fam.mixed else None, trunc=trunc.get(name),
                      shrinkage=shrinkage.get(name, default_shrink))
        if meta.is_categorical:
            sm.categories = meta.categories
            sm.ref_index = meta.ref_index
        submodels.append(sm)

    # 척도화 + 설계 계획
    for sm in submodels:
        n_units = ds.n_rows if sm.level == LVLONE else ds.n_groups
        fam = sm.family
        if fam.has_intercept and not any(c.is_intercept for c in sm.columns):
            # 절편이 없으면 이동량을 흡수할 곳이 없음
            scalable = set()
        else:
            scalable = scale_vars
        env = env_at(sm.level, sm.deps)
        if scalable is None or scalable:
            sm.columns = _scale_columns(sm.columns, env, categories, n_units, metas, scalable)
        sm.plan = build_design_plan(sm.columns, env, categories, n_units, incomplete, sm.response)
        if sm.random_columns:
            sm.random_plan = build_design_plan(sm.random_columns, env, categories, n_units, incomplete,
                                               sm.response)
        log("DEBUG", f"모델 {sm.response}: {sm.model_type}, 열 {len(sm.columns)}개, "
                     f"동적 열 {len(sm.plan.dynamic)}개")

    imputed = [sm.response for sm in submodels if sm.response in incomplete]

    hyper = default_hyperparameters(options.get("hyperpars"))
    monitor_params = dict(options.get("monitor_params") or DEFAULT_MONITOR)
    validate_monitor_params(monitor_params)

    graph = ModelGraph(
        submodels=submodels, metas=metas, hyper=hyper, values=values, n_rows=ds.n_rows,
        group_var=group, group_ids=ds.group_ids, n_groups=ds.n_groups, group_labels=ds.group_labels,
        imputed=imputed, monitor_params=monitor_params, contrasts=coding, no_model=tuple(no_model),
        formulas=tuple(str(f) if isinstance(f, str) else "" for f in formulas),
    )
    graph.node_groups = node_groups(graph)
    graph.composites = analysis_composites(graph)
    # 모니터 설정의 명시적 노드 이름 확인
    graph.monitored_nodes()
    log("INFO", f"모델 그래프: 분석 모델 {len(asts)}개, 공변량 모델 {len(modelled)}개, "
                f"대체 변수 {len(imputed)}개")
    return graph


def _validate_analysis_response(meta: VariableMeta, fam: ModelFamily, observed: np.ndarray):
    if fam.family == "binomial":
        if not meta.is_categorical or meta.n_categories != 2:
            raise DataError(f"반응변수 '{meta.name}'은(는) 범주 2개여야 합니다 ({meta.describe()})")
        return
    if fam.family in ("ordinal", "multinomial"):
        if not meta.is_categorical:
            raise DataError(f"반응변수 '{meta.name}'은(는) 범주형이어야 합니다")
        return
    if meta.is_categorical:
        raise DataError(f"범주형 반응변수 '{meta.name}'에는 {fam.model_type} 모델을 쓸 수 없습니다")
    values = observed[~np.isnan(observed)]
    lower_b, upper_b, open_b = fam.support
    bad = (values <= lower_b) | (values >= upper_b) if open_b else (values < lower_b) | (values > upper_b)
    if fam.family == "poisson":
        bad |= np.floor(values) != values
    if bad.any():
        raise DataError(f"반응변수 '{meta.name}'의 관측값이 '{fam.model_type}' 모델의 지지집합 밖에 있습니다")


def _event_indicator(event, metas, values, categories) -> np.ndarray:
    """Surv(time, event)의 사건 지시자 (0/1)"""
    if isinstance(event, Variable):
        meta = metas[event.name]
        codes = values[event.name]
        if meta.is_categorical:
            return (codes != meta.ref_index).astype(float)
        out = codes.astype(float)
    else:
        deps = term_dependencies(event)
        labels = {v: code_labels(values[v], categories[v]) for v in deps if v in categories}
        out = evaluate_arith(event, {v: values[v] for v in deps}, labels)
    if not np.all(np.isin(out, (0.0, 1.0))):
        raise DataError("사건 지시자는 0/1 값이어야 합니다")
    return out


def design_plan(sm: SubModel, ds: Dataset, incomplete: Iterable[str],
                metas: Optional[Mapping[str, VariableMeta]] = None) -> DesignPlan:
    """
    하위 모델 하나의 설계 계획을 데이터셋에서 다시 계산

    완전 변수의 열은 한 번 계산하고(척도화 적용), 불완전 변수에 의존하는 열은
    결측 행 목록과 함께 동적 열로 표시합니다.
    """
    if metas is None:
        metas = {m.name: m for m in infer_variable_meta(ds, ds.grouping)}
    values = {}
    for name in sm.deps:
        meta = metas[name]
        col = ds.column(name)
        codes = variable_codes(col, meta.categories) if meta.is_categorical else col.values
        if meta.level != LVLONE:
            codes = group_values(codes, ds.group_ids, ds.n_groups)
            if sm.level == LVLONE:
                codes = codes[ds.group_ids]
        values[name] = codes
    n_units = ds.n_rows if sm.level == LVLONE else ds.n_groups
    categories = {n: metas[n].categories for n in sm.deps if metas[n].is_categorical}
    return build_design_plan(sm.columns, values, categories, n_units, incomplete, sm.response)


# ===== 노드 이름 =====

def _scope(sm: SubModel) -> str:
    return "main" if sm.role == "analysis" else "other"


def submodel_nodes(sm: SubModel, n_groups: int = 0) -> Dict[str, str]:
    """하위 모델의 노드 이름 → leaf 키 (노드 순서 = 저장 순서)"""
    nodes: Dict[str, str] = {}
    scope = _scope(sm)
    fam = sm.family
    coef_leaf = "betas" if sm.role == "analysis" else "alphas"
    prefix = f"{sm.coef_kind}_{sm.response}"
    if fam.family == "multinomial":
        for cat in sm.nonref_categories:
            for label in sm.coef_labels:
                nodes[f"{prefix}[{label},{cat}]"] = coef_leaf
    else:
        for label in sm.coef_labels:
            nodes[f"{prefix}[{label}]"] = coef_leaf
    if fam.residual == "sigma":
        nodes[f"sigma_{sm.response}"] = f"sigma_{scope}"
    elif fam.residual == "tau":
        nodes[f"tau_{sm.response}"] = f"tau_{scope}"
    if fam.family == "ordinal":
        for k in range(1, sm.n_categories):
            nodes[f"gamma_{sm.response}[{k}]"] = f"gamma_{scope}"
        for k in range(1, sm.n_categories - 1):
            nodes[f"delta_{sm.response}[{k}]"] = f"delta_{scope}"
    if fam.family == "weibull":
        nodes[f"shape_{sm.response}"] = f"shape_{scope}"
    if fam.mixed:
        q = sm.nranef
        for kind in ("D", "invD"):
            for j in range(1, q + 1):
                for k in range(j, q + 1):
                    nodes[f"{kind}_{sm.response}[{j},{k}]"] = f"{kind}_{scope}"
        for k in range(1, q + 1):
            nodes[f"RinvD_{sm.response}[{k},{k}]"] = f"RinvD_{scope}"
        for g in range(1, n_groups + 1):
            for k in range(1, q + 1):
                nodes[f"b_{sm.response}[{g},{k}]"] = f"ranef_{scope}"
    return nodes


def node_groups(graph: ModelGraph) -> Dict[str, str]:
    """그래프 전체 노드 이름 → leaf 키"""
    nodes: Dict[str, str] = {}
    for sm in graph.submodels:
        nodes.update(submodel_nodes(sm, graph.n_groups))
    for var in graph.imputed:
        for unit in graph.missing_units(var):
            nodes[f"imp_{var}[{unit + 1}]"] = "imps"
    return nodes


def analysis_composites(graph: ModelGraph) -> Dict[str, List[str]]:
    """분석 모델 종류에 맞춘 복합 키워드 구성 (beta 회귀면 tau_main 포함)"""
    composites = {k: sorted(v) for k, v in DEFAULT_COMPOSITES.items()}
    if any(sm.family.family == "beta" for sm in graph.analysis_models):
        composites["analysis_main"] = sorted(set(composites["analysis_main"]) | {"tau_main"})
    return composites


# ===== 모델 목록 출력 =====

MODEL_TITLES = {
    "gaussian": "Linear model", "binomial": "Binomial model", "gamma": "Gamma model",
    "poisson": "Poisson model", "lognorm": "Log-normal model", "beta": "Beta model",
    "ordinal": "Cumulative logit model", "multinomial": "Multinomial logit model",
    "weibull": "Weibull survival model",
}


def describe_graph(graph: ModelGraph) -> List[Dict[str, object]]:
    """하위 모델별 요약 (반응변수, 종류, family/link, 예측 열, 랜덤효과, 절단, 축소)"""
    out = []
    for sm in graph.submodels:
        fam = sm.family
        out.append({
            "response": sm.response,
            "type": sm.model_type,
            "family": fam.family,
            "link": fam.link,
            "role": sm.role,
            "level": sm.level,
            "predictors": sm.coef_labels,
            "terms": sm.predictor_terms,
            "dynamic_terms": sm.plan.dynamic_terms if sm.plan else [],
            "random": [c.label for c in sm.random_columns],
            "group": sm.group,
            "trunc": list(sm.trunc) if sm.trunc else None,
            "shrinkage": sm.shrinkage,
            "categories": list(sm.categories),
            "reference": sm.categories[sm.ref_index] if sm.ref_index is not None and sm.categories else None,
        })
    return out


def render_graph_text(graph: ModelGraph) -> str:
    """list_models 형식의 텍스트"""
    blocks = []
    for entry in describe_graph(graph):
        title = MODEL_TITLES.get(entry["family"], "Model")
        if entry["random"]:
            title = f"{title} (mixed)"
        lines = [f'{title} for "{entry["response"]}" ',
                 f"   family: {entry['family']} ",
                 f"   link: {entry['link']} ",
                 "* Predictor variables:",
                 f"  {', '.join(entry['predictors'])} "]
        if entry["random"]:
            lines.append(f"* Random effects ({entry['group']}):")
            lines.append(f"  {', '.join(entry['random'])} ")
        if entry["trunc"]:
            lines.append(f"* Truncation: {entry['trunc']}")
        if entry["shrinkage"]:
            lines.append(f"* Shrinkage: {entry['shrinkage']}")
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"
