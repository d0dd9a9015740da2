"""
사후 처리 모듈

  - predict: 새 데이터에 대한 예측 (평균 대상, 랜덤효과 b = 0)
  - pred_df: 예측용 격자 데이터 생성
  - get_mi_dat: 저장된 대체값으로 다중대체 데이터셋(long 형식) 만들기
  - emit_plot_data: trace / density / mcse_ratio / imp_distr 그림 데이터 CSV (+ SVG)
"""

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import special, stats

from src.data_frame import LVLONE, Dataset, group_values, variable_codes
from src.diagnostics import MCSE_LIMIT, SubsetSpec, mc_error
from src.distributions import clm_probs, linkinv
from src.errors import ConfigError, DataError
from src.formula_parser import formula_variables, parse_formula
from src.model_graph import ModelGraph, SubModel
from src.samples import McmcSamples


PREDICT_TYPES = {
    "gaussian": ("link", "lp", "response"),
    "binomial": ("link", "lp", "response"),
    "poisson": ("link", "lp", "response"),
    "gamma": ("link", "lp", "response"),
    "lognorm": ("link", "lp", "response"),
    "beta": ("link", "lp", "response"),
    "weibull": ("link", "lp", "response"),
    "ordinal": ("link", "lp", "prob", "class"),
    "multinomial": ("prob", "class"),
}

GRID_LENGTH = 100
MINSPACE = 50
HIST_BINS = 30
KDE_POINTS = 512
PLOT_KINDS = ("trace", "density", "mcse_ratio", "imp_distr")


# ===== 예측 =====

@dataclass
class PredictionResult:
    """newdata + 예측 열, 예측 표 (fit, 하한, 상한), 예측 종류"""
    newdata: pd.DataFrame
    fit: pd.DataFrame
    type: str

    def to_csv(self, path):
        self.newdata.to_csv(path, index=False, lineterminator="\n")


def _as_dataset(data: Union[Dataset, pd.DataFrame]) -> Dataset:
    return data if isinstance(data, Dataset) else Dataset(data)


def _newdata_env(graph: ModelGraph, sm: SubModel, data: Dataset) -> Dict[str, np.ndarray]:
    """newdata 열 → 설계 계산용 값 (범주형은 모델의 범주 코드)"""
    env = {}
    for var in sorted(sm.deps):
        if var not in data:
            raise DataError(f"❌ newdata에 예측변수 '{var}' 열이 없습니다\n모델의 공변량을 모두 넣어주세요.")
        col = data.column(var)
        meta = graph.metas[var]
        if meta.is_categorical:
            unknown = {lab for lab in col.labels() if lab is not None} - set(meta.categories)
            if unknown:
                raise DataError(f"변수 '{var}'에 모델에 없는 범주가 있습니다: {sorted(unknown)}")
            env[var] = variable_codes(col, meta.categories)
        else:
            if not col.is_numeric:
                raise DataError(f"연속형 변수 '{var}'에 문자열 값이 있습니다")
            env[var] = col.values
    return env


def newdata_design(graph: ModelGraph, sm: SubModel, data: Union[Dataset, pd.DataFrame]) -> np.ndarray:
    """
    newdata의 데이터 척도 설계 행렬

    Raises:
        DataError: 열이 없거나 결측 공변량이 있는 행
    """
    data = _as_dataset(data)
    env = _newdata_env(graph, sm, data)
    categories = graph.categories
    n = data.n_rows
    X = np.column_stack([c.raw(env, categories, n) for c in sm.columns]) if sm.columns else np.zeros((n, 0))
    bad = np.flatnonzero(~np.all(np.isfinite(X), axis=1))
    if len(bad):
        raise DataError(
            f"❌ newdata의 {len(bad)}개 행에 결측이거나 정의되지 않는 공변량이 있습니다 "
            f"(첫 행: {bad[0] + 1})\n예측 전에 해당 행을 채우거나 제외하세요."
        )
    return X


def _coef_draws(samples: McmcSamples, sm: SubModel) -> np.ndarray:
    """(draws, 계수) 또는 multinomial이면 (draws, K-1, 계수)"""
    prefix = f"{sm.coef_kind}_{sm.response}"
    if sm.family.family == "multinomial":
        names = [f"{prefix}[{label},{cat}]" for cat in sm.nonref_categories for label in sm.coef_labels]
    else:
        names = [f"{prefix}[{label}]" for label in sm.coef_labels]
    missing = [n for n in names if n not in samples.nodes]
    if missing:
        raise ConfigError(f"❌ 예측에 필요한 계수가 모니터링되지 않았습니다: {missing[0]} 등\n"
                          f"monitor_params에서 analysis_main을 켜고 다시 fit 하세요.")
    draws = np.column_stack([samples.values(n).ravel() for n in names])
    if sm.family.family == "multinomial":
        return draws.reshape(len(draws), sm.n_categories - 1, len(sm.coef_labels))
    return draws


def _interval(draws: np.ndarray, quantiles: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    fit = draws.mean(axis=0)
    lo, hi = np.quantile(draws, quantiles, axis=0)
    return fit, lo, hi


def predict(samples: McmcSamples, graph: ModelGraph, newdata: Union[Dataset, pd.DataFrame],
            type: str = "lp", quantiles: Tuple[float, float] = (0.025, 0.975),
            subset: Optional[SubsetSpec] = None, outcome: Optional[str] = None) -> PredictionResult:
    """
    분석 모델 예측

    계수 표본마다 η를 계산하고 type에 따라 변환한 뒤 평균과 분위수를 구합니다.
    혼합모형은 b = 0 (평균 대상)으로 예측합니다.

    Args:
        type: link | lp | response | prob | class
        outcome: 분석 모델 반응변수 (None이면 첫 분석 모델)

    Raises:
        ConfigError: 지원하지 않는 type, 계수가 모니터링되지 않음
        DataError: newdata 열 누락, 결측 공변량
    """
    if subset is not None:
        samples = subset.apply(samples)
    sm = graph.submodel(outcome) if outcome else graph.analysis_models[0]
    fam = sm.family
    allowed = PREDICT_TYPES[fam.family]
    if type not in allowed:
        raise ConfigError(f"'{sm.model_type}' 모델에서 지원하지 않는 예측 종류 '{type}' (가능: {', '.join(allowed)})")
    frame = _as_dataset(newdata).frame
    X = newdata_design(graph, sm, newdata)
    coefs = _coef_draws(samples, sm)
    q_names = [f"{q * 100:g}%" for q in quantiles]

    if fam.family == "multinomial":
        eta = np.zeros((coefs.shape[0], X.shape[0], sm.n_categories))
        Xa = np.column_stack([np.ones(len(X)), X])
        nonref = [k for k in range(sm.n_categories) if k != sm.ref_index]
        eta[:, :, nonref] = np.einsum("ip,skp->sik", Xa, coefs)
        probs = special.softmax(eta, axis=2)
        return _categorical_result(frame, probs, sm, type, quantiles, q_names)

    eta = coefs @ X.T
    if fam.family == "ordinal":
        if type in ("link", "lp"):
            return _scalar_result(frame, eta, type, quantiles, q_names)
        gammas = np.column_stack([samples.values(f"gamma_{sm.response}[{k}]").ravel()
                                  for k in range(1, sm.n_categories)])
        probs = np.stack([clm_probs(eta[s], gammas[s]) for s in range(len(eta))])
        return _categorical_result(frame, probs, sm, type, quantiles, q_names)

    if type == "response":
        if fam.family in ("lognorm", "weibull"):
            values = np.exp(eta)
        elif fam.family == "beta":
            values = special.expit(eta)
        else:
            values = linkinv(eta, fam.link)
    else:
        values = eta
    return _scalar_result(frame, values, type, quantiles, q_names)


def _scalar_result(frame: pd.DataFrame, values: np.ndarray, type: str,
                   quantiles, q_names) -> PredictionResult:
    fit, lo, hi = _interval(values, quantiles)
    table = pd.DataFrame({"fit": fit, q_names[0]: lo, q_names[1]: hi})
    out = pd.concat([frame.reset_index(drop=True), table], axis=1)
    return PredictionResult(newdata=out, fit=table, type=type)


def _categorical_result(frame: pd.DataFrame, probs: np.ndarray, sm: SubModel, type: str,
                        quantiles, q_names) -> PredictionResult:
    """probs: (draws, rows, K)"""
    fit, lo, hi = _interval(probs, quantiles)
    if type == "class":
        # 동률이면 앞 범주
        table = pd.DataFrame({"fit": [sm.categories[k] for k in np.argmax(fit, axis=1)]})
    else:
        columns = {}
        for k, cat in enumerate(sm.categories):
            columns[f"{cat}:fit"] = fit[:, k]
            columns[f"{cat}:{q_names[0]}"] = lo[:, k]
            columns[f"{cat}:{q_names[1]}"] = hi[:, k]
        table = pd.DataFrame(columns)
    out = pd.concat([frame.reset_index(drop=True), table], axis=1)
    return PredictionResult(newdata=out, fit=table, type=type)


# ===== 예측 격자 =====

def pred_df(graph: ModelGraph, data: Union[Dataset, pd.DataFrame], vars: str,
            grid_length: int = GRID_LENGTH, overrides: Optional[Mapping[str, Sequence]] = None,
            outcome: Optional[str] = None) -> pd.DataFrame:
    """
    예측용 격자 데이터

    vars의 연속형 변수는 관측 범위를 grid_length 등간격으로, 범주형은 모든 범주로 펼치고
    나머지 연속형은 중앙값, 범주형은 기준 범주로 고정합니다. overrides는 값을 직접 지정합니다.
    결과는 모든 격자의 곱집합입니다.

    Args:
        vars: 한쪽 수식 (예: "~ age + gender")

    Raises:
        ConfigError: vars/overrides 변수가 모델에 없을 때
        DataError: vars 변수가 전부 결측일 때
    """
    data = _as_dataset(data)
    overrides = dict(overrides or {})
    if grid_length < 1:
        raise ConfigError("grid_length는 1 이상이어야 합니다")
    text = vars if vars.strip().startswith("~") else f"~ {vars}"
    grid_vars = formula_variables(parse_formula(text, one_sided=True))
    models = [graph.submodel(outcome)] if outcome else graph.analysis_models
    model_vars = list(dict.fromkeys(v for sm in models for c in sm.columns for v in sorted(c.deps)))
    for var in list(grid_vars) + list(overrides):
        if var not in graph.metas:
            raise ConfigError(f"pred_df 변수 '{var}'이(가) 모델에 없습니다")
    columns = list(dict.fromkeys(model_vars + grid_vars + list(overrides)))

    axes: Dict[str, list] = {}
    for var in columns:
        meta = graph.metas[var]
        col = data.column(var)
        observed = ~col.missing
        if var in overrides:
            values = overrides[var]
            axes[var] = list(values) if isinstance(values, (list, tuple, np.ndarray)) else [values]
        elif var in grid_vars:
            if not observed.any():
                raise DataError(f"변수 '{var}'의 값이 모두 결측입니다")
            if meta.is_categorical:
                axes[var] = list(meta.categories)
            else:
                lo, hi = float(np.min(col.values[observed])), float(np.max(col.values[observed]))
                axes[var] = [lo] if lo == hi else list(np.linspace(lo, hi, grid_length))
        elif meta.is_categorical:
            axes[var] = [meta.ref_cat]
        else:
            axes[var] = [float(np.median(col.values[observed]))] if observed.any() else [np.nan]

    rows = list(itertools.product(*(axes[v] for v in columns)))
    frame = pd.DataFrame(rows, columns=columns)
    for var in columns:
        meta = graph.metas[var]
        if meta.is_categorical:
            frame[var] = pd.Categorical(frame[var].astype(str), categories=list(meta.categories))
        else:
            frame[var] = frame[var].astype(float)
    return frame


# ===== 다중대체 데이터 =====

@dataclass
class ImputedStack:
    """원자료(Imputation_=0) + 대체 완료 사본들의 long 표"""
    frame: pd.DataFrame
    picks: List[Tuple[int, int]] = field(default_factory=list)

    def to_csv(self, path):
        self.frame.to_csv(path, index=False, lineterminator="\n")


def _imputation_nodes(samples: McmcSamples, graph: ModelGraph) -> Dict[str, Tuple[np.ndarray, List[int]]]:
    """변수 → (결측 단위, 노드 열 인덱스)"""
    out = {}
    for var in graph.imputed:
        units = graph.missing_units(var)
        names = [f"imp_{var}[{u + 1}]" for u in units]
        missing = [n for n in names if n not in samples.nodes]
        if missing:
            raise ConfigError(f"❌ 대체값이 모니터링되지 않았습니다: {missing[0]} 등\n"
                              f"monitor_params에 \"imps\": true를 넣고 다시 fit 하세요.")
        out[var] = (units, [samples.node_index(n) for n in names])
    return out


def _max_spaced(iterations: np.ndarray, minspace: int) -> int:
    """minspace 간격으로 고를 수 있는 최대 개수 (왼쪽부터 탐욕적으로)"""
    count, last = 0, None
    for it in iterations:
        if last is None or it - last >= minspace:
            count += 1
            last = it
    return count


def select_iterations(samples: McmcSamples, m: int, start: Optional[int] = None,
                      minspace: int = MINSPACE, seed: Optional[int] = None,
                      max_attempts: int = 100) -> List[Tuple[int, int]]:
    """
    (체인, 반복) m개 선택

    체인은 매번 균등하게 고르고, 반복은 start 이후이면서 이미 고른 반복들과
    minspace 이상 떨어진 후보 중에서 균등하게 고릅니다 (체인과 무관하게 간격 적용).
    후보가 바닥나면 처음부터 다시 뽑습니다.

    Raises:
        ConfigError: 조건을 만족하는 선택이 불가능할 때
    """
    if m < 0:
        raise ConfigError("m은 0 이상이어야 합니다")
    if m == 0:
        return []
    eligible = samples.iterations[samples.iterations >= start] if start is not None else samples.iterations
    if _max_spaced(eligible, max(minspace, 1)) < m or samples.n_chains < 1:
        raise ConfigError(
            f"❌ {m}개의 반복을 {minspace} 간격으로 고를 수 없습니다 "
            f"(start 이후 저장 반복 {len(eligible)}개)\n"
            f"n_iter를 늘리거나 minspace/start를 줄이세요."
        )
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        picks: List[Tuple[int, int]] = []
        for _ in range(m):
            chosen = np.array([it for _, it in picks], dtype=int)
            candidates = eligible if not len(chosen) else \
                eligible[np.all(np.abs(eligible[:, None] - chosen[None, :]) >= minspace, axis=1)]
            if not len(candidates):
                break
            chain = int(rng.integers(samples.n_chains)) + 1
            picks.append((chain, int(rng.choice(candidates))))
        if len(picks) == m:
            return picks
    raise ConfigError(f"{max_attempts}번 시도했지만 minspace={minspace} 조건의 선택에 실패했습니다")


def _fill_column(frame: pd.DataFrame, var: str, rows: np.ndarray, values: np.ndarray,
                 categories: Optional[Sequence[str]]):
    if categories is None:
        frame.loc[rows, var] = values
        return
    labels = [categories[int(round(v)) - 1] for v in values]
    if isinstance(frame[var].dtype, pd.CategoricalDtype):
        frame.loc[rows, var] = labels
    else:
        frame.loc[rows, var] = [float(lab) for lab in labels]


def get_mi_dat(samples: McmcSamples, graph: ModelGraph, data: Union[Dataset, pd.DataFrame], m: int = 10,
               include: bool = True, start: Optional[int] = None, minspace: int = MINSPACE,
               seed: Optional[int] = None, log_callback=None) -> ImputedStack:
    """
    다중대체 데이터셋 (long 형식)

    선택한 (체인, 반복)의 대체값으로 결측 칸만 채운 사본 m개를 쌓습니다.
    level-2 변수는 그룹의 모든 행에 같은 값을 넣습니다.
    열: Imputation_, 원자료 열, .id, .rownr

    Raises:
        ConfigError: 대체값이 모니터링되지 않았거나 선택이 불가능할 때
    """
    def log(level, message):
        if log_callback:
            log_callback(level, message)

    data = _as_dataset(data)
    original = data.frame.reset_index(drop=True)
    nodes = _imputation_nodes(samples, graph)
    picks = select_iterations(samples, m, start=start, minspace=minspace, seed=seed)

    n = len(original)
    ids = (np.array(graph.group_labels, dtype=object)[graph.group_ids]
           if graph.group_var is not None else np.arange(1, n + 1))
    copies = []
    if include:
        copies.append(original.copy().assign(Imputation_=0))
    for k, (chain, iteration) in enumerate(picks, start=1):
        copy = original.copy()
        row = int(np.flatnonzero(samples.iterations == iteration)[0])
        for var, (units, cols) in nodes.items():
            values = samples.chains[chain - 1][row, cols]
            meta = graph.metas[var]
            if meta.level == LVLONE:
                rows, fill = units, values
            else:
                per_group = np.full(graph.n_groups, np.nan)
                per_group[units] = values
                rows = np.flatnonzero(data.column(var).missing & np.isin(graph.group_ids, units))
                fill = per_group[graph.group_ids[rows]]
            _fill_column(copy, var, rows, fill, meta.categories if meta.is_categorical else None)
        copies.append(copy.assign(Imputation_=k))
        log("DEBUG", f"대체 {k}: chain {chain}, iteration {iteration}")

    if copies:
        stacked = pd.concat(copies, ignore_index=True)
        n_copies = len(copies)
        stacked[".id"] = np.tile(ids, n_copies)
        stacked[".rownr"] = np.tile(np.arange(1, n + 1), n_copies)
    else:
        stacked = pd.DataFrame(columns=list(original.columns) + ["Imputation_", ".id", ".rownr"])
    stacked = stacked[["Imputation_"] + [c for c in stacked.columns if c != "Imputation_"]]
    log("INFO", f"다중대체 데이터: 사본 {len(picks)}개 (원자료 포함: {include})")
    return ImputedStack(frame=stacked, picks=picks)


# ===== 그림 데이터 =====

def trace_data(samples: McmcSamples) -> pd.DataFrame:
    """(chain, iteration, node, value) long 표"""
    parts = []
    for c in range(1, samples.n_chains + 1):
        wide = samples.chain_frame(c)
        long = wide.melt(id_vars="iteration", var_name="node", value_name="value")
        long.insert(0, "chain", c)
        parts.append(long)
    if not parts:
        return pd.DataFrame(columns=["chain", "iteration", "node", "value"])
    return pd.concat(parts, ignore_index=True)[["chain", "iteration", "node", "value"]]


def density_data(samples: McmcSamples, points: int = KDE_POINTS, log_callback=None) -> pd.DataFrame:
    """노드/체인별 가우스 커널 밀도 (Silverman 대역폭, points개 격자, 양 끝 4 대역폭 확장)"""
    rows = []
    for node in samples.nodes:
        draws = samples.values(node)
        for c in range(samples.n_chains):
            x = draws[c]
            if len(x) < 2 or not np.ptp(x) > 0:
                if log_callback:
                    log_callback("WARNING", f"{node} (chain {c + 1}): 값이 일정하여 밀도를 계산하지 않습니다")
                continue
            kde = stats.gaussian_kde(x, bw_method="silverman")
            bw = float(np.sqrt(kde.covariance[0, 0]))
            grid = np.linspace(x.min() - 4 * bw, x.max() + 4 * bw, points)
            rows.append(pd.DataFrame({"node": node, "chain": c + 1, "x": grid, "density": kde(grid)}))
    if not rows:
        return pd.DataFrame(columns=["node", "chain", "x", "density"])
    return pd.concat(rows, ignore_index=True)


def mcse_ratio_data(samples: McmcSamples) -> pd.DataFrame:
    table = mc_error(samples).reset_index()
    return pd.DataFrame({"node": table["node"], "ratio": table["ratio"],
                         "reference": MCSE_LIMIT, "flag": table["flag"]})


def imp_distr_data(stack: ImputedStack, graph: ModelGraph, data: Union[Dataset, pd.DataFrame],
                   variables: Optional[Sequence[str]] = None, bins: int = HIST_BINS) -> pd.DataFrame:
    """
    관측값과 대체별 대체값의 분포

    연속형: 관측값과 모든 대체값을 합친 범위의 공통 구간(bins개) 히스토그램 밀도
    범주형: 범주별 상대빈도
    결측이 없는 변수는 observed 계열만 나옵니다.
    """
    data = _as_dataset(data)
    variables = list(variables) if variables is not None else list(graph.imputed)
    frame = stack.frame
    rows = []
    for var in variables:
        if var not in graph.metas:
            raise ConfigError(f"변수 '{var}'이(가) 모델에 없습니다")
        meta = graph.metas[var]
        col = data.column(var)
        if meta.is_categorical:
            base = variable_codes(col, meta.categories)
        else:
            base = col.values
        missing = np.isnan(base)
        if meta.level != LVLONE:
            base = group_values(base, graph.group_ids, graph.n_groups)
        series = {"observed": base[~np.isnan(base)]}
        if missing.any():
            index = {lab: i for i, lab in enumerate(meta.categories)}
            for k in sorted(set(frame["Imputation_"]) - {0}):
                copy = frame.loc[frame["Imputation_"] == k, var].reset_index(drop=True)
                if meta.is_categorical:
                    values = np.array([index[format_label(v)] for v in copy[missing]], dtype=float)
                else:
                    values = copy[missing].to_numpy(dtype=float)
                if meta.level != LVLONE:
                    values = _group_first(values, graph.group_ids[missing])
                series[f"imputation_{k}"] = values
        if meta.is_categorical:
            for name, values in series.items():
                counts = np.bincount(values.astype(int), minlength=meta.n_categories)
                total = counts.sum()
                for j, cat in enumerate(meta.categories):
                    rows.append({"variable": var, "series": name, "category": cat,
                                 "bin_lo": np.nan, "bin_hi": np.nan, "count": int(counts[j]),
                                 "value": counts[j] / total if total else np.nan})
        else:
            pooled = np.concatenate(list(series.values()))
            edges = np.histogram_bin_edges(pooled, bins=bins)
            widths = np.diff(edges)
            for name, values in series.items():
                counts, _ = np.histogram(values, bins=edges)
                dens = counts / (counts.sum() * widths) if counts.sum() else np.full(len(counts), np.nan)
                for j in range(len(counts)):
                    rows.append({"variable": var, "series": name, "category": None,
                                 "bin_lo": edges[j], "bin_hi": edges[j + 1], "count": int(counts[j]),
                                 "value": dens[j]})
    return pd.DataFrame(rows, columns=["variable", "series", "category", "bin_lo", "bin_hi", "count", "value"])


def format_label(value) -> str:
    """대체 사본의 범주 값 → 라벨 (수치 범주는 정수면 소수점 없이)"""
    if isinstance(value, (float, np.floating)) and float(value).is_integer():
        return str(int(value))
    return str(value)


def _group_first(values: np.ndarray, groups: np.ndarray) -> np.ndarray:
    _, first = np.unique(groups, return_index=True)
    return values[np.sort(first)]


def _write_artifact(table: pd.DataFrame, out_dir: Path, kind: str, header: Mapping[str, object]) -> List[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{kind}.csv"
    table.to_csv(csv_path, index=False, float_format="%.10g", lineterminator="\n")
    json_path = out_dir / f"{kind}.json"
    with open(json_path, "w", encoding="utf-8") as f:
        f.write(json.dumps(dict(header, kind=kind, columns=list(table.columns), n_rows=len(table)),
                           ensure_ascii=False, sort_keys=True))
        f.write("\n")
    return [csv_path, json_path]


def render_svg(table: pd.DataFrame, kind: str, path: Path):
    """그림 데이터를 SVG로 저장 (matplotlib Agg)"""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ConfigError("SVG 출력에는 matplotlib가 필요합니다 (pip install matplotlib)")

    fig, ax = plt.subplots(figsize=(7, 4))
    if kind == "trace":
        for (node, chain), part in table.groupby(["node", "chain"], sort=False):
            ax.plot(part["iteration"], part["value"], lw=0.6, label=f"{node} ({chain})")
        ax.set_xlabel("iteration")
    elif kind == "density":
        for (node, chain), part in table.groupby(["node", "chain"], sort=False):
            ax.plot(part["x"], part["density"], lw=0.8, label=f"{node} ({chain})")
    elif kind == "mcse_ratio":
        ax.barh(table["node"].astype(str), table["ratio"])
        ax.axvline(MCSE_LIMIT, color="red", ls="--")
        ax.set_xlabel("MCSE / SD")
    else:
        continuous = table[table["category"].isna()]
        for (var, name), part in continuous.groupby(["variable", "series"], sort=False):
            centers = (part["bin_lo"] + part["bin_hi"]) / 2
            ax.step(centers, part["value"], where="mid", label=f"{var}: {name}")
    if kind != "mcse_ratio" and len(table):
        handles, _ = ax.get_legend_handles_labels()
        if len(handles) <= 12:
            ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_plot_data(samples: McmcSamples, kind: str, out_dir: Union[str, Path],
                   subset: Optional[SubsetSpec] = None, svg: bool = False,
                   graph: Optional[ModelGraph] = None, data=None, stack: Optional[ImputedStack] = None,
                   variables: Optional[Sequence[str]] = None, log_callback=None) -> List[Path]:
    """
    그림 데이터 CSV + JSON 헤더 (+ SVG) 쓰기

    Args:
        kind: trace | density | mcse_ratio | imp_distr
        graph, data, stack: imp_distr에 필요

    Returns:
        쓴 파일 경로

    Raises:
        ConfigError: 알 수 없는 kind, imp_distr 입력 누락
        DataError: 알 수 없는 노드
    """
    if kind not in PLOT_KINDS:
        raise ConfigError(f"알 수 없는 그림 종류 '{kind}' (가능: {', '.join(PLOT_KINDS)})")
    out_dir = Path(out_dir)
    if subset is not None:
        samples = subset.apply(samples)
    header: Dict[str, object] = {"chains": samples.n_chains, "start": samples.start, "end": samples.end}
    if kind == "trace":
        table = trace_data(samples)
    elif kind == "density":
        table = density_data(samples, log_callback=log_callback)
        header["kernel"] = "gaussian"
        header["bandwidth"] = "silverman"
        header["points"] = KDE_POINTS
    elif kind == "mcse_ratio":
        table = mcse_ratio_data(samples)
        header["reference"] = MCSE_LIMIT
    else:
        if graph is None or data is None or stack is None:
            raise ConfigError("imp_distr에는 모델 그래프, 데이터, 대체 데이터가 필요합니다")
        table = imp_distr_data(stack, graph, data, variables)
        header["bins"] = HIST_BINS
        header["picks"] = [list(p) for p in stack.picks]
    written = _write_artifact(table, out_dir, kind, header)
    if svg:
        path = out_dir / f"{kind}.svg"
        render_svg(table, kind, path)
        written.append(path)
    if log_callback:
        log_callback("SUCCESS", f"그림 데이터 저장: {written[0]} ({len(table)}행)")
    return written
