"""
데이터셋 / 변수 메타정보 모듈

변수 타입과 계층 수준 판별, 결측 패턴, 대비(contrast) 코딩,
척도화 통계를 제공합니다.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import ConfigError, DataError


LVLONE = "lvlone"

VTYPES = ("continuous", "binary", "unordered", "ordered")


def format_value(value: float) -> str:
    """수치 값을 범주 라벨로 변환 (정수면 소수점 없이)"""
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class Column:
    """데이터셋의 열 하나 (읽기 전용 뷰)"""
    name: str
    values: np.ndarray                     # 수치: float, 범주형: 코드(float, 결측 nan)
    categories: Optional[Tuple[str, ...]] = None
    ordered: bool = False

    @property
    def is_numeric(self) -> bool:
        return self.categories is None

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def labels(self) -> np.ndarray:
        """라벨 배열 (결측은 None)"""
        out = np.empty(len(self.values), dtype=object)
        for i, v in enumerate(self.values):
            if np.isnan(v):
                out[i] = None
            elif self.categories is None:
                out[i] = format_value(v)
            else:
                out[i] = self.categories[int(v)]
        return out


class Dataset:
    """
    불변 데이터셋

    pandas.DataFrame을 감싸며, 수치 열은 float64(결측 NaN),
    범주형 열은 pandas Categorical(범주 순서 = 파일 첫 등장 순서)로 보관합니다.
    """

    def __init__(self, frame: pd.DataFrame, grouping: Optional[str] = None):
        if len(set(frame.columns)) != len(frame.columns):
            raise DataError("중복된 열 이름이 있습니다")
        self._frame = frame.copy()
        self.grouping = None
        self.group_ids: Optional[np.ndarray] = None
        self.group_labels: Tuple[str, ...] = ()
        if grouping is not None:
            self._set_grouping(grouping)

    @classmethod
    def from_records(cls, data: Mapping[str, Sequence], grouping: Optional[str] = None) -> "Dataset":
        """
        dict(열 이름 → 값 목록)으로 데이터셋 생성 (None / nan은 결측)

        문자열이 섞인 열은 범주형, 나머지는 수치형으로 저장합니다.
        """
        columns = {}
        for name, values in data.items():
            values = list(values)
            is_text = any(isinstance(v, str) for v in values if v is not None)
            if is_text:
                labels = [None if v is None or (isinstance(v, float) and np.isnan(v)) else str(v)
                          for v in values]
                categories = list(dict.fromkeys(v for v in labels if v is not None))
                columns[name] = pd.Categorical(labels, categories=categories)
            else:
                columns[name] = pd.array([np.nan if v is None else float(v) for v in values],
                                         dtype="float64")
        return cls(pd.DataFrame(columns), grouping=grouping)

    def _set_grouping(self, group_var: str):
        if group_var not in self._frame.columns:
            raise DataError(f"그룹 변수 '{group_var}'이(가) 데이터에 없습니다")
        col = self.column(group_var)
        if col.missing.any():
            raise DataError(f"그룹 변수 '{group_var}'에 결측값이 있습니다")
        labels = col.labels()
        uniques = list(dict.fromkeys(labels))
        index = {lab: i for i, lab in enumerate(uniques)}
        self.grouping = group_var
        self.group_ids = np.array([index[lab] for lab in labels], dtype=int)
        self.group_labels = tuple(uniques)

    def with_grouping(self, group_var: Optional[str]) -> "Dataset":
        """그룹 변수를 지정한 새 데이터셋"""
        return Dataset(self._frame, grouping=group_var)

    @property
    def frame(self) -> pd.DataFrame:
        return self._frame.copy()

    @property
    def columns(self) -> List[str]:
        return list(self._frame.columns)

    @property
    def n_rows(self) -> int:
        return len(self._frame)

    @property
    def n_groups(self) -> int:
        return len(self.group_labels)

    def __contains__(self, name: str) -> bool:
        return name in self._frame.columns

    def column(self, name: str) -> Column:
        if name not in self._frame.columns:
            raise DataError(f"변수 '{name}'이(가) 데이터에 없습니다")
        series = self._frame[name]
        if isinstance(series.dtype, pd.CategoricalDtype):
            codes = series.cat.codes.to_numpy().astype(float)
            codes[codes < 0] = np.nan
            return Column(name, codes, tuple(str(c) for c in series.cat.categories),
                          bool(series.cat.ordered))
        return Column(name, series.to_numpy(dtype=float, na_value=np.nan))


# ===== 변수 메타정보 =====

@dataclass(frozen=True)
class VariableMeta:
    """변수별 타입, 계층 수준, 결측 수, 기준 범주, 척도화 통계"""
    name: str
    vtype: str
    level: str = LVLONE
    n_missing: int = 0
    n_units: int = 0
    categories: Tuple[str, ...] = ()
    ref_cat: Optional[str] = None
    scale_mean: Optional[float] = None
    scale_sd: Optional[float] = None

    @property
    def is_categorical(self) -> bool:
        return self.vtype != "continuous"

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def is_complete(self) -> bool:
        return self.n_missing == 0

    @property
    def ref_index(self) -> Optional[int]:
        if self.ref_cat is None:
            return None
        return self.categories.index(self.ref_cat)

    def describe(self) -> str:
        if self.vtype == "continuous":
            return "continuous"
        return f"{self.vtype}({self.n_categories})"


def group_constant(values: np.ndarray, group_ids: np.ndarray) -> bool:
    """그룹마다 관측값이 하나뿐인지 확인"""
    observed = ~np.isnan(values)
    if not observed.any():
        return True
    frame = pd.DataFrame({"g": group_ids[observed], "v": values[observed]})
    return bool((frame.groupby("g")["v"].nunique() <= 1).all())


def group_values(values: np.ndarray, group_ids: np.ndarray, n_groups: int) -> np.ndarray:
    """그룹 상수 변수를 그룹당 값 하나로 축약 (관측값 없으면 nan)"""
    out = np.full(n_groups, np.nan)
    observed = ~np.isnan(values)
    out[group_ids[observed]] = values[observed]
    return out


def _numeric_categories(values: np.ndarray) -> Tuple[str, ...]:
    observed = np.unique(values[~np.isnan(values)])
    return tuple(format_value(v) for v in observed)


def infer_variable_meta(ds: Dataset, grouping: Optional[str] = None,
                        overrides: Optional[Mapping[str, Mapping]] = None,
                        log_callback=None) -> List[VariableMeta]:
    """
    변수 타입/수준/결측 수 판별

    Args:
        ds: 데이터셋
        grouping: 그룹 변수 (None이면 ds.grouping 사용)
        overrides: 변수별 재정의 {"var": {"type": ..., "levels": [...], "level": ..., "refcat": ...}}
        log_callback: 로그 콜백 (level, message)

    Returns:
        VariableMeta 리스트 (데이터 열 순서, 그룹 변수 제외)

    Raises:
        DataError: 그룹 상수가 아닌 변수를 level-2로 선언한 경우 등
    """
    overrides = dict(overrides or {})
    grouping = grouping if grouping is not None else ds.grouping
    if grouping is not None and ds.grouping != grouping:
        ds = ds.with_grouping(grouping)

    unknown = [name for name in overrides if name not in ds]
    if unknown:
        raise ConfigError(f"타입 재정의 대상 변수가 데이터에 없습니다: {unknown}")

    metas = []
    for name in ds.columns:
        if name == grouping:
            continue
        col = ds.column(name)
        override = dict(overrides.get(name, {}))
        vtype, categories = _infer_type(col, override)

        codes = variable_codes(col, categories) if vtype != "continuous" else col.values

        level = LVLONE
        is_constant = grouping is not None and group_constant(codes, ds.group_ids)
        declared_level = override.get("level")
        if declared_level is not None and declared_level != LVLONE:
            if declared_level != grouping:
                raise DataError(f"변수 '{name}'의 수준 '{declared_level}'은(는) 그룹 변수가 아닙니다")
            if not is_constant:
                raise DataError(
                    f"❌ 변수 '{name}'을(를) level-2('{grouping}')로 선언했지만\n"
                    f"그룹 안에서 값이 달라집니다. 데이터를 확인하세요."
                )
            level = grouping
        elif declared_level is None and is_constant:
            level = grouping

        if level == LVLONE:
            n_units = ds.n_rows
            n_missing = int(np.isnan(codes).sum())
        else:
            per_group = group_values(codes, ds.group_ids, ds.n_groups)
            n_units = ds.n_groups
            n_missing = int(np.isnan(per_group).sum())

        ref_cat = None
        if vtype != "continuous" and categories:
            ref_cat = resolve_refcat(override.get("refcat", "first"), categories, codes)

        scale_mean = scale_sd = None
        if vtype == "continuous":
            unit_values = codes if level == LVLONE else group_values(codes, ds.group_ids, ds.n_groups)
            observed = unit_values[~np.isnan(unit_values)]
            if len(np.unique(observed)) >= 2:
                scale_mean, scale_sd = scaling_stats(unit_values)

        metas.append(VariableMeta(name=name, vtype=vtype, level=level, n_missing=n_missing,
                                  n_units=n_units, categories=tuple(categories), ref_cat=ref_cat,
                                  scale_mean=scale_mean, scale_sd=scale_sd))
        if log_callback:
            log_callback("DEBUG", f"변수 {name}: {metas[-1].describe()}, level={level}, 결측={n_missing}")
    return metas


def _infer_type(col: Column, override: Mapping) -> Tuple[str, Tuple[str, ...]]:
    declared = override.get("type")
    if declared is not None and declared not in VTYPES:
        raise ConfigError(f"변수 '{col.name}'의 타입 '{declared}'을(를) 알 수 없습니다 (가능: {VTYPES})")

    if col.is_numeric:
        categories = _numeric_categories(col.values)
    else:
        categories = col.categories

    if "levels" in override:
        levels = tuple(str(v) for v in override["levels"])
        present = set(col.labels()) - {None}
        missing_levels = present - set(levels)
        if missing_levels:
            raise DataError(f"변수 '{col.name}'의 levels에 없는 값이 있습니다: {sorted(missing_levels)}")
        categories = levels

    if declared == "continuous":
        if not col.is_numeric:
            raise DataError(f"범주형 변수 '{col.name}'을(를) 연속형으로 선언할 수 없습니다")
        return "continuous", ()
    if declared in ("binary", "unordered", "ordered"):
        if declared == "binary" and len(categories) > 2:
            raise DataError(f"변수 '{col.name}'은(는) 범주가 {len(categories)}개라 binary가 될 수 없습니다")
        return declared, tuple(categories)

    if col.is_numeric:
        if len(categories) == 2:
            return "binary", tuple(categories)
        return "continuous", ()
    if len(categories) == 2:
        return "binary", tuple(categories)
    return ("ordered" if col.ordered else "unordered"), tuple(categories)


def variable_codes(col: Column, categories: Sequence[str]) -> np.ndarray:
    """열 값을 주어진 범주 순서의 코드(0..K-1, 결측 nan)로 변환"""
    index = {lab: i for i, lab in enumerate(categories)}
    labels = col.labels()
    out = np.full(len(labels), np.nan)
    for i, lab in enumerate(labels):
        if lab is not None:
            out[i] = index[lab]
    return out


def meta_by_name(metas: Sequence[VariableMeta]) -> Dict[str, VariableMeta]:
    return {m.name: m for m in metas}


# ===== 결측 패턴 =====

@dataclass
class MdPattern:
    """결측 패턴 (1=관측, 0=결측)"""
    columns: List[str]
    patterns: np.ndarray
    counts: np.ndarray
    missing_per_variable: Dict[str, int]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.patterns, columns=self.columns)
        frame["count"] = self.counts
        return frame

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


def md_pattern(ds: Dataset, columns: Optional[Sequence[str]] = None) -> MdPattern:
    """
    결측 패턴 표 생성

    열은 총 결측 수 오름차순(동률은 데이터 열 순서),
    행은 빈도 내림차순(동률은 패턴 비트열 사전순)으로 정렬합니다.

    Args:
        ds: 데이터셋
        columns: 대상 열 (None이면 전체)

    Returns:
        MdPattern
    """
    columns = list(columns) if columns is not None else ds.columns
    if not columns:
        raise DataError("결측 패턴을 계산할 열이 없습니다")
    observed = np.column_stack([~ds.column(c).missing for c in columns]).astype(int)
    n_missing = (1 - observed).sum(axis=0)
    col_order = sorted(range(len(columns)), key=lambda j: (n_missing[j], j))
    observed = observed[:, col_order]
    ordered_cols = [columns[j] for j in col_order]

    counts: Dict[str, int] = {}
    for row in observed:
        key = "".join(str(v) for v in row)
        counts[key] = counts.get(key, 0) + 1
    keys = sorted(counts, key=lambda k: (-counts[k], k))

    patterns = np.array([[int(ch) for ch in k] for k in keys], dtype=int).reshape(len(keys), len(ordered_cols))
    return MdPattern(
        columns=ordered_cols,
        patterns=patterns,
        counts=np.array([counts[k] for k in keys], dtype=int),
        missing_per_variable={c: int(n_missing[j]) for j, c in zip(col_order, ordered_cols)},
    )


def get_missinfo(ds: Dataset, metas: Sequence[VariableMeta]) -> Dict[str, Dict]:
    """
    수준별 결측 정보 (완전 사례 수/비율, 변수별 # NA / % NA)

    Returns:
        {level: {"complete_cases": n, "complete_pct": p, "n_units": N,
                 "variables": {name: {"n_na": k, "pct_na": q}}}}
    """
    info: Dict[str, Dict] = {}
    by_level: Dict[str, List[VariableMeta]] = {}
    for meta in metas:
        by_level.setdefault(meta.level, []).append(meta)
    for level, level_metas in by_level.items():
        if level == LVLONE:
            masks = [ds.column(m.name).missing for m in level_metas]
            n_units = ds.n_rows
        else:
            masks = [np.isnan(group_values(ds.column(m.name).values, ds.group_ids, ds.n_groups))
                     for m in level_metas]
            n_units = ds.n_groups
        any_missing = np.any(np.column_stack(masks), axis=1) if masks else np.zeros(n_units, bool)
        complete = int((~any_missing).sum())
        info[level] = {
            "n_units": n_units,
            "complete_cases": complete,
            "complete_pct": 100.0 * complete / n_units if n_units else 0.0,
            "variables": {
                m.name: {"n_na": m.n_missing, "pct_na": 100.0 * m.n_missing / n_units if n_units else 0.0}
                for m in sorted(level_metas, key=lambda m: m.n_missing)
            },
        }
    return info


# ===== 척도화 =====

def scaling_stats(values: np.ndarray) -> Tuple[float, float]:
    """
    관측값의 평균과 표준편차

    Raises:
        DataError: 관측값이 2개 미만이거나 표준편차가 0일 때
    """
    values = np.asarray(values, dtype=float)
    observed = values[~np.isnan(values)]
    if len(observed) < 2:
        raise DataError("척도화에는 관측값이 2개 이상 필요합니다")
    sd = float(np.std(observed, ddof=1))
    if not sd > 0:
        raise DataError("표준편차가 0인 변수는 척도화할 수 없습니다 (zero sd)")
    return float(np.mean(observed)), sd


def apply_scaling(values: np.ndarray, stats: Tuple[float, float]) -> np.ndarray:
    mean, sd = stats
    return (np.asarray(values, dtype=float) - mean) / sd


def unscale(values: np.ndarray, stats: Tuple[float, float]) -> np.ndarray:
    mean, sd = stats
    return np.asarray(values, dtype=float) * sd + mean


# ===== 기준 범주 / 대비 코딩 =====

def resolve_refcat(spec: Union[str, int, None], categories: Sequence[str],
                   codes: Optional[np.ndarray] = None) -> str:
    """
    기준 범주 결정

    Args:
        spec: "first" | "last" | "largest" | 범주 라벨 | 1부터 시작하는 인덱스
        categories: 범주 순서
        codes: 관측 코드 ("largest" 계산용)

    Returns:
        기준 범주 라벨 ("largest" 동률이면 범주 순서가 앞선 쪽)

    Raises:
        ConfigError: 알 수 없는 라벨, 범위를 벗어난 인덱스
    """
    categories = list(categories)
    if not categories:
        raise ConfigError("범주가 없는 변수에는 기준 범주를 정할 수 없습니다")
    if spec is None or spec == "first":
        return categories[0]
    if spec == "last":
        return categories[-1]
    if spec == "largest":
        if codes is None:
            raise ConfigError("'largest' 기준 범주에는 관측값이 필요합니다")
        observed = np.asarray(codes, dtype=float)
        observed = observed[~np.isnan(observed)].astype(int)
        counts = np.bincount(observed, minlength=len(categories))
        return categories[int(np.argmax(counts))]
    if isinstance(spec, (int, np.integer)) and not isinstance(spec, bool):
        if not 1 <= spec <= len(categories):
            raise ConfigError(f"기준 범주 인덱스 {spec}이(가) 범위(1..{len(categories)})를 벗어났습니다")
        return categories[int(spec) - 1]
    if str(spec) in categories:
        return str(spec)
    raise ConfigError(f"기준 범주 '{spec}'을(를) 찾을 수 없습니다 (범주: {categories})")


CONTRASTS = ("dummy", "effect")


def contrast_matrix(n_categories: int, ref_index: int, coding: str = "dummy") -> np.ndarray:
    """K x (K-1) 대비 행렬 (범주 코드 → 설계 열)"""
    if coding not in CONTRASTS:
        raise ConfigError(f"대비 코딩 '{coding}'은(는) 지원하지 않습니다 (dummy/effect만 가능)")
    keep = [k for k in range(n_categories) if k != ref_index]
    matrix = np.zeros((n_categories, len(keep)))
    for j, k in enumerate(keep):
        matrix[k, j] = 1.0
    if coding == "effect":
        matrix[ref_index, :] = -1.0
    return matrix


def contrast_names(name: str, categories: Sequence[str], ref_cat: str) -> List[str]:
    return [f"{name}{c}" for c in categories if c != ref_cat]


def encode_contrasts(codes: np.ndarray, categories: Sequence[str], ref_cat: str,
                     coding: str = "dummy", name: str = "") -> Tuple[np.ndarray, List[str]]:
    """
    범주형 변수의 K-1개 설계 열

    Args:
        codes: 범주 코드 (결측 nan → 해당 행은 nan, 샘플러가 매 반복 채움)
        categories: 범주 순서
        ref_cat: 기준 범주
        coding: "dummy" 또는 "effect"
        name: 변수 이름 (열 이름 접두어)

    Returns:
        (설계 행렬, 열 이름 "<var><category>")
    """
    categories = list(categories)
    if ref_cat not in categories:
        raise ConfigError(f"기준 범주 '{ref_cat}'이(가) 범주 목록에 없습니다")
    matrix = contrast_matrix(len(categories), categories.index(ref_cat), coding)
    codes = np.asarray(codes, dtype=float)
    out = np.full((len(codes), matrix.shape[1]), np.nan)
    observed = ~np.isnan(codes)
    out[observed] = matrix[codes[observed].astype(int)]
    return out, contrast_names(name, categories, ref_cat)
