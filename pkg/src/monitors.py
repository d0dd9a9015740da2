"""
모니터 키워드 처리

노드 그룹(leaf) 키워드와 복합 키워드(analysis_main, analysis_random, other_models)를
노드 이름 목록으로 변환합니다. 복합 키워드를 먼저 적용하고 leaf 키워드로 덮어씁니다.
"""

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set

from src.errors import ConfigError


LEAF_KEYS = (
    "betas", "tau_main", "sigma_main", "gamma_main", "delta_main", "shape_main",
    "D_main", "ranef_main", "invD_main", "RinvD_main",
    "alphas", "tau_other", "sigma_other", "gamma_other", "delta_other", "shape_other",
    "imps", "ranef_other", "D_other", "invD_other", "RinvD_other",
)

COMPOSITE_KEYS = ("analysis_main", "analysis_random", "other_models")

DEFAULT_COMPOSITES: Dict[str, Set[str]] = {
    "analysis_main": {"betas", "sigma_main", "gamma_main", "shape_main", "D_main"},
    "analysis_random": {"ranef_main", "D_main", "invD_main", "RinvD_main"},
    "other_models": {"alphas", "tau_other", "sigma_other", "gamma_other", "delta_other", "shape_other"},
}

DEFAULT_MONITOR = {"analysis_main": True}


def base_name(node: str) -> str:
    """'beta_SBP[age]' → 'beta_SBP'"""
    return node.split("[", 1)[0]


def validate_monitor_params(params: Mapping[str, object]):
    """모니터 설정 키와 값 형식 검사"""
    for key, value in params.items():
        if key == "other":
            if isinstance(value, str) or not isinstance(value, (list, tuple)):
                raise ConfigError("monitor_params.other는 노드 이름 목록이어야 합니다")
            continue
        if key not in LEAF_KEYS and key not in COMPOSITE_KEYS:
            raise ConfigError(
                f"알 수 없는 모니터 키워드 '{key}'\n"
                f"사용 가능: {', '.join(COMPOSITE_KEYS + LEAF_KEYS)}, other"
            )
        if not isinstance(value, bool):
            raise ConfigError(f"모니터 키워드 '{key}'의 값은 true/false여야 합니다")


def resolve_leaves(params: Optional[Mapping[str, object]],
                   composites: Optional[Mapping[str, Iterable[str]]] = None) -> Set[str]:
    """키워드 설정 → 선택된 leaf 키 집합"""
    params = dict(DEFAULT_MONITOR if params is None else params)
    validate_monitor_params(params)
    composites = {k: set(v) for k, v in (composites or DEFAULT_COMPOSITES).items()}

    selected: Set[str] = set()
    for key in COMPOSITE_KEYS:
        if key in params:
            if params[key]:
                selected |= composites.get(key, set())
            else:
                selected -= composites.get(key, set())
    for key in LEAF_KEYS:
        if key in params:
            if params[key]:
                selected.add(key)
            else:
                selected.discard(key)
    return selected


def match_names(names: Sequence[str], node_names: Sequence[str]) -> List[str]:
    """
    명시적 이름 → 노드 이름 (정확히 일치하거나 '[' 앞부분이 일치)

    Raises:
        ConfigError: 어떤 노드와도 일치하지 않는 이름
    """
    matched: Dict[str, None] = {}
    for name in names:
        hits = [n for n in node_names if n == name or base_name(n) == name]
        if not hits:
            raise ConfigError(f"모니터링할 수 없는 노드 '{name}'")
        for n in hits:
            matched.setdefault(n, None)
    return list(matched)


def resolve_monitors(node_groups: Mapping[str, str], params: Optional[Mapping[str, object]] = None,
                     composites: Optional[Mapping[str, Iterable[str]]] = None) -> List[str]:
    """
    모니터 키워드 → 노드 이름 목록 (노드 정의 순서 유지)

    Args:
        node_groups: 노드 이름 → leaf 키
        params: 키워드 설정 (예: {"analysis_main": True, "imps": True, "other": ["alpha_bili"]})
        composites: 복합 키워드 → leaf 키 (모델 그래프가 분석 모델 종류에 맞게 계산)

    Returns:
        노드 이름 리스트
    """
    params = dict(DEFAULT_MONITOR if params is None else params)
    leaves = resolve_leaves(params, composites)
    selected = {name for name, leaf in node_groups.items() if leaf in leaves}
    if params.get("other"):
        selected |= set(match_names(params["other"], list(node_groups)))
    return [name for name in node_groups if name in selected]
