"""
사전분포 하이퍼파라미터 기본값

그룹(norm, gamma, beta, binom, poisson, multinomial, ordinal, ranef, surv, weibull)별
필드 이름은 출력 표와 같은 형태를 씁니다 (예: mu_reg_norm, tau_reg_norm).
"""

import copy
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

from src.errors import ConfigError


DEFAULTS: Dict[str, Dict[str, object]] = {
    "norm": {"mu_reg_norm": 0.0, "tau_reg_norm": 1e-4, "shape_tau_norm": 0.01, "rate_tau_norm": 0.01},
    "gamma": {"mu_reg_gamma": 0.0, "tau_reg_gamma": 1e-4, "shape_tau_gamma": 0.01, "rate_tau_gamma": 0.01},
    "beta": {"mu_reg_beta": 0.0, "tau_reg_beta": 1e-4, "shape_tau_beta": 0.01, "rate_tau_beta": 0.01},
    "binom": {"mu_reg_binom": 0.0, "tau_reg_binom": 1e-4},
    "poisson": {"mu_reg_poisson": 0.0, "tau_reg_poisson": 1e-4},
    "multinomial": {"mu_reg_multinomial": 0.0, "tau_reg_multinomial": 1e-4},
    "ordinal": {"mu_reg_ordinal": 0.0, "tau_reg_ordinal": 1e-4,
                "mu_delta_ordinal": 0.0, "tau_delta_ordinal": 1e-4},
    "ranef": {"shape_diag_RinvD": 0.01, "rate_diag_RinvD": 0.001, "KinvD_expr": "nranef + 1.0"},
    "surv": {"mu_reg_surv": 0.0, "tau_reg_surv": 0.001},
    "weibull": {"rate_shape_weibull": 0.01},
}

# 0보다 커야 하는 필드 접두어
POSITIVE_PREFIXES = ("tau_", "shape_", "rate_")

RIDGE_SHAPE = 0.01
RIDGE_RATE = 0.01


@dataclass
class HyperParameters:
    """그룹별 하이퍼파라미터"""
    groups: Dict[str, Dict[str, object]] = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def group(self, name: str) -> Dict[str, object]:
        if name not in self.groups:
            raise ConfigError(f"알 수 없는 하이퍼파라미터 그룹 '{name}'")
        return self.groups[name]

    def value(self, group: str, key: str) -> float:
        return float(self.group(group)[f"{key}_{group}"])

    def regression_prior(self, group: str):
        """(mu_reg, tau_reg)"""
        return self.value(group, "mu_reg"), self.value(group, "tau_reg")

    def precision_prior(self, group: str):
        """(shape_tau, rate_tau)"""
        return self.value(group, "shape_tau"), self.value(group, "rate_tau")

    def kinvd(self, nranef: int) -> float:
        """KinvD_expr 평가 ('nranef + c' 또는 숫자)"""
        expr = self.groups["ranef"]["KinvD_expr"]
        return evaluate_kinvd(expr, nranef)

    def merge(self, overrides: Optional[Mapping[str, Mapping[str, object]]]) -> "HyperParameters":
        """
        필드 단위 병합

        Raises:
            ConfigError: 알 수 없는 그룹/필드, 양수여야 하는 필드에 0 이하 값
        """
        merged = copy.deepcopy(self.groups)
        for group, fields in (overrides or {}).items():
            if group not in merged:
                raise ConfigError(f"알 수 없는 하이퍼파라미터 그룹 '{group}' (가능: {list(merged)})")
            for key, value in fields.items():
                if key not in merged[group]:
                    raise ConfigError(f"그룹 '{group}'에 '{key}' 필드가 없습니다")
                if key == "KinvD_expr":
                    evaluate_kinvd(value, 1)
                    merged[group][key] = value
                    continue
                try:
                    number = float(value)
                except (TypeError, ValueError):
                    raise ConfigError(f"하이퍼파라미터 '{key}' 값이 숫자가 아닙니다: {value!r}")
                if key.startswith(POSITIVE_PREFIXES) and not number > 0:
                    raise ConfigError(f"하이퍼파라미터 '{key}'은(는) 0보다 커야 합니다 (입력: {value})")
                merged[group][key] = number
        return HyperParameters(merged)

    def to_dict(self) -> Dict[str, Dict[str, object]]:
        return copy.deepcopy(self.groups)


def evaluate_kinvd(expr, nranef: int) -> float:
    """'nranef + 1.0' 형태의 식 또는 숫자를 평가"""
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        value = float(expr)
    else:
        text = str(expr).replace(" ", "")
        try:
            if text.startswith("nranef+"):
                value = nranef + float(text[len("nranef+"):])
            elif text == "nranef":
                value = float(nranef)
            else:
                value = float(text)
        except ValueError:
            raise ConfigError(f"KinvD_expr '{expr}'을(를) 해석할 수 없습니다 ('nranef + c' 또는 숫자)")
    if not value > 0:
        raise ConfigError(f"KinvD는 0보다 커야 합니다 (입력: {expr})")
    return value


def default_hyperparameters(overrides: Optional[Mapping[str, Mapping[str, object]]] = None) -> HyperParameters:
    """기본 하이퍼파라미터 (overrides가 있으면 필드 단위 병합)"""
    return HyperParameters().merge(overrides)
