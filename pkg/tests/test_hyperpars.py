"""하이퍼파라미터 병합 테스트"""

import pytest

from src.errors import ConfigError
from src.hyperpars import default_hyperparameters, evaluate_kinvd


def test_defaults():
    hp = default_hyperparameters()
    assert hp.regression_prior("norm") == (0.0, 1e-4)
    assert hp.precision_prior("norm") == (0.01, 0.01)
    assert hp.value("surv", "tau_reg") == 0.001
    assert hp.kinvd(2) == 3.0


def test_merge_is_fieldwise():
    hp = default_hyperparameters({"norm": {"tau_reg_norm": 0.01}})
    assert hp.regression_prior("norm") == (0.0, 0.01)
    assert hp.precision_prior("norm") == (0.01, 0.01)
    # 기본값은 그대로
    assert default_hyperparameters().value("norm", "tau_reg") == 1e-4


@pytest.mark.parametrize("overrides", [
    {"normal": {"tau_reg_norm": 1.0}},
    {"norm": {"tau_reg": 1.0}},
    {"norm": {"tau_reg_norm": 0}},
    {"ranef": {"shape_diag_RinvD": -1}},
    {"norm": {"mu_reg_norm": "abc"}},
])
def test_invalid_overrides(overrides):
    with pytest.raises(ConfigError):
        default_hyperparameters(overrides)


def test_negative_mean_is_allowed():
    hp = default_hyperparameters({"binom": {"mu_reg_binom": -2}})
    assert hp.regression_prior("binom") == (-2.0, 1e-4)


@pytest.mark.parametrize("expr, nranef, expected", [
    ("nranef + 1.0", 2, 3.0),
    ("nranef+3", 1, 4.0),
    ("nranef", 2, 2.0),
    (5, 2, 5.0),
])
def test_kinvd_expressions(expr, nranef, expected):
    assert evaluate_kinvd(expr, nranef) == expected


@pytest.mark.parametrize("expr", ["2 * nranef", "nranef + -5", 0])
def test_kinvd_rejects(expr):
    with pytest.raises(ConfigError):
        evaluate_kinvd(expr, 2)
