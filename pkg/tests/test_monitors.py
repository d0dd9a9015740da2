"""모니터 키워드 테스트"""

import pytest

from src.errors import ConfigError
from src.monitors import base_name, resolve_monitors


NODE_GROUPS = {
    "beta_y[(Intercept)]": "betas",
    "beta_y[x]": "betas",
    "sigma_y": "sigma_main",
    "alpha_x[(Intercept)]": "alphas",
    "tau_x": "tau_other",
    "imp_x[3]": "imps",
    "b_y[1,1]": "ranef_main",
}


def test_default_is_analysis_main():
    assert resolve_monitors(NODE_GROUPS) == ["beta_y[(Intercept)]", "beta_y[x]", "sigma_y"]


def test_leaf_overrides_composite():
    nodes = resolve_monitors(NODE_GROUPS, {"analysis_main": True, "sigma_main": False})
    assert nodes == ["beta_y[(Intercept)]", "beta_y[x]"]


def test_composites_and_imputations():
    nodes = resolve_monitors(NODE_GROUPS, {"other_models": True, "imps": True})
    assert nodes == ["alpha_x[(Intercept)]", "tau_x", "imp_x[3]"]


def test_other_by_base_name_keeps_node_order():
    nodes = resolve_monitors(NODE_GROUPS, {"analysis_main": False, "other": ["imp_x", "beta_y[x]"]})
    assert nodes == ["beta_y[x]", "imp_x[3]"]


def test_custom_composites():
    nodes = resolve_monitors(NODE_GROUPS, {"analysis_random": True},
                             composites={"analysis_random": ["ranef_main"]})
    assert nodes == ["b_y[1,1]"]


@pytest.mark.parametrize("params", [
    {"betaz": True},
    {"betas": "yes"},
    {"other": "imp_x"},
    {"other": ["nope"]},
])
def test_invalid_monitor_params(params):
    with pytest.raises(ConfigError):
        resolve_monitors(NODE_GROUPS, params)


def test_base_name():
    assert base_name("beta_SBP[age]") == "beta_SBP"
    assert base_name("sigma_SBP") == "sigma_SBP"
