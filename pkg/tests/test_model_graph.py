"""모델 그래프 생성 테스트"""

import numpy as np
import pytest

from src.data_frame import Dataset, LVLONE, apply_scaling, infer_variable_meta, meta_by_name, scaling_stats
from src.errors import ConfigError, DataError
from src.formula_parser import FUNCTIONS, register_function
from src.model_graph import (
    analysis_model_type,
    build_model_graph,
    describe_graph,
    design_plan,
    order_submodels,
    render_graph_text,
    select_model_type,
)
from tests.conftest import SBP_FORMULA


def labels(graph, response):
    return graph.submodel(response).coef_labels


def test_submodel_order_and_types(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data)
    order = [(sm.response, sm.model_type) for sm in graph.submodels]
    assert order == [
        ("SBP", "lm"),
        ("creat", "lm"),
        ("WC", "lm"),
        ("alc", "glm_binomial_logit"),
        ("smoke", "mlogit"),
    ]
    assert graph.imputed == ["creat", "WC", "alc", "smoke"]


def test_sequence_uses_only_later_or_complete_covariates(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data)
    assert labels(graph, "SBP") == ["(Intercept)", "genderfemale", "age", "WC", "alcyes", "creat",
                                    "smokeformer", "smokecurrent"]
    assert labels(graph, "creat") == ["(Intercept)", "genderfemale", "age", "WC", "alcyes",
                                      "smokeformer", "smokecurrent"]
    assert labels(graph, "alc") == ["(Intercept)", "genderfemale", "age", "smokeformer", "smokecurrent"]
    # 다항 로짓: 범주별 절편 + 계수
    assert labels(graph, "smoke") == ["(Intercept)", "genderfemale", "age"]


def test_continuous_columns_are_scaled(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data)
    age_col = next(c for c in graph.submodel("SBP").columns if c.label == "age")
    age = sbp_data.column("age").values
    assert age_col.center == pytest.approx(age.mean())
    assert age_col.scale == pytest.approx(age.std(ddof=1))
    dummy = next(c for c in graph.submodel("SBP").columns if c.label == "genderfemale")
    assert not dummy.is_scaled


def test_scale_vars_false_disables_scaling(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data, {"scale_vars": False})
    assert graph.scaling_table() == {sm.response: {} for sm in graph.submodels}


def test_scaled_column_evaluates_through_scaling_stats(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data)
    age_col = next(c for c in graph.submodel("SBP").columns if c.label == "age")
    age = sbp_data.column("age").values
    assert (age_col.center, age_col.scale) == pytest.approx(scaling_stats(age))
    np.testing.assert_allclose(age_col.evaluate({"age": age}, graph.categories, len(age)),
                               apply_scaling(age, scaling_stats(age)), atol=1e-12)


def test_registered_function_builds_design_column(sbp_data, monkeypatch):
    monkeypatch.setitem(FUNCTIONS, "cube", np.negative)
    register_function("cube", lambda v: v ** 3)
    graph = build_model_graph("SBP ~ cube(age)", sbp_data, {"scale_vars": False})
    (col,) = [c for c in graph.submodel("SBP").columns if not c.is_intercept]
    age = sbp_data.column("age").values
    np.testing.assert_allclose(col.evaluate({"age": age}, graph.categories, len(age)), age ** 3)


@pytest.mark.parametrize("name", ["I", "Surv", "1x"])
def test_register_function_rejects_reserved_names(name):
    with pytest.raises(ConfigError):
        register_function(name, np.abs)


def test_dynamic_columns_follow_missing_values(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data)
    plan = graph.submodel("SBP").plan
    assert set(plan.dynamic_terms) == {"WC", "alc", "creat", "smoke"}
    wc_col = graph.submodel("SBP").coef_labels.index("WC")
    assert plan.rows[wc_col].tolist() == [5, 12, 19, 33, 41, 57]
    assert np.isnan(plan.matrix[5, wc_col])


def test_node_names_and_default_monitors(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data)
    assert graph.node_groups["beta_SBP[age]"] == "betas"
    assert graph.node_groups["sigma_SBP"] == "sigma_main"
    assert graph.node_groups["alpha_creat[age]"] == "alphas"
    assert graph.node_groups["alpha_smoke[age,former]"] == "alphas"
    assert graph.node_groups["imp_creat[4]"] == "imps"
    monitored = graph.monitored_nodes()
    assert monitored[0] == "beta_SBP[(Intercept)]"
    assert monitored[-1] == "sigma_SBP"
    assert len(monitored) == 9


def test_user_model_type_and_no_model(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data, {"models": {"creat": "lognorm"},
                                                       "no_model": ["age"]})
    assert graph.submodel("creat").model_type == "lognorm"
    assert "age" in graph.no_model
    with pytest.raises(ConfigError):
        build_model_graph(SBP_FORMULA, sbp_data, {"no_model": ["WC"]})


def test_model_type_must_match_variable(sbp_data):
    with pytest.raises(ConfigError):
        build_model_graph(SBP_FORMULA, sbp_data, {"models": {"alc": "lm"}})
    with pytest.raises(ConfigError):
        build_model_graph(SBP_FORMULA, sbp_data, {"models": {"WC": "mlogit"}})


def test_unknown_variable_in_formula(sbp_data):
    with pytest.raises(ConfigError, match="hgt"):
        build_model_graph("SBP ~ age + hgt", sbp_data)


def test_unknown_option(sbp_data):
    with pytest.raises(ConfigError):
        build_model_graph(SBP_FORMULA, sbp_data, {"n_iter": 10})


def test_auxvars_add_covariate_but_not_analysis_term(sbp_data):
    graph = build_model_graph("SBP ~ gender + WC", sbp_data, {"auxvars": "~ age"})
    assert labels(graph, "SBP") == ["(Intercept)", "genderfemale", "WC"]
    assert labels(graph, "WC") == ["(Intercept)", "genderfemale", "age"]


def test_interaction_with_incomplete_variable_is_dynamic(sbp_data):
    graph = build_model_graph("SBP ~ age * creat", sbp_data)
    sm = graph.submodel("SBP")
    assert sm.coef_labels == ["(Intercept)", "age", "creat", "age:creat"]
    assert "age:creat" in sm.plan.dynamic_terms


def test_truncation_checks(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data, {"trunc": {"creat": [0, None]}})
    assert graph.submodel("creat").trunc == (0.0, None)
    with pytest.raises(DataError):
        build_model_graph(SBP_FORMULA, sbp_data, {"trunc": {"creat": [0, 0.5]}})
    with pytest.raises(ConfigError):
        build_model_graph(SBP_FORMULA, sbp_data, {"trunc": {"alc": [0, 1]}})


def test_shrinkage_only_ridge(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data, {"shrinkage": "ridge"})
    assert all(sm.shrinkage == "ridge" for sm in graph.submodels)
    with pytest.raises(ConfigError):
        build_model_graph(SBP_FORMULA, sbp_data, {"shrinkage": "lasso"})


def test_analysis_model_type_mapping():
    assert analysis_model_type("lm") == "lm"
    assert analysis_model_type("lme") == "lmm"
    assert analysis_model_type("glm", "binomial", "probit") == "glm_binomial_probit"
    assert analysis_model_type("glm", "Gamma") == "glm_gamma_inverse"
    assert analysis_model_type("glme", "binomial") == "glmm_binomial_logit"
    with pytest.raises(ConfigError):
        analysis_model_type("glme", "poisson")
    with pytest.raises(ConfigError):
        analysis_model_type("glm", "tweedie")


def test_select_model_type_by_level(long_data):
    metas = meta_by_name(infer_variable_meta(long_data, "id"))
    assert select_model_type(metas["x"], "id") == "lmm"
    assert select_model_type(metas["age"], "id") == "lm"
    assert select_model_type(metas["x"]) == "lm"


def test_lower_level_multicategory_is_unsupported():
    ds = Dataset.from_records({
        "id": [1, 1, 2, 2, 3, 3],
        "c": ["a", "b", "c", None, "a", "b"],
    }, grouping="id")
    meta = meta_by_name(infer_variable_meta(ds))["c"]
    with pytest.raises(ConfigError):
        select_model_type(meta, "id")


def test_order_submodels_level1_first_then_missing_count(long_data):
    metas = infer_variable_meta(long_data, "id")
    by_name = meta_by_name(metas)
    assert order_submodels([by_name["age"], by_name["x"], by_name["time"]]) == ["x", "time", "age"]


def test_mixed_model_graph(long_data):
    graph = build_model_graph("y ~ time + age + x + (time | id)", long_data)
    assert [(sm.response, sm.model_type, sm.level) for sm in graph.submodels] == [
        ("y", "lmm", LVLONE),
        ("x", "lmm", LVLONE),
        ("time", "lmm", LVLONE),
        ("age", "lm", "id"),
    ]
    assert graph.submodel("y").nranef == 2
    assert graph.submodel("age").coef_labels == ["(Intercept)"]
    assert "b_y[15,2]" in graph.node_groups
    assert "D_y[1,2]" in graph.node_groups
    assert "imp_age[3]" in graph.node_groups
    assert "imp_age[11]" in graph.node_groups


def test_random_option_equals_inline_random_part(long_data):
    inline = build_model_graph("y ~ time + (1 | id)", long_data)
    option = build_model_graph("y ~ time", long_data, {"random": "~ 1 | id"})
    assert [sm.model_type for sm in inline.submodels] == [sm.model_type for sm in option.submodels]
    assert list(inline.node_groups) == list(option.node_groups)


def test_two_grouping_variables_rejected(long_data):
    with pytest.raises(ConfigError):
        build_model_graph("y ~ time + (1 | id) + (1 | time)", long_data)


def test_graph_description_and_text(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data)
    entries = describe_graph(graph)
    assert entries[0]["response"] == "SBP"
    assert entries[0]["role"] == "analysis"
    assert entries[4]["reference"] == "never"
    text = render_graph_text(graph)
    assert 'Linear model for "SBP"' in text
    assert 'Multinomial logit model for "smoke"' in text


def test_design_plan_recomputed_from_dataset(sbp_data):
    graph = build_model_graph(SBP_FORMULA, sbp_data)
    sm = graph.submodel("SBP")
    plan = design_plan(sm, sbp_data, graph.imputed, graph.metas)
    assert plan.dynamic_terms == sm.plan.dynamic_terms
    np.testing.assert_allclose(plan.matrix, sm.plan.matrix, equal_nan=True)
