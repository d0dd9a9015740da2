"""수식 파서 테스트"""

import numpy as np
import pytest

from src.errors import ConfigError, FormulaSyntaxError
from src.formula_parser import (
    evaluate_arith,
    expand_terms,
    formula_variables,
    parse_formula,
    parse_random,
    render_formula,
    term_dependencies,
)


def names(terms):
    return [t.name for t in terms]


def test_simple_formula_has_intercept_and_main_effects():
    ast = parse_formula("SBP ~ gender + WC + alc + creat")
    assert ast.response.kind == "variable"
    assert ast.response.name == "SBP"
    assert ast.intercept
    assert names(expand_terms(ast)) == ["(Intercept)", "gender", "WC", "alc", "creat"]


def test_product_expands_to_main_effects_and_interactions():
    ast = parse_formula("y ~ gender * (age + smoke + creat)")
    terms = names(expand_terms(ast))
    assert terms[:5] == ["(Intercept)", "gender", "age", "smoke", "creat"]
    assert set(terms[5:]) == {"age:gender", "gender:smoke", "creat:gender"}
    assert all(t.degree == 2 for t in expand_terms(ast)[5:])


def test_power_expands_all_interactions_up_to_degree():
    terms = expand_terms(parse_formula("y ~ (a + b + c)^3"))
    assert sorted(t.degree for t in terms) == [0, 1, 1, 1, 2, 2, 2, 3]
    assert terms[-1].name == "a:b:c"


def test_duplicate_terms_are_merged():
    terms = names(expand_terms(parse_formula("y ~ a + b + a + b:a + a:b")))
    assert terms == ["(Intercept)", "a", "b", "a:b"]


@pytest.mark.parametrize("text", ["y ~ a + b - 1", "y ~ 0 + a + b"])
def test_intercept_removal(text):
    ast = parse_formula(text)
    assert not ast.intercept
    assert names(expand_terms(ast)) == ["a", "b"]


def test_subtracting_a_term():
    assert names(expand_terms(parse_formula("y ~ a * b - a:b"))) == ["(Intercept)", "a", "b"]


def test_function_term_dependencies():
    ast = parse_formula("y ~ I(creat/albu^2) + log(bili)")
    deps = [term_dependencies(t) for t in expand_terms(ast) if not t.is_intercept]
    assert deps == [{"creat", "albu"}, {"bili"}]


def test_random_parts_are_split_from_fixed():
    ast = parse_formula("y ~ time + (time | id) + (1 | center)")
    assert names(expand_terms(ast)) == ["(Intercept)", "time"]
    assert [p.group for p in ast.random_parts] == ["id", "center"]
    assert names(expand_terms(ast.random_parts[0])) == ["(Intercept)", "time"]
    assert names(expand_terms(ast.random_parts[1])) == ["(Intercept)"]


def test_random_slope_without_intercept():
    ast = parse_formula("y ~ x + (0 + x | id)")
    assert not ast.random_parts[0].intercept


def test_parse_random_lme_style():
    parts = parse_random("~ time | ID")
    assert len(parts) == 1
    assert parts[0].group == "ID"
    assert names(expand_terms(parts[0])) == ["(Intercept)", "time"]


def test_survival_response():
    ast = parse_formula("Surv(time, status == 1) ~ age + sex")
    assert ast.response.kind == "survival"
    assert ast.response.time == "time"
    assert ast.response.variables() == {"time", "status"}


def test_one_sided_formula():
    ast = parse_formula("~ a + b", one_sided=True)
    assert ast.response is None
    assert formula_variables(ast) == ["a", "b"]


def test_formula_variables_keep_first_appearance_order():
    ast = parse_formula("y ~ b + I(a^2) + a:c + (x | g)")
    assert formula_variables(ast) == ["b", "a", "c", "x"]


@pytest.mark.parametrize("text", [
    "y ~ a + b",
    "y ~ a * b - 1",
    "y ~ I(creat/albu^2) + log(x)",
    "y ~ x + (x | id)",
    "Surv(t, d == 1) ~ a:b",
])
def test_render_then_parse_gives_same_ast(text):
    ast = parse_formula(text)
    assert parse_formula(render_formula(ast)) == ast


@pytest.mark.parametrize("text, offset", [
    ("y ~ a +", 7),
    ("y ~ a $ b", 6),
    ("y ~ (a + b", 10),
])
def test_syntax_error_reports_offset(text, offset):
    with pytest.raises(FormulaSyntaxError) as err:
        parse_formula(text)
    assert err.value.offset == offset
    assert err.value.exit_code == 2


def test_offset_is_counted_in_bytes():
    with pytest.raises(FormulaSyntaxError) as err:
        parse_formula("y ~ 체중 $ b")
    # '체중'은 UTF-8로 6바이트
    assert err.value.offset == len("y ~ ".encode()) + 6 + 1


def test_unknown_function_rejected_in_strict_mode():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("y ~ foo(x)")
    ast = parse_formula("y ~ foo(x)", strict=False)
    assert term_dependencies(expand_terms(ast)[1]) == {"x"}


def test_nested_random_effects_rejected():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("y ~ x + (1 | a/b)")


def test_in_operator_rejected():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("y ~ a %in% b")


def test_fractional_power_rejected_on_expansion():
    ast = parse_formula("y ~ (a + b)^1.5")
    with pytest.raises(ConfigError):
        expand_terms(ast)


def test_empty_formula():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("   ")


def test_evaluate_arith_follows_float_semantics():
    ast = parse_formula("y ~ I(a / b) + log(a)")
    env = {"a": np.array([1.0, 0.0, 4.0]), "b": np.array([2.0, 0.0, 0.0])}
    ratio, log_a = (t.factors[0] for t in expand_terms(ast)[1:])
    out = evaluate_arith(ratio, env)
    assert out[0] == 0.5
    assert np.isnan(out[1])
    assert np.isinf(out[2])
    np.testing.assert_allclose(evaluate_arith(log_a, env)[[0, 2]], [0.0, np.log(4.0)])
