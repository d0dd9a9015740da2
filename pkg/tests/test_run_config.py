"""실행 설정 테스트"""

import json

import pytest

from src.errors import ConfigError
from src.run_config import RunConfig


BASE = {
    "data": {"path": "data.csv"},
    "model": {"formula": "y ~ x"},
    "mcmc": {"n_chains": 2, "n_iter": 100, "seed": 1},
}


def test_load_and_get(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(BASE), encoding="utf-8")
    config = RunConfig.load(path)
    assert config.get("mcmc.n_iter") == 100
    assert config.get("mcmc.thin") is None
    assert config.get("mcmc.thin", 1) == 1
    assert config.get("model.formula.x") is None


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "none.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"data": ', encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON"):
        RunConfig.load(broken)
    array = tmp_path / "array.json"
    array.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError):
        RunConfig.load(array)


def test_override_takes_precedence_and_ignores_none():
    config = RunConfig(BASE)
    config.override("mcmc.n_iter", 500)
    config.override("mcmc.seed", None)
    config.override("output.dir", "runs/a")
    assert config.get("mcmc.n_iter") == 500
    assert config.get("mcmc.seed") == 1
    assert str(config.output_dir) == "runs/a"
    assert BASE["mcmc"]["n_iter"] == 100


@pytest.mark.parametrize("data", [
    {"data": {"path": "a.csv"}, "sampler": {}},
    {"data": {"path": "a.csv"}, "mcmc": {"iterations": 10}},
    {"data": {"path": "a.csv"}, "mcmc": {"n_iter": "100"}},
    {"data": {"path": "a.csv"}, "mcmc": {"n_iter": True}},
    {"data": {"path": "a.csv"}, "model": "y ~ x"},
    {"model": {"formula": "y ~ x"}},
])
def test_validate_rejects(data):
    with pytest.raises(ConfigError):
        RunConfig(data).validate()


def test_formulas():
    assert RunConfig(BASE).formulas() == ["y ~ x"]
    assert RunConfig({"model": {"formulas": ["y ~ x", "z ~ x"]}}).formulas() == ["y ~ x", "z ~ x"]
    with pytest.raises(ConfigError):
        RunConfig({"model": {}}).formulas()
    with pytest.raises(ConfigError):
        RunConfig({"model": {"formula": "y ~ x", "formulas": ["z ~ x"]}}).formulas()


def test_model_options_family_to_model_type():
    config = RunConfig({"model": {"formula": "y ~ x", "family": "binomial", "link": "probit",
                                  "no_model": "age", "trunc": {"x": [0, None]}}})
    options = config.model_options()
    assert options["model_type"] == "glm_binomial_probit"
    assert options["no_model"] == ["age"]
    assert options["trunc"] == {"x": [0, None]}
    mixed = RunConfig({"model": {"formula": "y ~ x + (1 | id)", "family": "binomial"}})
    assert mixed.model_options()["model_type"] == "glmm_binomial_logit"
    with pytest.raises(ConfigError):
        RunConfig({"model": {"formula": "y ~ x", "link": "log"}}).model_options()


def test_mcmc_settings_defaults_and_validation():
    settings = RunConfig(BASE).mcmc_settings()
    assert (settings.n_chains, settings.n_adapt, settings.n_iter, settings.thin) == (2, 100, 100, 1)
    with pytest.raises(ConfigError):
        RunConfig({"mcmc": {"n_chains": 0}}).mcmc_settings()


def test_config_hash_is_key_order_independent():
    a = RunConfig({"mcmc": {"seed": 1, "n_iter": 10}, "data": {"path": "x.csv"}})
    b = RunConfig({"data": {"path": "x.csv"}, "mcmc": {"n_iter": 10, "seed": 1}})
    assert a.config_hash() == b.config_hash()
    assert len(a.config_hash()) == 64
    b.override("mcmc.seed", 2)
    assert a.config_hash() != b.config_hash()
