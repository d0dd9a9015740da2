"""명령행 도구 테스트 (작은 설정으로 fit → summary / diagnose / predict / impute-export)"""

import json
import sys

import pandas as pd
import pytest

import jointgibbs_cli
from jointgibbs_cli import build_parser, parse_overrides, parse_subset, run
from src.diagnostics import SubsetSpec
from src.errors import ConfigError
from tests.conftest import SBP_FORMULA, make_cross_sectional


@pytest.fixture(scope="module")
def project(tmp_path_factory):
    """데이터 CSV + 설정 파일 + fit 완료된 실행 폴더"""
    root = tmp_path_factory.mktemp("cli")
    data_path = root / "sbp.csv"
    make_cross_sectional().frame.to_csv(data_path, index=False, na_rep="NA")
    config = {
        "data": {"path": str(data_path)},
        "model": {"formula": SBP_FORMULA, "monitor_params": {"analysis_main": True, "imps": True}},
        "mcmc": {"n_chains": 2, "n_adapt": 20, "n_iter": 60, "seed": 3},
        "output": {"dir": str(root / "run")},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    assert run(["fit", "--config", str(config_path), "--quiet"]) == 0
    return root, config_path


def exit_code(monkeypatch, argv):
    monkeypatch.setattr(sys, "argv", ["jointgibbs"] + argv)
    with pytest.raises(SystemExit) as info:
        jointgibbs_cli.main()
    return info.value.code


def test_fit_writes_run_folder(project):
    root, _ = project
    run_dir = root / "run"
    for name in ("model_graph.json", "model_graph.txt", "warnings.log", "manifest.json",
                 "samples/chain_1.csv", "samples/chain_2.csv"):
        assert (run_dir / name).exists(), name
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "fit"
    assert manifest["seed"] == 3
    assert len(manifest["config_hash"]) == 64
    chain = pd.read_csv(run_dir / "samples/chain_1.csv")
    assert chain["iteration"].tolist() == list(range(21, 81))
    assert "imp_creat[4]" in chain.columns


def test_summary_and_diagnose(project, capsys):
    root, config_path = project
    assert run(["summary", "--config", str(config_path), "--quiet", "--missinfo"]) == 0
    text = (root / "run/summary/summary.txt").read_text(encoding="utf-8")
    assert "Iterations = 21:80" in text
    assert "Number of observations: 60" in text
    assert "Number and proportion of complete cases:" in text
    assert "Iterations = 21:80" in capsys.readouterr().out

    assert run(["diagnose", "--config", str(config_path), "--quiet", "--kinds", "trace", "mcse_ratio",
                "--subset", '{"analysis_main": true}']) == 0
    out_dir = root / "run/diagnose"
    report = json.loads((out_dir / "diagnostics.json").read_text(encoding="utf-8"))
    assert "beta_SBP[age]" in report["gelman_rubin"]
    assert not any(name.startswith("imp_") for name in report["mc_error"])
    assert (out_dir / "plots/trace.csv").exists()
    assert not (out_dir / "plots/density.csv").exists()


def test_summary_subset_window(project):
    root, config_path = project
    assert run(["summary", "--config", str(config_path), "--quiet", "--start", "41", "--exclude-chains", "2"]) == 0
    summary = json.loads((root / "run/summary/summary.json").read_text(encoding="utf-8"))
    assert (summary["meta"]["start"], summary["meta"]["n_chains"]) == (41, 1)


def test_predict_and_impute_export(project):
    root, config_path = project
    assert run(["predict", "--config", str(config_path), "--quiet", "--vars", "~ age", "--grid-length", "4",
                "--override", "alc=no,yes"]) == 0
    predictions = pd.read_csv(root / "run/predict/predictions.csv")
    assert len(predictions) == 8
    assert {"fit", "2.5%", "97.5%"} <= set(predictions.columns)

    assert run(["impute-export", "--config", str(config_path), "--quiet", "--m", "2", "--minspace", "10",
                "--seed", "4"]) == 0
    imputed = pd.read_csv(root / "run/impute/imputed.csv")
    assert sorted(imputed["Imputation_"].unique()) == [0, 1, 2]
    assert imputed.loc[imputed["Imputation_"] > 0, "WC"].notna().all()
    manifest = json.loads((root / "run/impute/manifest.json").read_text(encoding="utf-8"))
    assert len(manifest["picks"]) == 2
    assert (root / "run/impute/plots/imp_distr.csv").exists()


def test_md_pattern_command(project, capsys):
    root, config_path = project
    assert run(["md-pattern", "--config", str(config_path), "--quiet"]) == 0
    table = pd.read_csv(root / "run/md_pattern/md_pattern.csv")
    assert len(table) > 1
    assert "creat" in capsys.readouterr().out


def test_exit_codes(project, tmp_path, monkeypatch):
    root, config_path = project
    assert exit_code(monkeypatch, ["fit", "--config", str(tmp_path / "none.json"), "--quiet"]) == 2

    bad_formula = json.loads(config_path.read_text(encoding="utf-8"))
    bad_formula["model"]["formula"] = "SBP ~ age +"
    bad_formula["output"]["dir"] = str(tmp_path / "bad")
    path = tmp_path / "bad_formula.json"
    path.write_text(json.dumps(bad_formula), encoding="utf-8")
    assert exit_code(monkeypatch, ["fit", "--config", str(path), "--quiet"]) == 2

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("SBP,age\n120,40\n130\n", encoding="utf-8")
    assert exit_code(monkeypatch, ["fit", "--config", str(config_path), "--quiet", "--data", str(ragged),
                                   "--run-dir", str(tmp_path / "ragged_run")]) == 3

    assert exit_code(monkeypatch, ["summary", "--config", str(config_path), "--quiet",
                                   "--run-dir", str(tmp_path / "empty")]) == 2


def test_parse_subset_and_overrides():
    parser = build_parser()
    args = parser.parse_args(["summary", "--config", "c.json", "--start", "5", "--exclude-chains", "1,3",
                              "--subset", '{"betas": true}'])
    assert parse_subset(args) == SubsetSpec(start=5, exclude_chains=(1, 3), monitor={"betas": True})
    assert parse_subset(parser.parse_args(["summary", "--config", "c.json"])) is None
    with pytest.raises(ConfigError):
        parse_subset(parser.parse_args(["summary", "--config", "c.json", "--subset", "[1]"]))
    with pytest.raises(ConfigError):
        parse_subset(parser.parse_args(["summary", "--config", "c.json", "--exclude-chains", "a"]))
    assert parse_overrides(["age=40,60", "alc=yes"]) == {"age": [40.0, 60.0], "alc": ["yes"]}
    assert parse_overrides(None) is None
    with pytest.raises(ConfigError):
        parse_overrides(["age"])
