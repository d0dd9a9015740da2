"""데이터셋, 변수 메타정보, 결측 패턴, 대비 코딩 테스트"""

import numpy as np
import pytest

from src.data_frame import (
    LVLONE,
    Dataset,
    apply_scaling,
    contrast_matrix,
    encode_contrasts,
    get_missinfo,
    infer_variable_meta,
    md_pattern,
    meta_by_name,
    resolve_refcat,
    scaling_stats,
    unscale,
)
from src.errors import ConfigError, DataError


@pytest.fixture
def long_data():
    """id별 3행, age는 그룹 상수, sex는 범주형"""
    return Dataset.from_records({
        "id": [1, 1, 1, 2, 2, 2, 3, 3, 3],
        "time": [0, 1, 2, 0, 1, 2, 0, 1, 2],
        "y": [1.2, 1.5, None, 0.4, 0.9, 1.1, 2.0, None, 2.4],
        "age": [50, 50, 50, None, None, None, 61, 61, 61],
        "sex": ["m", "m", "m", "f", "f", "f", "m", "m", "m"],
        "smoke": ["never", "former", None, "never", "current", "never", None, "former", "never"],
    }, grouping="id")


def test_from_records_stores_text_as_categorical():
    ds = Dataset.from_records({"x": [1, None, 3], "g": ["b", "a", None]})
    assert ds.column("x").is_numeric
    assert ds.column("g").categories == ("b", "a")
    assert list(ds.column("g").labels()) == ["b", "a", None]
    assert ds.column("x").missing.tolist() == [False, True, False]


def test_grouping_assigns_ids_by_first_appearance():
    ds = Dataset.from_records({"g": ["z", "a", "z", "b"], "x": [1, 2, 3, 4]}, grouping="g")
    assert ds.group_labels == ("z", "a", "b")
    assert ds.group_ids.tolist() == [0, 1, 0, 2]
    assert ds.n_groups == 3


def test_grouping_variable_must_be_complete():
    with pytest.raises(DataError):
        Dataset.from_records({"g": [1, None], "x": [1, 2]}, grouping="g")


def test_infer_levels_and_types(long_data):
    metas = meta_by_name(infer_variable_meta(long_data))
    assert "id" not in metas
    assert metas["time"].level == LVLONE
    assert metas["age"].level == "id"
    assert metas["age"].n_missing == 1
    assert metas["age"].n_units == 3
    assert metas["sex"].level == "id"
    assert metas["sex"].vtype == "binary"
    assert metas["y"].vtype == "continuous"
    assert metas["y"].n_missing == 2
    assert metas["smoke"].vtype == "unordered"
    assert metas["smoke"].categories == ("never", "former", "current")
    assert metas["smoke"].ref_cat == "never"


def test_two_valued_numeric_is_binary():
    ds = Dataset.from_records({"d": [0, 1, 1, None]})
    meta = infer_variable_meta(ds)[0]
    assert meta.vtype == "binary"
    assert meta.categories == ("0", "1")


def test_ordered_override_keeps_given_levels():
    ds = Dataset.from_records({"grade": ["low", "high", "mid", "low"]})
    meta = infer_variable_meta(ds, overrides={"grade": {"type": "ordered",
                                                        "levels": ["low", "mid", "high"]}})[0]
    assert meta.vtype == "ordered"
    assert meta.categories == ("low", "mid", "high")


def test_level2_declaration_must_be_group_constant(long_data):
    with pytest.raises(DataError):
        infer_variable_meta(long_data, overrides={"y": {"level": "id"}})


def test_unknown_override_variable_is_config_error(long_data):
    with pytest.raises(ConfigError):
        infer_variable_meta(long_data, overrides={"nope": {"type": "binary"}})


def test_binary_override_with_three_categories_fails():
    ds = Dataset.from_records({"c": ["a", "b", "c"]})
    with pytest.raises(DataError):
        infer_variable_meta(ds, overrides={"c": {"type": "binary"}})


def test_md_pattern_orders_columns_and_rows():
    ds = Dataset.from_records({
        "b": [1, None, 3, None, 5],
        "a": [1, 2, 3, 4, 5],
    })
    mdp = md_pattern(ds)
    assert mdp.columns == ["a", "b"]
    assert mdp.patterns.tolist() == [[1, 1], [1, 0]]
    assert mdp.counts.tolist() == [3, 2]
    assert mdp.missing_per_variable == {"a": 0, "b": 2}
    assert mdp.counts.sum() == ds.n_rows


def test_md_pattern_to_csv(tmp_path):
    ds = Dataset.from_records({"a": [1, None], "b": [None, 2]})
    path = tmp_path / "mdp.csv"
    md_pattern(ds).to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b,count"
    assert len(lines) == 3


def test_missinfo_per_level(long_data):
    metas = infer_variable_meta(long_data)
    info = get_missinfo(long_data, metas)
    assert info[LVLONE]["n_units"] == 9
    # y 결측 {2, 7}, smoke 결측 {2, 6}
    assert info[LVLONE]["complete_cases"] == 6
    assert info["id"]["n_units"] == 3
    assert info["id"]["complete_cases"] == 2
    assert info["id"]["variables"]["age"]["pct_na"] == pytest.approx(100 / 3)


def test_scaling_stats_use_sample_sd():
    assert scaling_stats(np.array([2.0, 4.0, 6.0, np.nan])) == (4.0, 2.0)


@pytest.mark.parametrize("values", [[1.0], [3.0, 3.0, 3.0], [np.nan, np.nan]])
def test_scaling_stats_rejects_degenerate(values):
    with pytest.raises(DataError):
        scaling_stats(np.array(values))


def test_scaling_round_trip_keeps_missing_positions():
    x = np.array([1.0, 2.5, np.nan, 7.0])
    stats = scaling_stats(x)
    scaled = apply_scaling(x, stats)
    assert np.isnan(scaled[2])
    assert np.nanmean(scaled) == pytest.approx(0.0, abs=1e-12)
    back = unscale(scaled, stats)
    np.testing.assert_allclose(back, x, atol=1e-12, equal_nan=True)


def test_resolve_refcat_variants():
    cats = ("a", "b", "c")
    codes = np.array([0, 2, 2, 1, np.nan, 2])
    assert resolve_refcat("first", cats) == "a"
    assert resolve_refcat("last", cats) == "c"
    assert resolve_refcat("largest", cats, codes) == "c"
    assert resolve_refcat(2, cats) == "b"
    assert resolve_refcat("b", cats) == "b"


def test_resolve_refcat_largest_tie_goes_to_first():
    assert resolve_refcat("largest", ("a", "b"), np.array([0, 1, 1, 0])) == "a"


@pytest.mark.parametrize("spec", [0, 4, "zzz"])
def test_resolve_refcat_rejects_unknown(spec):
    with pytest.raises(ConfigError):
        resolve_refcat(spec, ("a", "b", "c"))


def test_dummy_contrast():
    m = contrast_matrix(3, 0)
    assert m.tolist() == [[0, 0], [1, 0], [0, 1]]


def test_effect_contrast_reference_row_is_minus_one():
    m = contrast_matrix(3, 1, coding="effect")
    assert m.tolist() == [[1, 0], [-1, -1], [0, 1]]
    assert np.allclose(m.sum(axis=0), 0)


def test_unknown_contrast_rejected():
    with pytest.raises(ConfigError):
        contrast_matrix(3, 0, coding="helmert")


def test_encode_contrasts_keeps_missing_rows():
    out, labels = encode_contrasts(np.array([0, 2, np.nan]), ["a", "b", "c"], "a", name="smoke")
    assert labels == ["smokeb", "smokec"]
    assert out[0].tolist() == [0, 0]
    assert out[1].tolist() == [0, 1]
    assert np.isnan(out[2]).all()
