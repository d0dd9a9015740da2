"""CSV 읽기 테스트"""

import pytest

from src.csv_reader import CSVReader, read_csv
from src.errors import DataError


def write(tmp_path, text, name="data.csv", encoding="utf-8"):
    path = tmp_path / name
    path.write_bytes(text.encode(encoding))
    return path


def test_numeric_and_categorical_columns(tmp_path):
    path = write(tmp_path, "id,x,smoke\n1,1.5,never\n1,NA,former\n2,3,\n")
    ds = read_csv(path, grouping="id")
    assert ds.columns == ["id", "x", "smoke"]
    assert ds.column("x").missing.tolist() == [False, True, False]
    assert ds.column("smoke").categories == ("never", "former")
    assert ds.column("smoke").missing.tolist() == [False, False, True]
    assert ds.n_groups == 2


def test_custom_na_token(tmp_path):
    path = write(tmp_path, "x\n1\n.\n3\n")
    ds = read_csv(path, na_token=".")
    assert ds.column("x").missing.tolist() == [False, True, False]


def test_korean_cp949_file(tmp_path):
    path = write(tmp_path, "성별,키\n남,170\n여,160\n", encoding="cp949")
    reader = CSVReader(str(path))
    ds = reader.read()
    assert reader.encoding == "cp949"
    assert ds.column("성별").categories == ("남", "여")


def test_blank_lines_are_skipped(tmp_path):
    path = write(tmp_path, "a,b\n1,2\n\n3,4\n")
    assert read_csv(path).n_rows == 2


def test_ragged_row_reports_line_number(tmp_path):
    path = write(tmp_path, "a,b\n1,2\n3\n")
    with pytest.raises(DataError, match="3번째 줄"):
        read_csv(path)


def test_duplicate_header(tmp_path):
    path = write(tmp_path, "a,a\n1,2\n")
    with pytest.raises(DataError):
        read_csv(path)


def test_missing_and_empty_file(tmp_path):
    with pytest.raises(DataError):
        read_csv(tmp_path / "nope.csv")
    with pytest.raises(DataError):
        read_csv(write(tmp_path, ""))
