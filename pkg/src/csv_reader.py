"""
CSV 데이터 읽기 모듈
분석용 CSV 파일을 읽고 Dataset으로 변환합니다.
"""

import csv
from collections import Counter
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.data_frame import Dataset
from src.errors import DataError


class CSVReader:
    """CSV 파일 읽기"""

    def __init__(self, csv_path: str, na_token: str = "NA", log_callback=None):
        self.csv_path = csv_path
        self.na_token = na_token
        self.log_callback = log_callback
        self.header: List[str] = []
        self.rows: List[List[str]] = []
        self.encoding: Optional[str] = None

    def _log(self, level: str, message: str):
        if self.log_callback:
            self.log_callback(level, message)

    def read_raw(self) -> List[List[str]]:
        """CSV 파일을 읽어서 헤더와 문자열 행 목록 저장"""
        # 여러 인코딩을 시도하여 파일 읽기
        encodings = ['utf-8-sig', 'cp949', 'euc-kr', 'latin-1']
        last_error = None

        for encoding in encodings:
            try:
                with open(self.csv_path, 'r', encoding=encoding, newline='') as f:
                    rows = [row for row in csv.reader(f)]
                self.encoding = encoding
                break
            except (UnicodeDecodeError, UnicodeError) as e:
                last_error = e
                continue
            except FileNotFoundError:
                raise DataError(f"CSV 파일이 없습니다: {self.csv_path}")
        else:
            raise DataError(
                f'CSV 파일을 읽을 수 없습니다. 시도한 인코딩: {encodings}. 마지막 오류: {last_error}'
            )

        # 완전히 빈 줄은 건너뜀
        rows = [row for row in rows if row]
        if not rows:
            raise DataError(f"빈 CSV 파일입니다: {self.csv_path}")

        self.header = [name.strip() for name in rows[0]]
        duplicated = [name for name, count in Counter(self.header).items() if count > 1]
        if duplicated:
            raise DataError(f"중복된 열 이름: {duplicated}")
        if any(name == "" for name in self.header):
            raise DataError("빈 열 이름이 있습니다")

        self.rows = rows[1:]
        for line_no, row in enumerate(self.rows, start=2):
            if len(row) != len(self.header):
                raise DataError(
                    f"{line_no}번째 줄의 열 개수({len(row)})가 헤더({len(self.header)})와 다릅니다"
                )
        self._log("DEBUG", f"CSV 읽기 완료: {len(self.rows)}행, 인코딩={self.encoding}")
        return self.rows

    def _is_missing(self, cell: str) -> bool:
        cell = cell.strip()
        return cell == "" or cell == self.na_token

    def _column(self, index: int):
        cells = [row[index].strip() for row in self.rows]
        values: List[Optional[str]] = [None if self._is_missing(c) else c for c in cells]
        observed = [v for v in values if v is not None]
        try:
            numbers = [float(v) for v in observed]
        except ValueError:
            numbers = None
        if numbers is not None:
            return pd.array([np.nan if v is None else float(v) for v in values], dtype="float64")
        # 범주 순서 = 파일에서 처음 등장한 순서
        categories = list(dict.fromkeys(observed))
        return pd.Categorical(values, categories=categories)

    def read(self, grouping: Optional[str] = None) -> Dataset:
        """CSV 파일을 읽어서 Dataset으로 반환"""
        if not self.header:
            self.read_raw()
        columns: Dict[str, object] = {
            name: self._column(j) for j, name in enumerate(self.header)
        }
        frame = pd.DataFrame(columns, index=range(len(self.rows)))
        return Dataset(frame, grouping=grouping)


def read_csv(path: str, na_token: str = "NA", grouping: Optional[str] = None,
             log_callback=None) -> Dataset:
    """CSV 파일을 Dataset으로 읽기"""
    return CSVReader(path, na_token=na_token, log_callback=log_callback).read(grouping=grouping)
