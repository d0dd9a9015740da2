"""
MCMC 표본 저장소

체인마다 CSV 하나(열 = iteration + 노드 이름, 행 = 저장된 반복)와
메타 JSON(반복 번호, 설정, 노드 그룹, 척도화 정보)을 씁니다.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.errors import DataError


META_FILE = "samples_meta.json"
FLOAT_FORMAT = "%.17g"


def chain_file(chain: int) -> str:
    return f"chain_{chain}.csv"


@dataclass
class McmcSamples:
    """체인별 (저장 반복 × 모니터 노드) 행렬"""
    chains: List[np.ndarray]
    nodes: List[str]
    iterations: np.ndarray
    meta: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.iterations = np.asarray(self.iterations, dtype=int)
        self.chains = [np.asarray(c, dtype=float).reshape(len(self.iterations), len(self.nodes))
                       for c in self.chains]

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def n_stored(self) -> int:
        return len(self.iterations)

    @property
    def thin(self) -> int:
        return int(self.meta.get("thin", 1))

    @property
    def start(self) -> Optional[int]:
        return int(self.iterations[0]) if self.n_stored else None

    @property
    def end(self) -> Optional[int]:
        return int(self.iterations[-1]) if self.n_stored else None

    @property
    def node_groups(self) -> Dict[str, str]:
        return dict(self.meta.get("node_groups", {}))

    def node_index(self, name: str) -> int:
        try:
            return self.nodes.index(name)
        except ValueError:
            raise DataError(f"표본에 노드 '{name}'이(가) 없습니다 (모니터 설정을 확인하세요)")

    def values(self, node: str) -> np.ndarray:
        """(n_chains, n_stored)"""
        j = self.node_index(node)
        return np.stack([c[:, j] for c in self.chains]) if self.chains else np.zeros((0, 0))

    def value_at(self, node: str, chain: int, iteration: int) -> float:
        """체인(1부터), 반복 번호의 값"""
        rows = np.flatnonzero(self.iterations == iteration)
        if not len(rows) or not 1 <= chain <= self.n_chains:
            raise DataError(f"저장되지 않은 반복입니다 (chain={chain}, iteration={iteration})")
        return float(self.chains[chain - 1][rows[0], self.node_index(node)])

    def chain_frame(self, chain: int) -> pd.DataFrame:
        frame = pd.DataFrame(self.chains[chain - 1], columns=self.nodes)
        frame.insert(0, "iteration", self.iterations)
        return frame

    def save(self, directory: Union[str, Path]) -> List[Path]:
        """CSV + 메타 JSON 저장, 쓴 파일 경로 반환"""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for c in range(1, self.n_chains + 1):
            path = directory / chain_file(c)
            self.chain_frame(c).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            written.append(path)
        meta = dict(self.meta)
        meta["iterations"] = self.iterations.tolist()
        meta["nodes"] = list(self.nodes)
        meta["n_chains"] = self.n_chains
        path = directory / META_FILE
        with open(path, "w", encoding="utf-8") as f:
            json.dump(meta, f, ensure_ascii=False, indent=2)
            f.write("\n")
        written.append(path)
        return written

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "McmcSamples":
        """
        저장된 표본 읽기

        Raises:
            DataError: 메타 파일/체인 파일이 없거나 열이 맞지 않을 때
        """
        directory = Path(directory)
        meta_path = directory / META_FILE
        if not meta_path.exists():
            raise DataError(f"❌ 표본 메타 파일이 없습니다: {meta_path}\n먼저 fit을 실행하세요.")
        with open(meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
        nodes = list(meta.get("nodes", []))
        iterations = np.asarray(meta.get("iterations", []), dtype=int)
        chains = []
        for c in range(1, int(meta.get("n_chains", 0)) + 1):
            path = directory / chain_file(c)
            if not path.exists():
                raise DataError(f"체인 파일이 없습니다: {path}")
            frame = pd.read_csv(path, dtype=float, float_precision="round_trip")
            if list(frame.columns) != ["iteration"] + nodes:
                raise DataError(f"체인 파일의 열이 메타 정보와 다릅니다: {path}")
            if not np.array_equal(frame["iteration"].to_numpy(dtype=int), iterations):
                raise DataError(f"체인 파일의 반복 번호가 메타 정보와 다릅니다: {path}")
            chains.append(frame[nodes].to_numpy(dtype=float).reshape(len(iterations), len(nodes)))
        return cls(chains=chains, nodes=nodes, iterations=iterations, meta=meta)

    def subset(self, nodes: Optional[Sequence[str]] = None, chains: Optional[Sequence[int]] = None,
               iterations: Optional[np.ndarray] = None) -> "McmcSamples":
        """노드/체인(1부터)/반복 부분집합"""
        cols = [self.node_index(n) for n in nodes] if nodes is not None else list(range(len(self.nodes)))
        chain_ids = list(chains) if chains is not None else list(range(1, self.n_chains + 1))
        for c in chain_ids:
            if not 1 <= c <= self.n_chains:
                raise DataError(f"체인 번호 {c}이(가) 범위(1..{self.n_chains})를 벗어났습니다")
        rows = np.ones(self.n_stored, dtype=bool) if iterations is None else np.isin(self.iterations, iterations)
        meta = dict(self.meta)
        kept = [self.nodes[j] for j in cols]
        if "node_groups" in meta:
            meta["node_groups"] = {n: g for n, g in meta["node_groups"].items() if n in kept}
        return McmcSamples(chains=[self.chains[c - 1][np.ix_(rows, cols)] for c in chain_ids],
                           nodes=kept, iterations=self.iterations[rows], meta=meta)
