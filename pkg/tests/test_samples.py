"""표본 저장소 테스트"""

import json

import numpy as np
import pytest

from src.errors import DataError
from src.samples import META_FILE, McmcSamples


@pytest.fixture
def samples():
    its = np.arange(101, 106)
    chains = [np.column_stack([np.arange(5) + 0.5 * c, np.full(5, c, dtype=float)]) for c in (1, 2)]
    return McmcSamples(chains=chains, nodes=["beta_y[x]", "sigma_y"], iterations=its,
                       meta={"thin": 1, "node_groups": {"beta_y[x]": "betas", "sigma_y": "sigma_main"}})


def test_save_and_load_keep_values_exactly(tmp_path, samples):
    samples.chains[0][0, 0] = 1 / 3
    written = samples.save(tmp_path)
    assert [p.name for p in written] == ["chain_1.csv", "chain_2.csv", META_FILE]
    header = (tmp_path / "chain_1.csv").read_text().splitlines()[0]
    assert header == "iteration,beta_y[x],sigma_y"
    loaded = McmcSamples.load(tmp_path)
    assert loaded.nodes == samples.nodes
    np.testing.assert_array_equal(loaded.iterations, samples.iterations)
    for a, b in zip(loaded.chains, samples.chains):
        np.testing.assert_array_equal(a, b)
    meta = json.loads((tmp_path / META_FILE).read_text())
    assert meta["iterations"] == [101, 102, 103, 104, 105]


def test_load_errors(tmp_path, samples):
    with pytest.raises(DataError):
        McmcSamples.load(tmp_path)
    samples.save(tmp_path)
    (tmp_path / "chain_2.csv").unlink()
    with pytest.raises(DataError):
        McmcSamples.load(tmp_path)


def test_value_lookup(samples):
    assert samples.value_at("beta_y[x]", 2, 103) == 3.0
    assert samples.values("sigma_y").shape == (2, 5)
    with pytest.raises(DataError):
        samples.value_at("beta_y[x]", 3, 103)
    with pytest.raises(DataError):
        samples.value_at("beta_y[x]", 1, 99)
    with pytest.raises(DataError):
        samples.values("tau_y")


def test_subset(samples):
    sub = samples.subset(nodes=["sigma_y"], chains=[2], iterations=np.array([102, 104]))
    assert sub.nodes == ["sigma_y"]
    assert sub.n_chains == 1
    assert sub.iterations.tolist() == [102, 104]
    assert sub.chains[0][:, 0].tolist() == [2.0, 2.0]
    assert sub.node_groups == {"sigma_y": "sigma_main"}
