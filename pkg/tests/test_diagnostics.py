"""사후 요약 / 수렴 진단 테스트"""

import math

import numpy as np
import pytest

from src.diagnostics import (
    SubsetSpec,
    batch_means_mcse,
    gelman_rubin,
    mc_error,
    psrf,
    summarize,
    tail_probability,
)
from src.errors import ConfigError
from src.samples import McmcSamples


def make_samples(chains, nodes=("beta_y[x]",), start=101, thin=1, groups=None):
    chains = [np.asarray(c, dtype=float).reshape(len(c), -1) for c in chains]
    n = chains[0].shape[0]
    its = np.arange(start, start + n * thin, thin)
    groups = groups or {node: "betas" for node in nodes}
    return McmcSamples(chains=chains, nodes=list(nodes), iterations=its,
                       meta={"thin": thin, "node_groups": groups})


def iid_samples(n_chains=3, n=2000, seed=0, nodes=("beta_y[x]",)):
    rng = np.random.default_rng(seed)
    return make_samples([rng.normal(1.0, 2.0, (n, len(nodes))) for _ in range(n_chains)], nodes)


# ===== 꼬리 확률 =====

@pytest.mark.parametrize("draws, expected", [
    ([1.0, 2.0, 3.0, 4.0], 0.0),
    ([-1.0, 1.0, 2.0, 3.0], 0.5),
    ([-2.0, -1.0, 1.0, 2.0], 1.0),
])
def test_tail_probability(draws, expected):
    assert tail_probability(draws) == expected


# ===== Gelman-Rubin =====

def test_psrf_hand_computed_components():
    result = psrf(np.array([[1, 2, 3, 4], [2, 3, 4, 5]], dtype=float))
    assert result.W == pytest.approx(5 / 3, abs=1e-12)
    assert result.B == pytest.approx(2.0, abs=1e-12)
    assert result.V == pytest.approx(1.75, abs=1e-12)
    assert result.uncorrected == pytest.approx(math.sqrt(1.05), abs=1e-12)
    assert result.upper >= result.point


def test_psrf_of_iid_chains_is_near_one():
    gr = gelman_rubin(iid_samples())["beta_y[x]"]
    assert abs(gr.point - 1.0) < 0.02
    assert gr.upper < 1.05


def test_psrf_detects_separated_chains():
    rng = np.random.default_rng(1)
    samples = make_samples([rng.normal(0, 1, 500), rng.normal(5, 1, 500)])
    assert gelman_rubin(samples)["beta_y[x]"].point > 2.0


def test_psrf_constant_chain_is_undefined():
    result = psrf(np.ones((2, 10)))
    assert math.isnan(result.point)
    assert result.error


def test_gelman_rubin_needs_two_chains():
    with pytest.raises(ConfigError):
        gelman_rubin(iid_samples(n_chains=1))


def test_autoburnin_drops_first_half():
    rng = np.random.default_rng(2)
    # 앞 절반만 체인마다 다른 값
    chains = [np.concatenate([np.full(100, 10.0 * c), rng.normal(0, 1, 100)]) for c in range(2)]
    samples = make_samples(chains)
    assert gelman_rubin(samples)["beta_y[x]"].point > 1.2
    assert gelman_rubin(samples, autoburnin=True)["beta_y[x]"].point < 1.1


# ===== MCSE =====

def test_batch_means_on_iid_draws():
    draws = np.random.default_rng(3).normal(0, 2.0, 10000)
    assert batch_means_mcse(draws) == pytest.approx(2.0 / 100, rel=0.3)


def test_batch_means_drops_tail_and_needs_two_batches():
    # n=10 → 크기 3 batch 3개, 마지막 값은 버림
    draws = np.array([0, 0, 0, 3, 3, 3, 6, 6, 6, 1000], dtype=float)
    assert batch_means_mcse(draws) == pytest.approx(np.std([0, 3, 6], ddof=1) / math.sqrt(3))
    with pytest.raises(ConfigError):
        batch_means_mcse([1.0, 2.0, 3.0])


def test_mc_error_pools_chains_and_flags_ratio():
    table = mc_error(iid_samples(nodes=("beta_y[x]", "sigma_y")))
    assert list(table.columns) == ["est", "mcse", "sd", "ratio", "flag"]
    assert table.loc["beta_y[x]", "ratio"] < 0.05
    assert not table["flag"].any()


def test_mc_error_warns_once_for_short_runs():
    messages = []
    mc_error(iid_samples(n_chains=2, n=30, nodes=("a", "b")), log_callback=lambda lv, m: messages.append(lv))
    assert messages == ["WARNING"]


# ===== 부분집합 =====

def test_subset_start_end_thin_and_chains():
    samples = iid_samples(n=20)
    sub = SubsetSpec(start=105, end=114, thin=2, exclude_chains=(2,)).apply(samples)
    assert sub.iterations.tolist() == [105, 107, 109, 111, 113]
    assert sub.n_chains == 2


@pytest.mark.parametrize("spec", [
    SubsetSpec(start=120, end=110),
    SubsetSpec(exclude_chains=(4,)),
    SubsetSpec(exclude_chains=(1, 2, 3)),
    SubsetSpec(monitor={"alphas": True}),
])
def test_invalid_subsets(spec):
    with pytest.raises(ConfigError):
        spec.apply(iid_samples(n=20))


def test_subset_thin_must_be_multiple_of_stored_thin():
    samples = make_samples([np.arange(10.0), np.arange(10.0)], thin=5)
    with pytest.raises(ConfigError):
        SubsetSpec(thin=3).apply(samples)
    assert SubsetSpec(thin=10).apply(samples).n_stored == 5


def test_subset_by_monitor_keyword():
    samples = iid_samples(n=20, nodes=("beta_y[x]", "sigma_y"))
    samples.meta["node_groups"] = {"beta_y[x]": "betas", "sigma_y": "sigma_main"}
    sub = SubsetSpec(monitor={"sigma_main": True}).apply(samples)
    assert sub.nodes == ["sigma_y"]


# ===== 요약 =====

def test_summarize_table_and_meta():
    samples = iid_samples(nodes=("beta_y[(Intercept)]", "beta_y[x]"))
    summary = summarize(samples, extras={"n_obs": 50})
    table = summary.table
    assert list(table.columns) == ["mean", "sd", "2.5%", "97.5%", "tail_prob", "gr_point",
                                   "gr_upper", "mcse", "mcse_ratio"]
    assert table.loc["beta_y[x]", "mean"] == pytest.approx(1.0, abs=0.1)
    assert table.loc["beta_y[x]", "sd"] == pytest.approx(2.0, rel=0.05)
    meta = summary.meta
    assert (meta["start"], meta["end"], meta["sample_size"], meta["thin"], meta["n_chains"]) == \
        (101, 2100, 2000, 1, 3)
    assert meta["n_obs"] == 50


def test_summary_text_layout():
    samples = iid_samples(nodes=("beta_y[(Intercept)]", "beta_y[x]"))
    text = summarize(samples, extras={"n_obs": 50}).to_text()
    assert "Posterior summary:" in text
    assert "Iterations = 101:2100" in text
    assert "Sample size per chain = 2000" in text
    assert "Number of observations: 50" in text
    assert "(Intercept)" in text


def test_summary_single_chain_has_no_gr():
    summary = summarize(iid_samples(n_chains=1, n=200))
    assert math.isnan(summary.table.loc["beta_y[x]", "gr_point"])
    assert summary.to_dict()["nodes"]["beta_y[x]"]["gr_point"] is None


def test_summary_custom_quantiles():
    summary = summarize(iid_samples(), quantiles=(0.1, 0.9))
    assert {"10%", "90%"} <= set(summary.table.columns)
    with pytest.raises(ConfigError):
        summarize(iid_samples(), quantiles=(0.9, 0.1))
