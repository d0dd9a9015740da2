"""공용 테스트 데이터"""

import numpy as np
import pytest

from src.data_frame import Dataset
from src.model_graph import build_model_graph
from src.sampler import McmcSettings, run_mcmc


N_ROWS = 60
SBP_FORMULA = "SBP ~ gender + age + WC + alc + creat + smoke"


def make_cross_sectional(n=N_ROWS, seed=2024):
    """
    혈압 예제 데이터

    결측 수: creat 8, WC 6, alc 4, smoke 3 (SBP, gender, age는 완전)
    범주 등장 순서: gender male→female, alc no→yes, smoke never→former→current
    """
    rng = np.random.default_rng(seed)
    gender = np.where(np.arange(n) % 2 == 0, "male", "female")
    age = rng.uniform(20, 80, n).round(1)
    wc = (85 + 0.2 * (age - 50) + rng.normal(0, 8, n)).round(1)
    alc = np.where(rng.uniform(size=n) < 0.4, "yes", "no")
    alc[0], alc[1] = "no", "yes"
    creat = np.exp(rng.normal(0, 0.25, n)).round(3)
    smoke = rng.choice(["never", "former", "current"], n)
    smoke[:3] = ["never", "former", "current"]
    sbp = (110 + 0.4 * (age - 50) + 0.3 * (wc - 85) + 5 * (alc == "yes") + 6 * creat
           + rng.normal(0, 6, n)).round(1)

    def with_missing(values, rows):
        out = list(values.tolist())
        for r in rows:
            out[r] = None
        return out

    return Dataset.from_records({
        "SBP": sbp.tolist(),
        "gender": gender.tolist(),
        "age": age.tolist(),
        "WC": with_missing(wc, [5, 12, 19, 33, 41, 57]),
        "alc": with_missing(alc, [7, 22, 38, 50]),
        "creat": with_missing(creat, [3, 9, 14, 27, 30, 44, 48, 55]),
        "smoke": with_missing(smoke, [10, 25, 46]),
    })


def make_longitudinal(n_groups=15, per_group=4, seed=7):
    """
    id별 반복측정 데이터

    age: 그룹 상수, 2개 그룹 결측 / x: level-1, 5행 결측 / y: 완전
    """
    rng = np.random.default_rng(seed)
    ids = np.repeat(np.arange(1, n_groups + 1), per_group)
    time = np.tile(np.arange(per_group, dtype=float), n_groups)
    age_g = rng.uniform(30, 70, n_groups).round(1)
    b = rng.normal(0, 1.0, n_groups)
    x = rng.normal(0, 1, len(ids)).round(3)
    y = (2 + 0.5 * time + 0.03 * age_g[ids - 1] + 0.8 * x + b[ids - 1]
         + rng.normal(0, 0.5, len(ids))).round(3)
    age = age_g[ids - 1].tolist()
    for g in (3, 11):
        for r in np.flatnonzero(ids == g):
            age[r] = None
    x = x.tolist()
    for r in (2, 9, 17, 30, 44):
        x[r] = None
    return Dataset.from_records({
        "id": ids.tolist(), "time": time.tolist(), "y": y.tolist(), "age": age, "x": x,
    })


@pytest.fixture
def sbp_data():
    return make_cross_sectional()


@pytest.fixture
def long_data():
    return make_longitudinal()


@pytest.fixture(scope="session")
def sbp_fit():
    """작은 적합 결과 (그래프, 표본) - 여러 테스트에서 공유"""
    ds = make_cross_sectional()
    graph = build_model_graph(SBP_FORMULA, ds, {
        "monitor_params": {"analysis_main": True, "other_models": True, "imps": True},
    })
    settings = McmcSettings(n_chains=2, n_adapt=100, n_iter=300, thin=1, seed=11)
    return ds, graph, run_mcmc(graph, settings)
