"""
사후 요약 / 수렴 진단 모듈

  - summarize: 평균, 표준편차, 분위수, 꼬리 확률, GR 기준, MCSE/SD
  - gelman_rubin: Brooks-Gelman 보정 PSRF와 97.5% 상한
  - mc_error: 겹치지 않는 batch means MCSE (batch 크기 floor(√n))
반복/체인/노드 부분집합(SubsetSpec)은 모니터 키워드와 같은 규칙을 씁니다.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.errors import ConfigError
from src.monitors import base_name, resolve_monitors
from src.samples import McmcSamples


MCSE_LIMIT = 0.05
MIN_DRAWS = 100


@dataclass
class SubsetSpec:
    """반복 범위, 추가 thinning, 제외 체인, 노드 선택"""
    start: Optional[int] = None
    end: Optional[int] = None
    thin: Optional[int] = None
    exclude_chains: Tuple[int, ...] = ()
    monitor: Optional[Dict[str, object]] = None

    def apply(self, samples: McmcSamples) -> McmcSamples:
        """
        부분집합 표본

        Raises:
            ConfigError: 범위/체인 번호 오류, 빈 선택, 모니터되지 않은 노드
        """
        if self.start is not None and self.end is not None and self.start > self.end:
            raise ConfigError(f"start({self.start})가 end({self.end})보다 큽니다")
        for c in self.exclude_chains:
            if not 1 <= c <= samples.n_chains:
                raise ConfigError(f"제외할 체인 번호 {c}이(가) 범위(1..{samples.n_chains})를 벗어났습니다")
        chains = [c for c in range(1, samples.n_chains + 1) if c not in set(self.exclude_chains)]
        if not chains:
            raise ConfigError("모든 체인이 제외되었습니다")

        its = samples.iterations
        keep = np.ones(len(its), dtype=bool)
        if self.start is not None:
            keep &= its >= self.start
        if self.end is not None:
            keep &= its <= self.end
        if self.thin is not None:
            if self.thin < 1 or self.thin % samples.thin:
                raise ConfigError(f"thin({self.thin})은 저장 간격({samples.thin})의 배수여야 합니다")
            step = self.thin // samples.thin
            positions = np.flatnonzero(keep)
            keep = np.zeros(len(its), dtype=bool)
            keep[positions[::step]] = True

        nodes = None
        if self.monitor is not None:
            nodes = resolve_monitors(samples.node_groups, self.monitor, samples.meta.get("composites"))
            if not nodes:
                raise ConfigError("선택된 노드가 없습니다 (subset 설정을 확인하세요)")
        return samples.subset(nodes=nodes, chains=chains, iterations=its[keep])


def tail_probability(draws) -> float:
    """2·min(P(θ>0), P(θ<0)), 0은 어느 쪽에도 세지 않음"""
    draws = np.asarray(draws, dtype=float).ravel()
    if not len(draws):
        return float("nan")
    return float(2.0 * min(np.mean(draws > 0), np.mean(draws < 0)))


# ===== Gelman-Rubin =====

@dataclass
class GelmanRubin:
    """노드 하나의 PSRF 결과"""
    point: float
    upper: float
    W: float = float("nan")
    B: float = float("nan")
    V: float = float("nan")
    uncorrected: float = float("nan")
    error: Optional[str] = None


def psrf(chains: np.ndarray, confidence: float = 0.95) -> GelmanRubin:
    """
    단변량 PSRF

    W = 체인 내 분산 평균, B = n·(체인 평균의 분산), V̂ = (n−1)/n·W + B/n
    point = sqrt((d+3)/(d+1) · V̂/W), d는 V̂의 자유도 추정치
    upper = sqrt((d+3)/(d+1) · ((n−1)/n + F_{0.975}(m−1, W.df) · B/(nW)))

    Args:
        chains: (체인 수, 반복 수) 배열
    """
    chains = np.asarray(chains, dtype=float)
    m, n = chains.shape
    s2 = chains.var(axis=1, ddof=1)
    xbar = chains.mean(axis=1)
    W = float(s2.mean())
    B = float(n * xbar.var(ddof=1))
    if not W > 0:
        return GelmanRubin(float("nan"), float("nan"), W, B, error="체인 내 분산이 0이라 정의되지 않습니다")
    V = (n - 1) / n * W + B / n
    muhat = xbar.mean()
    var_w = float(s2.var(ddof=1)) / m
    var_b = 2.0 * B ** 2 / (m - 1)
    cov_wb = (n / m) * (_cov(s2, xbar ** 2) - 2.0 * muhat * _cov(s2, xbar))
    var_V = ((n - 1) ** 2 * var_w + var_b + 2.0 * (n - 1) * cov_wb) / n ** 2
    df_adj = 1.0 if not var_V > 0 else ((2.0 * V ** 2 / var_V) + 3.0) / ((2.0 * V ** 2 / var_V) + 1.0)
    r_fixed = (n - 1) / n
    r_random = (B / W) / n
    q = (1.0 + confidence) / 2.0
    if var_w > 0:
        f_quant = float(stats.f.ppf(q, m - 1, 2.0 * W ** 2 / var_w))
    else:
        f_quant = float(stats.chi2.ppf(q, m - 1) / (m - 1))
    point = math.sqrt(df_adj * (r_fixed + r_random))
    upper = math.sqrt(df_adj * (r_fixed + f_quant * r_random))
    return GelmanRubin(point, upper, W, B, V, math.sqrt(V / W))


def _cov(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.cov(a, b, ddof=1)[0, 1])


def gelman_rubin(samples: McmcSamples, subset: Optional[SubsetSpec] = None,
                 autoburnin: bool = False, confidence: float = 0.95) -> Dict[str, GelmanRubin]:
    """
    노드별 PSRF

    Args:
        autoburnin: True면 남은 반복의 앞 절반을 버림

    Raises:
        ConfigError: 체인이 2개 미만이거나 반복이 2개 미만일 때
    """
    if subset is not None:
        samples = subset.apply(samples)
    if samples.n_chains < 2:
        raise ConfigError("Gelman-Rubin 기준에는 체인이 2개 이상 필요합니다")
    start = samples.n_stored // 2 if autoburnin else 0
    if samples.n_stored - start < 2:
        raise ConfigError("Gelman-Rubin 기준에는 반복이 2개 이상 필요합니다")
    return {node: psrf(samples.values(node)[:, start:], confidence) for node in samples.nodes}


# ===== Monte Carlo 오차 =====

def batch_means_mcse(draws) -> float:
    """
    겹치지 않는 batch means MCSE (batch 크기 floor(√n), 남는 꼬리는 버림)

    Raises:
        ConfigError: batch가 2개 미만일 때
    """
    draws = np.asarray(draws, dtype=float).ravel()
    n = len(draws)
    size = int(math.floor(math.sqrt(n))) if n else 0
    n_batches = n // size if size else 0
    if n_batches < 2:
        raise ConfigError(f"batch가 2개 미만입니다 (표본 {n}개)")
    means = draws[: n_batches * size].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def mc_error(samples: McmcSamples, subset: Optional[SubsetSpec] = None, log_callback=None) -> pd.DataFrame:
    """
    노드별 (est, mcse, sd, ratio, flag), 체인은 이어 붙여 계산

    ratio > 0.05이면 flag=True, sd가 0이면 ratio는 NaN
    """
    if subset is not None:
        samples = subset.apply(samples)
    n_total = samples.n_chains * samples.n_stored
    if n_total < MIN_DRAWS and log_callback:
        log_callback("WARNING", f"노드당 표본이 {n_total}개뿐이라 MCSE가 불안정할 수 있습니다")
    rows = []
    for node in samples.nodes:
        pooled = samples.values(node).ravel()
        sd = float(pooled.std(ddof=1)) if len(pooled) > 1 else float("nan")
        mcse = batch_means_mcse(pooled)
        ratio = mcse / sd if sd > 0 else float("nan")
        rows.append({"node": node, "est": float(pooled.mean()), "mcse": mcse, "sd": sd,
                     "ratio": ratio, "flag": bool(ratio > MCSE_LIMIT) if not np.isnan(ratio) else False})
    return pd.DataFrame(rows, columns=["node", "est", "mcse", "sd", "ratio", "flag"]).set_index("node")


# ===== 요약 =====

SECTION_TITLES = [
    (("betas", "alphas"), "Posterior summary:"),
    (("D_main", "D_other"), "Posterior summary of random effects covariance matrix:"),
    (("sigma_main", "sigma_other"), "Posterior summary of residual std. deviation:"),
    (("tau_main", "tau_other"), "Posterior summary of precision parameter:"),
    (("gamma_main", "gamma_other", "delta_main", "delta_other"), "Posterior summary of the intercepts:"),
    (("shape_main", "shape_other"), "Posterior summary of the shape of the Weibull distribution:"),
]


@dataclass
class PosteriorSummary:
    """노드별 요약 표 + 설정 블록"""
    table: pd.DataFrame
    meta: Dict[str, object] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        nodes = {}
        for node, row in self.table.iterrows():
            nodes[node] = {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in row.items()}
        return {"nodes": nodes, "meta": self.meta, "warnings": list(self.warnings)}

    def to_text(self) -> str:
        """출력 형식의 텍스트 (모델별 구역)"""
        q_cols = [c for c in self.table.columns if c.endswith("%")]
        shown = ["Mean", "SD"] + q_cols + ["tail-prob.", "GR-crit", "MCE/SD"]
        frame = self.table.rename(columns={"mean": "Mean", "sd": "SD", "tail_prob": "tail-prob.",
                                           "gr_upper": "GR-crit", "mcse_ratio": "MCE/SD"})
        groups = self.meta.get("node_groups", {})
        models: Dict[str, List[str]] = {}
        for node in frame.index:
            resp = base_name(node).split("_", 1)[-1]
            models.setdefault(resp, []).append(node)

        lines: List[str] = []
        multi = len(models) > 1
        titles = self.meta.get("titles") or {}
        for resp, nodes in models.items():
            if multi:
                title = titles.get(resp, "Bayesian model")
                lines += ["# " + "-" * 69 + " #", f'  {title} for "{resp}"', "# " + "- " * 35 + "#", ""]
            used = set()
            for leaves, title in SECTION_TITLES:
                section = [n for n in nodes if groups.get(n) in leaves]
                if not section:
                    continue
                used.update(section)
                block = frame.loc[section, [c for c in shown if c in frame.columns]]
                if leaves[0] == "betas":
                    block = block.rename(index=lambda n: n[n.index("[") + 1:-1] if "[" in n else n)
                lines += [title, block.to_string(float_format=lambda v: f"{v:.4g}", na_rep=""), ""]
            rest = [n for n in nodes if n not in used]
            if rest:
                block = frame.loc[rest, [c for c in shown if c in frame.columns]]
                lines += ["Posterior summary of other parameters:",
                          block.to_string(float_format=lambda v: f"{v:.4g}", na_rep=""), ""]
            lines.append("")

        meta = self.meta
        lines += ["MCMC settings:",
                  f"Iterations = {meta.get('start')}:{meta.get('end')}",
                  f"Sample size per chain = {meta.get('sample_size')} ",
                  f"Thinning interval = {meta.get('thin')} ",
                  f"Number of chains = {meta.get('n_chains')} ", ""]
        if meta.get("n_obs") is not None:
            lines.append(f"Number of observations: {meta['n_obs']} ")
        if meta.get("groups"):
            lines.append("Number of groups:")
            for name, count in meta["groups"].items():
                lines.append(f" - {name}: {count}")
        missinfo = meta.get("missinfo")
        if missinfo:
            lines += ["", "Number and proportion of complete cases:"]
            cc = pd.DataFrame([{"level": lvl, "#": info["complete_cases"], "%": round(info["complete_pct"], 1)}
                               for lvl, info in missinfo.items()]).set_index("level")
            lines.append(cc.to_string())
            lines += ["", "Number and proportion of missing values:"]
            na_rows = []
            for lvl, info in missinfo.items():
                for var, stat in info["variables"].items():
                    na_rows.append({"variable": var, "level": lvl, "# NA": stat["n_na"],
                                    "% NA": round(stat["pct_na"], 1)})
            if na_rows:
                lines.append(pd.DataFrame(na_rows).set_index("variable").to_string())
        for message in self.warnings:
            lines.append(f"WARNING: {message}")
        return "\n".join(lines).rstrip() + "\n"


def summarize(samples: McmcSamples, subset: Optional[SubsetSpec] = None,
              quantiles: Sequence[float] = (0.025, 0.975), autoburnin: bool = False,
              extras: Optional[Mapping[str, object]] = None, log_callback=None) -> PosteriorSummary:
    """
    사후 요약 (남은 체인을 합쳐 계산)

    Args:
        extras: {"n_obs", "groups", "missinfo"} 등 설정 블록에 붙일 정보

    Raises:
        ConfigError: 선택된 체인/반복이 부족할 때
    """
    if subset is not None:
        samples = subset.apply(samples)
    if samples.n_chains < 1 or samples.n_stored < 2:
        raise ConfigError("요약에는 체인 1개 이상, 반복 2개 이상이 필요합니다")
    q_lo, q_hi = quantiles
    if not 0 <= q_lo <= q_hi <= 1:
        raise ConfigError(f"분위수 {quantiles}가 올바르지 않습니다")

    gr = gelman_rubin(samples, autoburnin=autoburnin) if samples.n_chains > 1 else {}
    mce = mc_error(samples, log_callback=log_callback)
    rows = []
    lo_name, hi_name = f"{q_lo * 100:g}%", f"{q_hi * 100:g}%"
    for node in samples.nodes:
        pooled = samples.values(node).ravel()
        result = gr.get(node)
        rows.append({
            "node": node,
            "mean": float(pooled.mean()),
            "sd": float(pooled.std(ddof=1)),
            lo_name: float(np.quantile(pooled, q_lo)),
            hi_name: float(np.quantile(pooled, q_hi)),
            "tail_prob": tail_probability(pooled),
            "gr_point": result.point if result else float("nan"),
            "gr_upper": result.upper if result else float("nan"),
            "mcse": float(mce.loc[node, "mcse"]),
            "mcse_ratio": float(mce.loc[node, "ratio"]),
        })
    table = pd.DataFrame(rows).set_index("node")
    warnings = []
    flagged = [n for n in samples.nodes if mce.loc[n, "flag"]]
    if flagged:
        warnings.append(f"MCSE/SD > {MCSE_LIMIT}: {', '.join(flagged)} (반복 수를 늘리세요)")
    for node, result in gr.items():
        if result.error:
            warnings.append(f"{node}: {result.error}")
    meta = {
        "start": samples.start, "end": samples.end, "sample_size": samples.n_stored,
        "thin": int(samples.iterations[1] - samples.iterations[0]),
        "n_chains": samples.n_chains,
        "node_groups": samples.node_groups,
        "autoburnin": autoburnin,
    }
    meta.update(dict(extras or {}))
    if log_callback:
        for message in warnings:
            log_callback("WARNING", message)
    return PosteriorSummary(table=table, meta=meta, warnings=warnings)
