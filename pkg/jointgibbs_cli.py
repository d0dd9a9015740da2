"""
jointgibbs 명령행 도구

설정 파일(JSON)과 명령행 옵션으로 모델을 적합하고,
저장된 표본으로 요약 / 진단 / 예측 / 다중대체 데이터 내보내기를 수행합니다.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from src import __version__
from src.csv_reader import read_csv
from src.data_frame import Dataset, get_missinfo, md_pattern
from src.diagnostics import SubsetSpec, gelman_rubin, mc_error, summarize
from src.errors import ConfigError, JointGibbsError
from src.model_graph import MODEL_TITLES, ModelGraph, build_model_graph, describe_graph, render_graph_text
from src.postprocess import PLOT_KINDS, emit_plot_data, get_mi_dat, pred_df, predict
from src.run_config import RunConfig
from src.run_logger import RunLogger
from src.samples import McmcSamples
from src.sampler import effective_parallelism, run_mcmc


SAMPLES_DIR = "samples"
MANIFEST_FILE = "manifest.json"


def parse_subset(args) -> Optional[SubsetSpec]:
    """
    --start --end --thin --exclude-chains --subset → SubsetSpec

    Raises:
        ConfigError: 체인 목록/subset JSON 형식 오류
    """
    monitor = None
    if getattr(args, "subset", None):
        try:
            monitor = json.loads(args.subset)
        except json.JSONDecodeError as e:
            raise ConfigError(f"--subset은 JSON 객체여야 합니다 ({e.msg})")
        if not isinstance(monitor, dict):
            raise ConfigError("--subset은 JSON 객체여야 합니다 (예: '{\"analysis_main\": true}')")
    exclude = ()
    if getattr(args, "exclude_chains", None):
        try:
            exclude = tuple(int(c) for c in args.exclude_chains.split(",") if c.strip())
        except ValueError:
            raise ConfigError(f"--exclude-chains는 쉼표로 구분한 체인 번호여야 합니다 (입력: {args.exclude_chains})")
    spec = SubsetSpec(start=getattr(args, "start", None), end=getattr(args, "end", None),
                      thin=getattr(args, "thin", None), exclude_chains=exclude, monitor=monitor)
    if spec == SubsetSpec():
        return None
    return spec


class JointGibbsRun:
    """설정 하나에 대한 명령 실행기"""

    def __init__(self, config: RunConfig, run_dir: Optional[str] = None, verbose: bool = False,
                 quiet: bool = False, log_prefix: str = "jointgibbs"):
        """
        Args:
            config: 실행 설정 (명령행 값이 이미 반영된 것)
            run_dir: 실행 폴더 (None이면 설정의 output.dir)
            verbose: True면 DEBUG 로그 출력
            quiet: True면 콘솔 출력 생략
        """
        self.config = config
        self.run_dir = Path(run_dir) if run_dir else config.output_dir
        self.logger = RunLogger(log_dir=str(self.run_dir / "logs"), prefix=log_prefix,
                                verbose=verbose, quiet=quiet)
        self.log = self.logger.log
        self._data: Optional[Dataset] = None

    # ===== 공통 =====

    def load_data(self) -> Dataset:
        if self._data is None:
            path = self.config.get("data.path")
            if not path or not Path(path).exists():
                raise ConfigError(f"❌ 데이터 파일이 없습니다: {path}\n설정의 data.path를 확인하세요.")
            self._data = read_csv(path, na_token=self.config.get("data.na_token", "NA"),
                                  log_callback=self.log)
            self.log("INFO", f"데이터 로드: {path} ({self._data.n_rows}행, {len(self._data.columns)}열)")
        return self._data

    def build_graph(self) -> ModelGraph:
        return build_model_graph(self.config.formulas(), self.load_data(), self.config.model_options(),
                                 log_callback=self.log)

    def load_samples(self) -> McmcSamples:
        """
        Raises:
            ConfigError: 실행 폴더가 없을 때 (fit을 먼저 실행)
        """
        directory = self.run_dir / SAMPLES_DIR
        if not directory.exists():
            raise ConfigError(f"❌ 실행 폴더에 표본이 없습니다: {directory}\n먼저 fit 명령을 실행하세요.")
        return McmcSamples.load(directory)

    def write_manifest(self, directory: Path, command: str, extra: Optional[Dict[str, object]] = None) -> Path:
        """재현 정보 (명령, 설정 해시, seed, 버전) 기록, 시각 정보 없음"""
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "command": command,
            "version": __version__,
            "config_hash": self.config.config_hash(),
            "seed": self.config.get("mcmc.seed"),
            "config": self.config.to_dict(),
        }
        manifest.update(extra or {})
        path = directory / MANIFEST_FILE
        _write_json(path, manifest)
        return path

    def _extras(self, graph: ModelGraph, missinfo: bool) -> Dict[str, object]:
        ds = self.load_data()
        extras: Dict[str, object] = {
            "n_obs": ds.n_rows,
            "titles": {sm.response: f"Bayesian {MODEL_TITLES.get(sm.family.family, 'model').lower()}"
                       for sm in graph.analysis_models},
        }
        if graph.group_var:
            extras["groups"] = {graph.group_var: graph.n_groups}
        if missinfo:
            grouped = ds.with_grouping(graph.group_var) if graph.group_var else ds
            extras["missinfo"] = get_missinfo(grouped, list(graph.metas.values()))
        return extras

    # ===== 명령 =====

    def cmd_fit(self) -> Path:
        """모델 적합: 표본 CSV, 메타 JSON, 모델 그래프, 경고 로그, manifest"""
        self.config.validate()
        settings = self.config.mcmc_settings()
        graph = self.build_graph()
        self.run_dir.mkdir(parents=True, exist_ok=True)

        _write_json(self.run_dir / "model_graph.json", describe_graph(graph))
        (self.run_dir / "model_graph.txt").write_text(render_graph_text(graph), encoding="utf-8")
        self.log("INFO", "모델 목록:\n" + render_graph_text(graph))

        settings.monitor_params = graph.monitor_params
        if settings.n_iter == 0:
            self.log("INFO", "n_iter = 0: 모델 그래프만 만들고 빈 표본을 저장합니다")
        samples = run_mcmc(graph, settings, log_callback=self.log)
        samples.save(self.run_dir / SAMPLES_DIR)
        self.logger.write_warnings(self.run_dir / "warnings.log")
        self.write_manifest(self.run_dir, "fit", {
            "parallel": effective_parallelism(settings.parallel, settings.n_chains),
            "entropy": samples.meta.get("entropy"),
        })
        self.log("SUCCESS", f"fit 완료: {self.run_dir}")
        return self.run_dir

    def cmd_summary(self, subset: Optional[SubsetSpec] = None, quantiles=None,
                    autoburnin: Optional[bool] = None, missinfo: Optional[bool] = None) -> Path:
        """사후 요약 텍스트/JSON"""
        self.config.validate()
        quantiles = tuple(quantiles or self.config.get("summary.quantiles", [0.025, 0.975]))
        if len(quantiles) != 2:
            raise ConfigError("quantiles는 [하한, 상한] 두 값이어야 합니다")
        autoburnin = self.config.get("summary.autoburnin", False) if autoburnin is None else autoburnin
        missinfo = self.config.get("summary.missinfo", False) if missinfo is None else missinfo
        samples = self.load_samples()
        graph = self.build_graph()
        result = summarize(samples, subset, quantiles=quantiles, autoburnin=autoburnin,
                           extras=self._extras(graph, missinfo), log_callback=self.log)
        out_dir = self.run_dir / "summary"
        out_dir.mkdir(parents=True, exist_ok=True)
        text = result.to_text()
        (out_dir / "summary.txt").write_text(text, encoding="utf-8")
        _write_json(out_dir / "summary.json", result.to_dict())
        self.write_manifest(out_dir, "summary", {"subset": _subset_dict(subset)})
        print(text)
        return out_dir

    def cmd_diagnose(self, subset: Optional[SubsetSpec] = None, autoburnin: bool = False,
                     kinds: Optional[List[str]] = None, svg: Optional[bool] = None) -> Path:
        """Gelman-Rubin, MCSE 표와 trace/density/mcse_ratio 그림 데이터"""
        self.config.validate()
        samples = self.load_samples()
        if subset is not None:
            samples = subset.apply(samples)
        out_dir = self.run_dir / "diagnose"
        out_dir.mkdir(parents=True, exist_ok=True)

        report: Dict[str, object] = {"gelman_rubin": None, "mc_error": None}
        if samples.n_chains > 1:
            gr = gelman_rubin(samples, autoburnin=autoburnin)
            report["gelman_rubin"] = {
                node: {"point": _num(r.point), "upper": _num(r.upper), "error": r.error} for node, r in gr.items()
            }
        else:
            self.log("WARNING", "체인이 하나라 Gelman-Rubin 기준을 계산하지 않습니다")
        mce = mc_error(samples, log_callback=self.log)
        mce.to_csv(out_dir / "mc_error.csv", float_format="%.10g", lineterminator="\n")
        report["mc_error"] = {node: {k: _num(v) for k, v in row.items()} for node, row in mce.iterrows()}
        flagged = mce.index[mce["flag"]].tolist()
        if flagged:
            self.log("WARNING", f"MCSE/SD > 0.05: {', '.join(flagged)}")
        _write_json(out_dir / "diagnostics.json", report)

        kinds = kinds or self.config.get("plot.kinds") or ["trace", "density", "mcse_ratio"]
        svg = self.config.get("plot.svg", False) if svg is None else svg
        for kind in kinds:
            if kind == "imp_distr":
                continue
            emit_plot_data(samples, kind, out_dir / "plots", svg=svg, log_callback=self.log)
        self.write_manifest(out_dir, "diagnose", {"subset": _subset_dict(subset), "autoburnin": autoburnin})
        self.log("SUCCESS", f"diagnose 완료: {out_dir}")
        return out_dir

    def cmd_predict(self, subset: Optional[SubsetSpec] = None, newdata: Optional[str] = None,
                    vars: Optional[str] = None, type: Optional[str] = None, grid_length: Optional[int] = None,
                    overrides: Optional[Dict[str, list]] = None, outcome: Optional[str] = None) -> Path:
        """예측 CSV (newdata 파일 또는 vars 격자)"""
        self.config.validate()
        newdata = newdata or self.config.get("predict.newdata")
        vars = vars or self.config.get("predict.vars")
        type = type or self.config.get("predict.type", "lp")
        grid_length = grid_length or self.config.get("predict.grid_length", 100)
        overrides = overrides if overrides is not None else self.config.get("predict.overrides")
        outcome = outcome or self.config.get("predict.outcome")
        quantiles = tuple(self.config.get("predict.quantiles", [0.025, 0.975]))
        samples = self.load_samples()
        graph = self.build_graph()
        if newdata:
            table = read_csv(newdata, na_token=self.config.get("data.na_token", "NA"), log_callback=self.log)
        elif vars:
            table = pred_df(graph, self.load_data(), vars, grid_length=grid_length, overrides=overrides,
                            outcome=outcome)
        else:
            table = self.load_data()
        result = predict(samples, graph, table, type=type, quantiles=quantiles, subset=subset, outcome=outcome)
        out_dir = self.run_dir / "predict"
        out_dir.mkdir(parents=True, exist_ok=True)
        result.to_csv(out_dir / "predictions.csv")
        self.write_manifest(out_dir, "predict", {"type": type, "newdata": newdata, "vars": vars,
                                                 "subset": _subset_dict(subset)})
        self.log("SUCCESS", f"예측 저장: {out_dir / 'predictions.csv'} ({len(result.fit)}행)")
        return out_dir

    def cmd_impute_export(self, subset: Optional[SubsetSpec] = None, m: Optional[int] = None,
                          include: Optional[bool] = None, start: Optional[int] = None,
                          minspace: Optional[int] = None, seed: Optional[int] = None,
                          svg: Optional[bool] = None) -> Path:
        """다중대체 데이터 CSV + imp_distr 그림 데이터"""
        self.config.validate()
        get = self.config.get
        m = get("impute.m", 10) if m is None else m
        include = get("impute.include", True) if include is None else include
        start = get("impute.start") if start is None else start
        minspace = get("impute.minspace", 50) if minspace is None else minspace
        seed = get("impute.seed") if seed is None else seed
        svg = get("plot.svg", False) if svg is None else svg
        samples = self.load_samples()
        if subset is not None:
            samples = subset.apply(samples)
        graph = self.build_graph()
        ds = self.load_data()
        stack = get_mi_dat(samples, graph, ds, m=m, include=include, start=start, minspace=minspace,
                           seed=seed, log_callback=self.log)
        out_dir = self.run_dir / "impute"
        out_dir.mkdir(parents=True, exist_ok=True)
        stack.to_csv(out_dir / "imputed.csv")
        if stack.picks:
            emit_plot_data(samples, "imp_distr", out_dir / "plots", svg=svg, graph=graph, data=ds,
                           stack=stack, log_callback=self.log)
        self.write_manifest(out_dir, "impute-export", {
            "m": m, "include": include, "start": start, "minspace": minspace, "impute_seed": seed,
            "picks": [list(p) for p in stack.picks],
        })
        self.log("SUCCESS", f"다중대체 데이터 저장: {out_dir / 'imputed.csv'} (사본 {m}개)")
        return out_dir

    def cmd_mdpattern(self, columns: Optional[List[str]] = None) -> Path:
        """결측 패턴 CSV (데이터만 필요)"""
        self.config.validate()
        pattern = md_pattern(self.load_data(), columns)
        out_dir = self.run_dir / "md_pattern"
        out_dir.mkdir(parents=True, exist_ok=True)
        pattern.to_csv(out_dir / "md_pattern.csv")
        self.write_manifest(out_dir, "md-pattern", {"columns": columns})
        print(pattern.to_frame().to_string(index=False))
        return out_dir


def _num(value):
    """JSON용 수치 (NaN → null)"""
    if value is None or isinstance(value, (bool, np.bool_)):
        return None if value is None else bool(value)
    try:
        value = float(value)
    except (TypeError, ValueError):
        return value
    return None if value != value else value


def _subset_dict(subset: Optional[SubsetSpec]) -> Optional[Dict[str, object]]:
    if subset is None:
        return None
    return {"start": subset.start, "end": subset.end, "thin": subset.thin,
            "exclude_chains": list(subset.exclude_chains), "monitor": subset.monitor}


def _write_json(path: Path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2, sort_keys=True, default=_num)
        f.write("\n")


def _add_subset_args(parser: argparse.ArgumentParser):
    parser.add_argument("--start", type=int, default=None, help="첫 반복 번호")
    parser.add_argument("--end", type=int, default=None, help="마지막 반복 번호")
    parser.add_argument("--thin", type=int, default=None, help="추가 thinning (저장 간격의 배수)")
    parser.add_argument("--exclude-chains", default=None, help="제외할 체인 번호 (예: 2,3)")
    parser.add_argument("--subset", default=None, help='노드 선택 JSON (예: \'{"betas": true}\')')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointgibbs",
        description="결합 모형 기반 베이지안 결측 대체 / 회귀 분석",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
사용 예시:
  # 적합 (설정 파일 + 반복 수 덮어쓰기)
  jointgibbs fit --config config.json --n-iter 500 --seed 2020

  # 요약 (101~600 반복, 2번 체인 제외)
  jointgibbs summary --config config.json --start 101 --end 600 --exclude-chains 2

  # 다중대체 데이터 10개
  jointgibbs impute-export --config config.json --m 10 --seed 2019

  # 결측 패턴
  jointgibbs md-pattern --config config.json

종료 코드: 0 정상, 2 설정 오류, 3 데이터 오류, 4 샘플러 오류
병렬 체인 수 상한: 환경 변수 JOINTGIBBS_THREADS
        """,
    )
    parser.add_argument("--version", action="version", version=f"jointgibbs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="설정 JSON 파일")
        p.add_argument("--run-dir", default=None, help="실행 폴더 (기본값: 설정의 output.dir)")
        p.add_argument("--verbose", action="store_true", help="DEBUG 로그 출력")
        p.add_argument("--quiet", action="store_true", help="콘솔 출력 생략")

    p = sub.add_parser("fit", help="모델 적합")
    common(p)
    p.add_argument("--data", default=None, help="데이터 CSV (설정의 data.path 대신)")
    p.add_argument("--n-chains", type=int, default=None)
    p.add_argument("--n-adapt", type=int, default=None)
    p.add_argument("--n-iter", type=int, default=None)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallel", type=int, default=None, help="병렬 체인 수")

    p = sub.add_parser("summary", help="사후 요약")
    common(p)
    _add_subset_args(p)
    p.add_argument("--quantiles", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--autoburnin", action="store_true", default=None)
    p.add_argument("--missinfo", action="store_true", default=None)

    p = sub.add_parser("diagnose", help="수렴 진단 + 그림 데이터")
    common(p)
    _add_subset_args(p)
    p.add_argument("--autoburnin", action="store_true")
    p.add_argument("--kinds", nargs="+", choices=[k for k in PLOT_KINDS if k != "imp_distr"], default=None)
    p.add_argument("--svg", action="store_true", default=None)

    p = sub.add_parser("predict", help="예측")
    common(p)
    _add_subset_args(p)
    p.add_argument("--newdata", default=None, help="예측할 데이터 CSV")
    p.add_argument("--vars", default=None, help="격자 변수 (예: '~ age')")
    p.add_argument("--type", default=None, help="link | lp | response | prob | class")
    p.add_argument("--grid-length", type=int, default=None)
    p.add_argument("--override", action="append", default=None, metavar="VAR=V1,V2",
                   help="격자 값 지정 (예: HEIGHT_M=160,175)")
    p.add_argument("--outcome", default=None)

    p = sub.add_parser("impute-export", help="다중대체 데이터 내보내기")
    common(p)
    _add_subset_args(p)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--no-include", dest="include", action="store_false", default=None)
    p.add_argument("--minspace", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--svg", action="store_true", default=None)

    p = sub.add_parser("md-pattern", help="결측 패턴")
    common(p)
    p.add_argument("--data", default=None)
    p.add_argument("--columns", nargs="+", default=None)
    return parser


def parse_overrides(items: Optional[List[str]]) -> Optional[Dict[str, list]]:
    """['HEIGHT_M=160,175'] → {'HEIGHT_M': [160.0, 175.0]} (수치가 아니면 문자열)"""
    if not items:
        return None
    out: Dict[str, list] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--override는 VAR=값1,값2 형식이어야 합니다 (입력: {item})")
        name, values = item.split("=", 1)
        parsed = []
        for v in values.split(","):
            try:
                parsed.append(float(v))
            except ValueError:
                parsed.append(v)
        out[name.strip()] = parsed
    return out


def run(argv: Optional[List[str]] = None) -> int:
    """명령 실행 후 종료 코드 반환"""
    args = build_parser().parse_args(argv)
    config = RunConfig.load(args.config)
    if args.command in ("fit", "md-pattern"):
        config.override("data.path", args.data)
    if args.command == "fit":
        for key in ("n_chains", "n_adapt", "n_iter", "thin", "seed", "parallel"):
            config.override(f"mcmc.{key}", getattr(args, key))

    runner = JointGibbsRun(config, run_dir=args.run_dir, verbose=args.verbose, quiet=args.quiet,
                           log_prefix=args.command.replace("-", "_"))
    subset = parse_subset(args) if args.command in ("summary", "diagnose", "predict", "impute-export") else None
    if args.command == "fit":
        runner.cmd_fit()
    elif args.command == "summary":
        runner.cmd_summary(subset, quantiles=args.quantiles, autoburnin=args.autoburnin, missinfo=args.missinfo)
    elif args.command == "diagnose":
        runner.cmd_diagnose(subset, autoburnin=args.autoburnin, kinds=args.kinds, svg=args.svg)
    elif args.command == "predict":
        runner.cmd_predict(subset, newdata=args.newdata, vars=args.vars, type=args.type,
                           grid_length=args.grid_length, overrides=parse_overrides(args.override),
                           outcome=args.outcome)
    elif args.command == "impute-export":
        runner.cmd_impute_export(subset, m=args.m, include=args.include, start=args.start,
                                 minspace=args.minspace, seed=args.seed, svg=args.svg)
    elif args.command == "md-pattern":
        runner.cmd_mdpattern(args.columns)
    return 0


def main():
    """메인 함수"""
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        print("\n\n중단됨 (Ctrl+C)")
        sys.exit(1)
    except JointGibbsError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        sys.exit(e.exit_code)


if __name__ == "__main__":
    main()
