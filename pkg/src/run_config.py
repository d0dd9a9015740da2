"""
실행 설정 로더

JSON 설정 파일을 읽고 점(.) 경로로 값을 꺼냅니다.
명령행 옵션은 override()로 덮어쓰며(옵션 우선), 정규화한 JSON의 SHA-256을
실행 manifest에 기록합니다.
"""

import copy
import hashlib
import json
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Union

from src.errors import ConfigError
from src.model_graph import analysis_model_type
from src.sampler import McmcSettings


SCHEMA: Dict[str, Dict[str, tuple]] = {
    "data": {"path": (str,), "na_token": (str,)},
    "model": {
        "formula": (str,), "formulas": (list,), "random": (str,), "type": (str, dict, list),
        "family": (str,), "link": (str,), "models": (dict,), "no_model": (list, str),
        "auxvars": (str,), "refcats": (str, dict), "contrasts": (str,), "trunc": (dict,),
        "shrinkage": (str, dict), "monitor_params": (dict,), "hyperpars": (dict,),
        "scale_vars": (list, bool), "types": (dict,), "group": (str,),
    },
    "mcmc": {"n_chains": (int,), "n_adapt": (int,), "n_iter": (int,), "thin": (int,),
             "seed": (int,), "inits": (dict, list), "parallel": (int,)},
    "output": {"dir": (str,)},
    "summary": {"quantiles": (list,), "autoburnin": (bool,), "missinfo": (bool,)},
    "predict": {"newdata": (str,), "vars": (str,), "type": (str,), "grid_length": (int,),
                "overrides": (dict,), "quantiles": (list,), "outcome": (str,)},
    "impute": {"m": (int,), "include": (bool,), "start": (int,), "minspace": (int,), "seed": (int,)},
    "plot": {"kinds": (list,), "svg": (bool,)},
}

REQUIRED = ("data.path",)

DEFAULT_OUTPUT_DIR = "runs/latest"


class RunConfig:
    """실행 설정"""

    def __init__(self, data: Optional[Mapping[str, object]] = None, path: Optional[Path] = None):
        self._data: Dict[str, object] = copy.deepcopy(dict(data or {}))
        self.path = path

    @classmethod
    def load(cls, config_path: Union[str, Path]) -> "RunConfig":
        """
        설정 파일 로드

        Raises:
            ConfigError: 파일이 없거나 JSON 형식이 아닐 때
        """
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigError(
                f"❌ 설정 파일이 없습니다: {config_path}\n"
                f"config.example.json을 복사해서 데이터 경로와 모델 수식을 입력하세요."
            )
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"❌ 설정 파일 JSON 오류: {config_path} ({e.lineno}행 {e.colno}열)\n{e.msg}")
        if not isinstance(data, dict):
            raise ConfigError("설정 파일의 최상위 값은 객체여야 합니다")
        return cls(data, path=config_path)

    def get(self, key_path: str, default=None):
        """
        점(.) 구분자로 중첩된 키에 접근

        Examples:
            >>> RunConfig({"mcmc": {"n_iter": 500}}).get("mcmc.n_iter")
            500
        """
        value = self._data
        for key in key_path.split("."):
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default
        return value

    def override(self, key_path: str, value):
        """명령행 값으로 덮어쓰기 (None이면 무시)"""
        if value is None:
            return
        keys = key_path.split(".")
        node = self._data
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"설정 '{key_path}'의 상위 값이 객체가 아닙니다")
        node[keys[-1]] = value

    def to_dict(self) -> Dict[str, object]:
        return copy.deepcopy(self._data)

    def validate(self) -> "RunConfig":
        """
        스키마 검사

        Raises:
            ConfigError: 알 수 없는 키, 잘못된 값 형식, 필수 키 누락
        """
        unknown = sorted(set(self._data) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"❌ 알 수 없는 설정 항목: {', '.join(unknown)}\n사용 가능: {', '.join(SCHEMA)}")
        for section, fields in SCHEMA.items():
            values = self._data.get(section)
            if values is None:
                continue
            if not isinstance(values, dict):
                raise ConfigError(f"설정 '{section}'은(는) 객체여야 합니다")
            for key, value in values.items():
                if key not in fields:
                    raise ConfigError(f"알 수 없는 설정 항목: {section}.{key}")
                if value is None:
                    continue
                expected = fields[key]
                if isinstance(value, bool) and bool not in expected:
                    raise ConfigError(f"설정 '{section}.{key}'의 형식이 잘못되었습니다 (입력: {value!r})")
                if not isinstance(value, expected):
                    names = "/".join(t.__name__ for t in expected)
                    raise ConfigError(f"설정 '{section}.{key}'은(는) {names} 형식이어야 합니다 (입력: {value!r})")
        for key_path in REQUIRED:
            if self.get(key_path) is None:
                raise ConfigError(f"❌ 필수 설정 '{key_path}'이(가) 없습니다")
        return self

    # ===== 모델 / MCMC 설정 변환 =====

    def formulas(self) -> List[str]:
        """
        Raises:
            ConfigError: 수식이 없거나 둘 다 지정된 경우
        """
        formula = self.get("model.formula")
        formulas = self.get("model.formulas")
        if formula and formulas:
            raise ConfigError("model.formula와 model.formulas는 하나만 지정하세요")
        if formula:
            return [formula]
        if formulas:
            if not all(isinstance(f, str) for f in formulas):
                raise ConfigError("model.formulas는 문자열 목록이어야 합니다")
            return list(formulas)
        raise ConfigError("❌ 분석 모델 수식이 없습니다\nmodel.formula에 'y ~ x1 + x2' 형식으로 입력하세요.")

    def model_options(self) -> Dict[str, object]:
        """build_model_graph 옵션"""
        model = dict(self.get("model", {}) or {})
        options: Dict[str, object] = {}
        for key in ("random", "models", "auxvars", "refcats", "contrasts", "trunc", "shrinkage",
                    "monitor_params", "hyperpars", "scale_vars", "types", "group"):
            if model.get(key) is not None:
                options[key] = model[key]
        if model.get("no_model") is not None:
            no_model = model["no_model"]
            options["no_model"] = [no_model] if isinstance(no_model, str) else list(no_model)
        kind = model.get("type")
        if model.get("family") is not None:
            mixed = bool(model.get("random")) or any("|" in f for f in self.formulas())
            kind = analysis_model_type(str(kind or ("glme" if mixed else "glm")), model["family"],
                                       model.get("link"), mixed=mixed)
        elif model.get("link") is not None:
            raise ConfigError("model.link는 model.family와 함께 지정해야 합니다")
        if kind is not None:
            options["model_type"] = kind
        return options

    def mcmc_settings(self) -> McmcSettings:
        mcmc = dict(self.get("mcmc", {}) or {})
        settings = McmcSettings(
            n_chains=mcmc.get("n_chains", 3),
            n_adapt=mcmc.get("n_adapt", 100),
            n_iter=mcmc.get("n_iter", 0),
            thin=mcmc.get("thin", 1),
            seed=mcmc.get("seed"),
            inits=mcmc.get("inits"),
            parallel=mcmc.get("parallel", 1),
        )
        return settings.validate()

    @property
    def output_dir(self) -> Path:
        return Path(self.get("output.dir", DEFAULT_OUTPUT_DIR))

    # ===== 재현 정보 =====

    def canonical_json(self) -> str:
        return json.dumps(self._data, sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    def config_hash(self) -> str:
        """정규화 JSON의 SHA-256"""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()
