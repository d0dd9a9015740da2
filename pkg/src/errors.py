"""
오류 정의 모듈

CLI 종료 코드와 1:1로 대응하는 예외 계층을 제공합니다.
  - ConfigError  → 2 (설정/수식 오류)
  - DataError    → 3 (데이터 오류)
  - SamplerError → 4 (샘플러 오류)
"""

from typing import Optional


class JointGibbsError(Exception):
    """모든 jointgibbs 오류의 기본 클래스"""

    exit_code = 1


class ConfigError(JointGibbsError):
    """설정 파일, 수식, 옵션 조합 오류"""

    exit_code = 2


class FormulaSyntaxError(ConfigError):
    """수식 구문 오류 (오프셋 포함)"""

    def __init__(self, message: str, text: str = "", offset: int = 0):
        self.text = text
        self.offset = offset
        pointer = ""
        if text:
            pointer = f"\n  {text}\n  {' ' * offset}^"
        super().__init__(f"{message} (offset {offset}){pointer}")


class DataError(JointGibbsError):
    """CSV 읽기, 변수 타입, 결측 구조 관련 오류"""

    exit_code = 3


class SamplerError(JointGibbsError):
    """MCMC 실행 중 오류 (체인/반복/노드 정보 포함)"""

    exit_code = 4

    def __init__(self, message: str, node: Optional[str] = None,
                 chain: Optional[int] = None, iteration: Optional[int] = None):
        self.node = node
        self.chain = chain
        self.iteration = iteration
        super().__init__(message)

    def with_context(self, chain: int, iteration: int) -> "SamplerError":
        """체인/반복 정보를 채운 새 예외 반환"""
        if self.chain is not None:
            return self
        err = SamplerError(self.base_message, node=self.node, chain=chain, iteration=iteration)
        return err

    @property
    def base_message(self) -> str:
        return self.args[0] if self.args else ""

    def __str__(self):
        parts = [self.base_message]
        where = []
        if self.chain is not None:
            where.append(f"chain={self.chain}")
        if self.iteration is not None:
            where.append(f"iteration={self.iteration}")
        if self.node is not None:
            where.append(f"node={self.node}")
        if where:
            parts.append(f"({', '.join(where)})")
        return " ".join(parts)
