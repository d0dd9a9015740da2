"""
실행 로그 모듈

콘솔 출력과 타임스탬프 로그 파일 기록을 함께 처리합니다.
라이브러리 클래스들은 log_callback(level, message) 형태로 이 로거를 받습니다.
"""

from datetime import datetime
from pathlib import Path
from typing import List, Optional


LEVELS = ("INFO", "SUCCESS", "WARNING", "ERROR", "DEBUG")


class RunLogger:
    """실행 로그 기록"""

    def __init__(self, log_dir: Optional[str] = "logs", prefix: str = "jointgibbs",
                 verbose: bool = False, quiet: bool = False):
        """
        초기화

        Args:
            log_dir: 로그 파일 폴더 (None이면 파일 기록 안함)
            prefix: 로그 파일 이름 접두어
            verbose: True면 DEBUG 로그 출력 (기본값: False)
            quiet: True면 콘솔 출력 생략 (파일 기록은 유지)
        """
        self.verbose = verbose
        self.quiet = quiet
        self.warnings: List[str] = []
        self.log_file = None

        if log_dir is not None:
            log_path = Path(log_dir)
            log_path.mkdir(parents=True, exist_ok=True)
            timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
            self.log_file = log_path / f"{prefix}_{timestamp}.log"

    def log(self, level: str, message: str):
        """
        로그 기록

        Args:
            level: 로그 레벨 (INFO, SUCCESS, WARNING, ERROR, DEBUG)
            message: 메시지
        """
        # DEBUG 로그는 verbose 모드일 때만 출력
        if level == "DEBUG" and not self.verbose:
            return

        if level == "WARNING":
            self.warnings.append(message)

        timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
        log_line = f"[{timestamp}] {level}: {message}"

        if not self.quiet:
            print(log_line)

        if self.log_file is not None:
            with open(self.log_file, 'a', encoding='utf-8') as f:
                f.write(log_line + '\n')

    def __call__(self, level: str, message: str):
        self.log(level, message)

    def write_warnings(self, path):
        """수집된 WARNING 메시지를 파일로 저장"""
        with open(path, 'w', encoding='utf-8') as f:
            for line in self.warnings:
                f.write(line + '\n')
