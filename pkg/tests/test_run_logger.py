"""실행 로그 테스트"""

from src.run_logger import RunLogger


def test_log_file_and_warning_collection(tmp_path, capsys):
    logger = RunLogger(log_dir=str(tmp_path / "logs"), prefix="fit", quiet=True)
    logger.log("INFO", "시작")
    logger("WARNING", "체인 1 발산")
    logger.log("DEBUG", "숨김")
    assert capsys.readouterr().out == ""
    lines = logger.log_file.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert lines[1].endswith("WARNING: 체인 1 발산")
    assert logger.log_file.name.startswith("fit_")

    logger.write_warnings(tmp_path / "warnings.log")
    assert (tmp_path / "warnings.log").read_text(encoding="utf-8") == "체인 1 발산\n"


def test_verbose_prints_debug(capsys):
    logger = RunLogger(log_dir=None, verbose=True)
    logger.log("DEBUG", "세부")
    assert "DEBUG: 세부" in capsys.readouterr().out
    assert logger.log_file is None
