"""
로깅 유틸리티 (loguru)
======================
콘솔(컬러) sink 와 파일(로테이션) sink 두 개를 구성한다.
시뮬레이션 코드는 모듈 레벨에서 `from fragsim.utils.logger import logger` 로 가져다 쓰고,
sink 구성은 CLI 가 실행 시작 시 한 번만 호출한다.

사용법:
    from fragsim.utils.logger import setup_logger, logger
    setup_logger("logs/fragsim.log", level="DEBUG")
    logger.bind(engine="cassandra").info("run 시작")
"""

import sys
from pathlib import Path
from typing import Optional

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message} | {extra}"


def setup_logger(log_file: Optional[str] = "logs/fragsim.log", level: str = "INFO"):
    """
    Configure the application logger

    Args:
        log_file: Path to the log file (None → console only)
        level: Logging level (DEBUG, INFO, WARNING, ERROR)
    """
    logger.remove()

    # stdout 은 run 요약 라인 전용
    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            str(log_path),
            format=FILE_FORMAT,
            level=level,
            rotation="10 MB",
            retention="30 days",
            compression="zip",
            encoding="utf-8",
        )

    return logger


__all__ = ["logger", "setup_logger"]
