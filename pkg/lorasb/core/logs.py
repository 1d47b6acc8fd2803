from .defaults import DEFAULT_LOG_DIR, DEFAULT_LOG_LEVEL, LOG_DIR_ENV_VAR, LOG_LEVEL_ENV_VAR, LOG_RETENTION

from typing import Optional, Union
from loguru import logger
from pathlib import Path
import sys
import os

CONSOLE_FORMAT = "<level>{level: <8}</level> | <cyan>{extra[run]}</cyan> | {message}"
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {thread.name} | {extra[run]} | {message}"

def configure_logging(level :Optional[str]=None, log_dir :Optional[Union[str, Path]]=None):
    """
    Console sink at ``level`` (``LORASB_LOG_LEVEL``, else INFO) and a daily-rotated
    DEBUG file sink under ``log_dir`` (``LORASB_LOG_DIR``, else ./logs).

    Records carry a ``run`` tag; ``logger.contextualize(run=...)`` sets it per
    thread so interleaved arm x seed runs stay readable.
    """
    level = level or os.getenv(LOG_LEVEL_ENV_VAR, DEFAULT_LOG_LEVEL)
    log_dir = Path(log_dir or os.getenv(LOG_DIR_ENV_VAR, DEFAULT_LOG_DIR))
    log_dir.mkdir(exist_ok=True, parents=True)

    logger.remove()
    logger.configure(extra={"run": "-"})
    logger.add(sys.stderr, level=level, format=CONSOLE_FORMAT)
    logger.add(
        log_dir / "lorasb_{time:YYYY-MM-DD}.log",
        level="DEBUG",
        rotation="00:00",
        retention=LOG_RETENTION,
        enqueue=True,
        backtrace=True,
        diagnose=True,
        compression="zip",
        format=FILE_FORMAT
    )

configure_logging()

__all__ = ["logger", "configure_logging"]
