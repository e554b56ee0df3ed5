"""
Centralized logging configuration
"""
import sys
from loguru import logger
from src.utils.config import LOG_LEVEL, LOG_FULL_PATH

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{extra[name]}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[name]}:{function}:{line} - {message}"

logger.remove()
logger.configure(extra={"name": "riskcast"})

_console_sink_id = logger.add(sys.stderr, format=CONSOLE_FORMAT, level=LOG_LEVEL, colorize=True)

logger.add(
    LOG_FULL_PATH,
    format=FILE_FORMAT,
    level=LOG_LEVEL,
    rotation="10 MB",
    retention="30 days",
    compression="zip",
    enqueue=True,
)


def set_console_level(level: str) -> None:
    """Swap the stderr sink for one at a different level (CLI --verbose)"""
    global _console_sink_id
    logger.remove(_console_sink_id)
    _console_sink_id = logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True)


def get_logger(name: str):
    """Get a logger instance with the specified name"""
    return logger.bind(name=name)
