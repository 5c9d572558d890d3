"""
Central logging configuration for advamp.

Log records go to ``logs/advamp.log`` under the working directory and to
stderr. stdout is left to command output (CSV paths, JSON documents).
"""

import logging
import os
from pathlib import Path
import sys
from typing import List, Optional

PACKAGE_LOGGERS = [
    "advamp",
    "advamp.mdp",
    "advamp.envs",
    "advamp.learning",
    "advamp.analysis",
    "advamp.harness",
]

FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
CONSOLE_FORMAT = "%(levelname)s: %(message)s"


def _build_handlers(log_file: Path, level: int) -> List[logging.Handler]:
    file_handler = logging.FileHandler(log_file)
    file_handler.setFormatter(logging.Formatter(FILE_FORMAT))

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT))

    handlers: List[logging.Handler] = [file_handler, console_handler]
    for handler in handlers:
        handler.setLevel(level)
    return handlers


def _reset(logger: logging.Logger, level: int, handlers: List[logging.Handler]) -> None:
    logger.setLevel(level)
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
    for handler in handlers:
        logger.addHandler(handler)


def configure_logging(
    level: int = logging.INFO, log_dir: Optional[Path] = None
) -> bool:
    """
    Configure logging for the entire project.

    Args:
        level: Level applied to the root logger, the package loggers and both handlers
        log_dir: Directory of ``advamp.log``; ``./logs`` by default

    Returns:
        bool: False if the log directory or file could not be set up
    """
    try:
        log_dir = Path(log_dir) if log_dir is not None else Path(os.getcwd()) / "logs"
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / "advamp.log"
        handlers = _build_handlers(log_file, level)

        _reset(logging.getLogger(), level, handlers)
        for name in PACKAGE_LOGGERS:
            package_logger = logging.getLogger(name)
            _reset(package_logger, level, handlers)
            # Prevent propagation to avoid duplicate logs
            package_logger.propagate = False

        logging.debug(f"Logging configured. Log file location: {log_file}")
        return True
    except OSError as e:
        print(f"Error configuring logging: {e}", file=sys.stderr)
        return False
