"""
cqms - Logging

Console logging with colour through colorlog, plus an optional plain log file
next to the run's outputs. Every module asks for its logger via get_logger().
"""

import logging
from pathlib import Path
from typing import Optional, Union

import colorlog

ROOT_LOGGER_NAME = "cqms"
LOG_FORMAT = "[%(name)s] [%(levelname)s] %(message)s"


def setup_logging(level: Union[int, str] = logging.INFO,
                  log_file: Optional[Union[str, Path]] = None) -> logging.Logger:
    """
    Configure the package logger hierarchy.

    Calling this again replaces the previous handlers instead of stacking them.

    Args:
        level: Logging level for the package loggers
        log_file: Optional path of a plain-text log file

    Returns:
        The package root logger
    """
    root = logging.getLogger(ROOT_LOGGER_NAME)
    root.setLevel(level)
    root.propagate = False

    for handler in root.handlers[:]:
        root.removeHandler(handler)
        handler.close()

    console = colorlog.StreamHandler()
    console.setFormatter(colorlog.ColoredFormatter(
        "%(log_color)s" + LOG_FORMAT,
        log_colors={
            "DEBUG": "cyan",
            "INFO": "green",
            "WARNING": "yellow",
            "ERROR": "red",
            "CRITICAL": "red,bg_white",
        },
    ))
    root.addHandler(console)

    if log_file is not None:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter("%(asctime)s " + LOG_FORMAT))
        root.addHandler(file_handler)

    root.debug("Logging initialized")
    return root


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger for a module or suite.

    Args:
        name: Short name, e.g. the module or suite name

    Returns:
        Logger in the package hierarchy
    """
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")
