"""Root logging for command-line runs.

Library modules only call `logging.getLogger(__name__)`; the CLI routes their
records to stderr and, with `--log-file`, to a run log.
"""

import logging
import os
from pathlib import Path
from threading import RLock
from typing import Dict, Optional, Union

from . import errors
from .types import LogLevel, PathLikeT

LOG_FORMAT = "%(asctime)s.%(msecs)03d %(levelname)s %(name)s - %(funcName)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
HANDLER_NAME = "lifecycle"
STDERR = "<stderr>"

_lock: RLock = RLock()


def as_level(level: Union[str, LogLevel, int]) -> int:
    if isinstance(level, int):
        return level
    try:
        return LogLevel(str(level).upper()).to_int()
    except ValueError:
        raise errors.ConfigurationError(f"unknown log level {level!r}") from None


def _installed(root: logging.Logger) -> Dict[str, logging.Handler]:
    return {getattr(h, "baseFilename", STDERR): h for h in root.handlers if h.get_name() == HANDLER_NAME}


def configure_logging(
    level: Union[str, LogLevel, int] = LogLevel.INFO,
    log_file: Optional[PathLikeT] = None,
) -> None:
    """Set the root level and make sure each destination has exactly one handler.

    Calling again only adds destinations that are missing. Records already
    handled by a host process (a test runner, an embedding application) are
    not echoed to stderr a second time.
    """
    root = logging.getLogger()
    formatter = logging.Formatter(LOG_FORMAT, DATE_FORMAT)
    targets = [STDERR]
    if log_file is not None:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        targets.append(os.path.abspath(path))
    with _lock:
        installed = _installed(root)
        for target in targets:
            if target in installed:
                continue
            if target == STDERR and any(h.get_name() != HANDLER_NAME for h in root.handlers):
                # the host process already routes records
                continue
            handler: logging.Handler
            if target == STDERR:
                handler = logging.StreamHandler()
            else:
                handler = logging.FileHandler(target, mode="a", encoding="utf-8")
            handler.set_name(HANDLER_NAME)
            handler.setFormatter(formatter)
            root.addHandler(handler)
        root.setLevel(as_level(level))


def remove_handlers() -> None:
    """Detach and close everything `configure_logging` installed."""
    root = logging.getLogger()
    with _lock:
        for handler in _installed(root).values():
            root.removeHandler(handler)
            handler.close()
