import concurrent.futures
import dataclasses
import hashlib
import json
import logging
import os
import time
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterable, List, Optional, TypeVar

import numpy as np

log = logging.getLogger(__name__)

THREADS_ENV = "LIFECYCLE_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def getenv_flag(name: str, default: bool = False) -> bool:
    return os.getenv(name, str(default)).lower() in ("1", "true", "yes")


def getenv_int(name: str, default: Optional[int] = None) -> Optional[int]:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    try:
        return int(value)
    except ValueError:
        log.warning("Ignoring non-integer %s=%r", name, value)
        return default


def worker_count(threads: Optional[int] = None) -> int:
    """Pool size: explicit value, else $LIFECYCLE_THREADS, else the CPU count."""
    n = threads or getenv_int(THREADS_ENV) or os.cpu_count() or 1
    return max(1, n)


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """Apply `func` to every item on a thread pool; results keep the input order."""
    items = list(items)
    workers = min(worker_count(threads), max(1, len(items)))
    if workers == 1:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers, thread_name_prefix="lifecycle") as pool:
        return list(pool.map(func, items))


def _jsonable(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def to_jsonable(obj: Any) -> Any:
    """Convert dataclasses, enums, paths and numpy values into plain JSON types."""
    return _jsonable(obj)


def config_hash(config: Any) -> str:
    payload = json.dumps(to_jsonable(config), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@contextmanager
def time_me(logger: Optional[logging.Logger] = None, what: str = "execution"):
    logger = logger or log
    start_t = time.time_ns()
    yield
    total_t_sec = (time.time_ns() - start_t) / 1e9
    logger.debug("%s time: %.2f s", what, total_t_sec)
