"""CSV and JSON report artifacts.

Every artifact records the tool version, the seed and a hash of the run
configuration: CSV files in a leading `#` comment line, JSON files in a
top-level header object.
"""

import importlib.metadata
import json
import logging
from pathlib import Path
from typing import Any, Dict

import pandas as pd

from . import errors, version
from .types import PathLikeT
from .util import config_hash, to_jsonable

log = logging.getLogger(__name__)

TOOL = "lifecycle"


def tool_version() -> str:
    try:
        return version()
    except importlib.metadata.PackageNotFoundError:
        return "unknown"


def header_fields(seed: int, config: Any) -> Dict[str, Any]:
    return {"tool": TOOL, "version": tool_version(), "seed": seed, "config": config_hash(config)}


def header_line(seed: int, config: Any) -> str:
    h = header_fields(seed, config)
    return f"# {h['tool']} {h['version']} seed={h['seed']} config={h['config']}"


def _target(path: PathLikeT, force: bool) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise errors.OutputExists(str(path))
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_csv_report(df: pd.DataFrame, path: PathLikeT, seed: int, config: Any, force: bool = False) -> Path:
    path = _target(path, force)
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(header_line(seed, config) + "\n")
        df.to_csv(f, index=False, float_format="%.10g", lineterminator="\n")
    log.info("Report written to %s (%d rows)", path, len(df))
    return path


def write_json_report(data: Any, path: PathLikeT, seed: int, config: Any, force: bool = False) -> Path:
    path = _target(path, force)
    payload = {"header": header_fields(seed, config), "data": to_jsonable(data)}
    with path.open("w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")
    log.info("Report written to %s", path)
    return path


def read_csv_report(path: PathLikeT) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise errors.MissingPath(str(path))
    return pd.read_csv(path, comment="#")
