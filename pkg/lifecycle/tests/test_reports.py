import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from .. import errors, reports
from ..config import ForecastConfig, RunConfig


def test_csv_report_header(tmp_path):
    df = pd.DataFrame({"product_id": ["A", "B"], "mae": [0.125, 1 / 3]})
    path = reports.write_csv_report(df, tmp_path / "sub" / "mae.csv", 7, ForecastConfig())
    first, second = path.read_text().splitlines()[:2]
    assert first.startswith("# lifecycle ")
    assert "seed=7" in first and "config=" in first
    assert second == "product_id,mae"
    back = reports.read_csv_report(path)
    assert list(back["product_id"]) == ["A", "B"]
    np.testing.assert_allclose(back["mae"], [0.125, 1 / 3], rtol=1e-9)


def test_csv_report_refuses_overwrite(tmp_path):
    path = reports.write_csv_report(pd.DataFrame({"a": [1]}), tmp_path / "a.csv", 0, {})
    with pytest.raises(errors.OutputExists) as e:
        reports.write_csv_report(pd.DataFrame({"a": [2]}), path, 0, {})
    assert "--force" in str(e.value)
    reports.write_csv_report(pd.DataFrame({"a": [2]}), path, 0, {}, force=True)
    assert list(reports.read_csv_report(path)["a"]) == [2]


def test_json_report(tmp_path):
    path = reports.write_json_report({"values": np.arange(3), "missing": None}, tmp_path / "r.json", 3, {"k": 1})
    payload = json.loads(path.read_text())
    assert payload["data"] == {"values": [0, 1, 2], "missing": None}
    assert payload["header"]["tool"] == "lifecycle"
    assert payload["header"]["seed"] == 3
    assert payload["header"]["config"] == reports.header_fields(3, {"k": 1})["config"]


def test_header_depends_on_parameters_only():
    a = RunConfig(out=Path("one"), threads=2)
    b = RunConfig(out=Path("two"), threads=8)
    c = RunConfig(forecast=ForecastConfig(window=10))
    assert reports.header_line(0, a.parameters()) == reports.header_line(0, b.parameters())
    assert reports.header_line(0, a.parameters()) != reports.header_line(0, c.parameters())
    assert reports.header_line(0, a.parameters()) != reports.header_line(1, a.parameters())


def test_read_missing_report(tmp_path):
    with pytest.raises(errors.MissingPath):
        reports.read_csv_report(tmp_path / "none.csv")
