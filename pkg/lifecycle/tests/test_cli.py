import json

import pytest
from typer.testing import CliRunner

from .. import reports
from ..cli import app

runner = CliRunner()

TINY_SCENARIO = {"seed": 2, "horizon_weeks": 40, "n_products": 3, "n_reviews": 600, "pairs_per_preset": 0}


@pytest.fixture(scope="module")
def tiny_market(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    scenario = root / "scenario.json"
    scenario.write_text(json.dumps(TINY_SCENARIO))
    result = runner.invoke(app, ["synth", "--scenario", str(scenario), "--out", str(root / "market")])
    assert result.exit_code == 0, result.output
    return root / "market"


def _inputs(market_dir, *names):
    args = ["--input", str(market_dir / "reviews.jsonl")]
    if "prices" in names:
        args += ["--prices", str(market_dir / "prices.csv")]
    if "pairs" in names:
        args += ["--pairs", str(market_dir / "pairs.csv")]
    return args


def test_unknown_command():
    assert runner.invoke(app, ["fly"]).exit_code == 2


def test_missing_input_file(tmp_path):
    result = runner.invoke(app, ["ingest", "--input", str(tmp_path / "none.jsonl"), "--out", str(tmp_path)])
    assert result.exit_code == 3
    assert "none.jsonl" in result.output


def test_input_is_required(tmp_path):
    assert runner.invoke(app, ["ingest", "--out", str(tmp_path)]).exit_code == 3


def test_invalid_option_value(tiny_market, tmp_path):
    result = runner.invoke(app, ["forecast", *_inputs(tiny_market), "--window", "0", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_synth_outputs(tiny_market):
    assert sorted(p.name for p in tiny_market.iterdir()) == ["pairs.csv", "prices.csv", "reviews.jsonl", "truth.json"]
    truth = json.loads((tiny_market / "truth.json").read_text())
    assert truth["header"]["seed"] == 2
    assert len(truth["data"]["products"]) == 3


def test_synth_refuses_overwrite(tiny_market, tmp_path):
    scenario = tmp_path / "scenario.json"
    scenario.write_text(json.dumps(TINY_SCENARIO))
    args = ["synth", "--scenario", str(scenario), "--out", str(tmp_path / "m")]
    assert runner.invoke(app, args).exit_code == 0
    assert runner.invoke(app, args).exit_code == 4
    assert runner.invoke(app, args + ["--force"]).exit_code == 0
    assert (tmp_path / "m" / "reviews.jsonl").read_bytes() == (tiny_market / "reviews.jsonl").read_bytes()


def test_synth_bad_scenario(tmp_path):
    scenario = tmp_path / "scenario.json"
    scenario.write_text(json.dumps({"horizon": 10}))
    result = runner.invoke(app, ["synth", "--scenario", str(scenario), "--out", str(tmp_path / "m")])
    assert result.exit_code == 3
    assert "horizon" in result.output


def test_ingest(tiny_market, tmp_path):
    result = runner.invoke(app, ["ingest", *_inputs(tiny_market), "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    summary = reports.read_csv_report(tmp_path / "ingest_summary.csv")
    assert len(summary) == 3
    assert reports.read_csv_report(tmp_path / "ingest_rejected.csv").empty
    assert runner.invoke(app, ["ingest", *_inputs(tiny_market), "--out", str(tmp_path)]).exit_code == 4
    assert runner.invoke(app, ["ingest", *_inputs(tiny_market), "--out", str(tmp_path), "--force"]).exit_code == 0


def test_series(tiny_market, tmp_path):
    result = runner.invoke(app, ["series", *_inputs(tiny_market, "prices"), "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    frame = reports.read_csv_report(tmp_path / "series" / "P0000.csv")
    assert "sales_count" in frame.columns
    assert len(frame) > 0


def test_ccf(tiny_market, tmp_path):
    args = ["ccf", *_inputs(tiny_market), "--product", "P0000", "--other", "P0001", "--max-lag", "5",
            "--out", str(tmp_path)]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    frame = reports.read_csv_report(tmp_path / "ccf_P0000_sales_count_P0001_nonavp_count.csv")
    assert len(frame) == 11


def test_ccf_unknown_names(tiny_market, tmp_path):
    base = ["ccf", *_inputs(tiny_market), "--out", str(tmp_path)]
    assert runner.invoke(app, base + ["--product", "nobody"]).exit_code == 3
    assert runner.invoke(app, base + ["--product", "P0000", "--x", "weather"]).exit_code == 3


def test_cluster(tiny_market, tmp_path):
    result = runner.invoke(app, ["cluster", *_inputs(tiny_market), "--k", "2", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "cluster_sales.json").read_text())["data"]
    assert data["outer_family"] == "sales"
    assert (tmp_path / "centroids" / "sales_c0.csv").is_file()


def test_cluster_nonavp_family_default(tiny_market, tmp_path):
    result = runner.invoke(app, ["cluster", *_inputs(tiny_market), "--family", "nonavp", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    data = json.loads((tmp_path / "cluster_nonavp.json").read_text())["data"]
    assert data["outer_family"] == "nonavp"
    assert data["outer"]["k"] == 3


def test_cluster_unknown_family(tiny_market, tmp_path):
    result = runner.invoke(app, ["cluster", *_inputs(tiny_market), "--family", "weather", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_trust(tiny_market, tmp_path):
    result = runner.invoke(app, ["trust", *_inputs(tiny_market, "prices"), "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    for name in ("trust_bins.csv", "trust_scatter.csv", "trust_cubic.csv"):
        assert (tmp_path / name).is_file()
    assert len(reports.read_csv_report(tmp_path / "trust_scatter.csv")) == 3


def test_forecast_is_reproducible(tiny_market, tmp_path):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        args = ["forecast", *_inputs(tiny_market, "prices"), "--min-median-sales", "0", "--out", str(out)]
        result = runner.invoke(app, args)
        assert result.exit_code == 0, result.output
        outputs.append(out)
    mae = reports.read_csv_report(outputs[0] / "forecast_mae.csv")
    assert {"LVC-Sale", "ARIMA"} <= set(mae["model"])
    assert set(mae["model"]) <= {"LVC-Sale", "ARIMA", "Fourier", "Power", "Gaussian"}
    assert "ALL" in set(mae["product_id"])
    for name in ("forecast_mae.csv", "forecast_detail.csv", "forecast_diagnostics.csv"):
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()


def test_forecast_with_nothing_to_score(tiny_market, tmp_path):
    args = ["forecast", *_inputs(tiny_market), "--min-median-sales", "100000", "--out", str(tmp_path)]
    assert runner.invoke(app, args).exit_code == 6


def test_compete_needs_pairs(tiny_market, tmp_path):
    assert runner.invoke(app, ["compete", *_inputs(tiny_market), "--out", str(tmp_path)]).exit_code == 3


@pytest.mark.slow
def test_compete(market_dir, tmp_path):
    args = ["compete", *_inputs(market_dir, "prices", "pairs"), "--out", str(tmp_path)]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    table = reports.read_csv_report(tmp_path / "competition_mae.csv")
    assert "LVC-COMP" in set(table["model"])
    events = json.loads((tmp_path / "competition_events.json").read_text())["data"]
    assert len(events) == 6


@pytest.mark.slow
def test_factors_and_regress(market_dir, tmp_path):
    args = [*_inputs(market_dir, "prices", "pairs"), "--out", str(tmp_path)]
    result = runner.invoke(app, ["factors", *args])
    assert result.exit_code in (0, 6), result.output
    result = runner.invoke(app, ["regress", *args, "--selection", "1se"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "regression.csv").is_file()
