import numpy as np
import pytest

from .. import competition, errors, pipeline, synth
from ..config import ForecastConfig, KscConfig, RunConfig
from ..ingest import PairSpec, PriceTable
from ..types import Role

MODELS = {"LVC-Sale", "ARIMA", "Fourier", "Power", "Gaussian"}


@pytest.fixture(scope="module")
def run_config(market_dir):
    return RunConfig(
        reviews=market_dir / "reviews.jsonl",
        prices=market_dir / "prices.csv",
        pairs=market_dir / "pairs.csv",
        threads=2,
    )


@pytest.fixture(scope="module")
def inputs(run_config):
    return pipeline.load_inputs(run_config, need_pairs=True)


@pytest.fixture(scope="module")
def lifecycles(inputs):
    built, diagnostics = pipeline.build_lifecycles(inputs.records, inputs.prices, threads=2)
    assert not diagnostics
    return built


@pytest.fixture(scope="module")
def pairs(inputs, run_config):
    built, diagnostics = pipeline.build_pairs(inputs, run_config)
    assert not diagnostics
    return built


def test_load_inputs(inputs, market):
    assert set(inputs.records) == set(market.records)
    assert len(inputs.pairs) == len(market.pairs)
    assert inputs.prices.get("P0000") == pytest.approx(market.prices["P0000"])


def test_load_inputs_requirements(run_config):
    with pytest.raises(errors.ConfigurationError):
        pipeline.load_inputs(RunConfig())
    with pytest.raises(errors.ConfigurationError):
        pipeline.load_inputs(RunConfig(reviews=run_config.reviews), need_pairs=True)
    with pytest.raises(errors.MissingPath):
        pipeline.load_inputs(RunConfig(reviews=run_config.reviews.with_name("absent.jsonl")))


def test_build_lifecycles_reports_failures(inputs):
    built, diagnostics = pipeline.build_lifecycles({"A": []}, inputs.prices)
    assert built == {}
    assert diagnostics[0].where == "A"


def test_cluster_patterns_shrinks_k(lifecycles):
    subset = {pid: lifecycles[pid] for pid in sorted(lifecycles)[:3]}
    report = pipeline.cluster_patterns(subset, RunConfig(ksc=KscConfig(k=5)))
    assert report.outer.k == 3
    with pytest.raises(errors.InvalidArgument):
        pipeline.cluster_patterns(subset, RunConfig(), family="price")


def test_forecast_product(lifecycles):
    config = RunConfig()
    evaluations, _ = pipeline.forecast_product(lifecycles["P0000"], config)
    names = [e.model_name for e in evaluations]
    assert names[:2] == ["LVC-Sale", "ARIMA"]
    assert set(names) <= MODELS
    assert all(e.product_id == "P0000" for e in evaluations)


def test_forecast_product_sales_filter(lifecycles):
    config = RunConfig(forecast=ForecastConfig(min_median_sales=1e6))
    evaluations, diagnostics = pipeline.forecast_product(lifecycles["P0000"], config)
    assert evaluations == []
    assert "skipped" in diagnostics[0].message


def test_evaluation_tables(lifecycles):
    subset = {pid: lifecycles[pid] for pid in ("P0000", "P0001")}
    evaluations, _ = pipeline.forecast_batch(subset, RunConfig(threads=2))
    table = pipeline.evaluation_table(evaluations)
    assert list(table.columns) == ["product_id", "model", "n_units", "mae"]
    overall = table[table["product_id"] == "ALL"]
    assert set(overall["model"]) == {e.model_name for e in evaluations}
    lvc = overall[overall["model"] == "LVC-Sale"].iloc[0]
    assert lvc["n_units"] == sum(e.n_units for e in evaluations if e.model_name == "LVC-Sale")
    detail = pipeline.detail_table(evaluations)
    assert len(detail) == sum(e.n_units for e in evaluations)
    assert pipeline.detail_table([]).empty


def test_build_pairs_notes_missing_products(inputs, run_config):
    inputs = pipeline.Inputs(inputs.reviews, inputs.prices, [PairSpec("L000", "nobody")])
    built, diagnostics = pipeline.build_pairs(inputs, run_config)
    assert built == []
    assert "nobody" in diagnostics[0].message


def test_compete_and_report(pairs, run_config):
    results = pipeline.compete_batch(pairs, run_config)
    assert len(results) == len(pairs)
    scored = [r for r in results if ("LVC-COMP", Role.leader) in r.evaluations]
    assert scored
    for r in scored:
        leader = r.evaluations["LVC-COMP", Role.leader]
        competitor = r.evaluations["LVC-COMP", Role.competitor]
        assert leader.origins == competitor.origins
    table = pipeline.competition_table(results)
    assert list(table.columns) == ["model", "outcome", "role", "n", "mae"]
    assert "all" in set(table["outcome"])
    assert pipeline.competition_table([]).empty

    payload = pipeline.events_payload(pairs)
    assert [p["leader_id"] for p in payload] == [p.leader.product_id for p in pairs]
    assert sum(pipeline.outcome_counts(pairs).values()) == len(pairs)


def test_factor_report(pairs, run_config):
    if all(p.outcome.value == "undecided" for p in pairs):
        with pytest.raises(errors.InsufficientData):
            pipeline.factor_report(pairs, run_config)
    else:
        table = pipeline.factor_report(pairs, run_config)
        assert len(table) == 9


@pytest.mark.slow
def test_regression_report(pairs, run_config):
    table, diagnostics = pipeline.regression_report(pairs, run_config)
    assert list(table.columns) == ["response", "method", "cv_mae", "baseline_mae", "n_rows"]
    assert len(table) + len(diagnostics) == 6


def test_diagnostics_frame():
    from ..ingest import Diagnostic

    frame = pipeline.diagnostics_frame([Diagnostic("P1", "bad"), Diagnostic("P2", "worse")])
    assert list(frame.columns) == ["where", "message"]
    assert list(frame["where"]) == ["P1", "P2"]
    assert pipeline.diagnostics_frame([]).empty


@pytest.fixture(scope="module")
def large_market():
    scenario = synth.MarketScenario(seed=11, n_products=50, pairs_per_preset=7)
    return synth.gen_market(scenario, threads=4)


@pytest.mark.slow
def test_lvc_sale_beats_arima_on_generated_market(large_market):
    config = RunConfig(forecast=ForecastConfig(min_median_sales=0.0, curve_families=()), threads=4)
    records = {pid: large_market.records[pid] for pid in large_market.products}
    lifecycles, diagnostics = pipeline.build_lifecycles(records, PriceTable(large_market.prices), threads=4)
    assert not diagnostics
    assert len(lifecycles) == 50
    evaluations, _ = pipeline.forecast_batch(lifecycles, config)
    lvc = {e.product_id: e.mae for e in evaluations if e.model_name == "LVC-Sale"}
    arima = {e.product_id: e.mae for e in evaluations if e.model_name == "ARIMA"}
    assert set(lvc) == set(arima) == set(lifecycles)
    wins = sum(lvc[pid] < arima[pid] for pid in lvc)
    assert wins >= 0.7 * len(lvc)
    assert np.mean(list(lvc.values())) < np.mean(list(arima.values()))


@pytest.mark.slow
def test_lvc_comp_beats_arima_on_generated_pairs(large_market):
    config = RunConfig(threads=4)
    assert len(large_market.pairs) >= 20
    lvc, arima = {}, {}
    for spec in large_market.pairs:
        pair = competition.build_pair(spec.leader_id, large_market.records[spec.leader_id],
                                      spec.competitor_id, large_market.records[spec.competitor_id])
        result = pipeline.compete_pair(pair, config)
        for role in Role:
            if ("LVC-COMP", role) in result.evaluations and ("ARIMA", role) in result.evaluations:
                lvc[pair.name, role] = result.evaluations["LVC-COMP", role].mae
                arima[pair.name, role] = result.evaluations["ARIMA", role].mae
    assert len(lvc) >= 40
    wins = sum(lvc[item] < arima[item] for item in lvc)
    assert wins >= 0.7 * len(lvc)
    assert np.mean(list(lvc.values())) < np.mean(list(arima.values()))
