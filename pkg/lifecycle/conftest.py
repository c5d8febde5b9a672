import datetime as dt

import numpy as np
import pytest

from . import synth
from .ingest import ReviewRecord


def pytest_addoption(parser):
    parser.addoption("--run-slow", help="Run the end-to-end checks marked slow", action="store_true", default=False)
    parser.addoption("--market-seed", help="Seed of the shared synthetic market", type=int, default=7)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end checks over a generated market")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_review(
    product_id="P1",
    date="2012-01-02",
    rating=5,
    verified=True,
    helpful_votes=0,
    total_votes=0,
    pos_words=0,
    neg_words=0,
    word_count=0,
    comments=0,
) -> ReviewRecord:
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    return ReviewRecord(product_id, date, rating, verified, helpful_votes, total_votes,
                        pos_words, neg_words, word_count, comments)


@pytest.fixture
def review():
    return make_review


@pytest.fixture(scope="session")
def small_scenario(request):
    return synth.MarketScenario(
        seed=request.config.getoption("--market-seed"),
        horizon_weeks=60,
        n_products=6,
        n_reviews=1500,
        pairs_per_preset=2,
    )


@pytest.fixture(scope="session")
def market(small_scenario):
    return synth.gen_market(small_scenario, threads=2)


@pytest.fixture(scope="session")
def market_dir(market, tmp_path_factory):
    out = tmp_path_factory.mktemp("market")
    synth.write_market(market, out)
    return out
