import dataclasses
import json

import numpy as np
import pytest
from scipy import stats

from .. import competition, errors, forecast, ingest, synth
from ..types import Outcome, PairPreset, SpamPattern


def test_simulate_density_follows_the_step(rng):
    r = rng.uniform(-0.1, 0.3, 40)
    sd = synth.simulate_density(r, 0.01)
    assert sd[0] == 0.01
    for t in range(39):
        assert sd[t + 1] == forecast.lvc_step(sd[t], r[t])


def test_neutral_pair_reduces_to_single_products(rng):
    r_i, r_j = rng.uniform(-0.1, 0.3, (2, 50))
    zero = competition.CompetitionCoefficients.constant(50)
    sd_i, sd_j = synth.simulate_pair(r_i, r_j, 0.01, 0.02, 0, zero)
    np.testing.assert_array_equal(sd_i, synth.simulate_density(r_i, 0.01))
    np.testing.assert_array_equal(sd_j, synth.simulate_density(r_j, 0.02))


def test_competitor_enters_on_its_week(rng):
    r_i, r_j = rng.uniform(0.0, 0.3, (2, 30))
    coefficients = competition.CompetitionCoefficients.constant(30, 0.5, 0.5)
    sd_i, sd_j = synth.simulate_pair(r_i, r_j, 0.01, 0.02, 12, coefficients)
    assert np.all(sd_j[:12] == 0)
    assert sd_j[12] == 0.02
    np.testing.assert_array_equal(sd_i[:13], synth.simulate_density(r_i, 0.01)[:13])
    assert sd_i[-1] < synth.simulate_density(r_i, 0.01)[-1]


def test_latent_series_is_stationary(rng):
    x = synth.latent_series(20000, 0.5, rng)
    assert x.shape == (20000, synth.N_EXOG)
    np.testing.assert_allclose(x.mean(axis=0), 0, atol=0.05)
    np.testing.assert_allclose(x.var(axis=0), 1, atol=0.08)
    lag_one = [np.corrcoef(x[1:, k], x[:-1, k])[0, 1] for k in range(synth.N_EXOG)]
    np.testing.assert_allclose(lag_one, 0.5, atol=0.03)


def test_growth_rates_use_last_weeks_latents(rng):
    growth = synth.GrowthSpec(phases=((0, 0.2), (5, -0.1)), exog_coef=(0.1, 0, 0, 0, 0, 0.2), noise=0.0)
    exog = rng.normal(size=(10, 6))
    r = synth.growth_rates(growth, exog, rng)
    assert r[0] == 0.2
    assert r[3] == pytest.approx(0.2 + 0.1 * exog[2, 0] + 0.2 * exog[2, 5])
    assert r[7] == pytest.approx(-0.1 + 0.1 * exog[6, 0] + 0.2 * exog[6, 5])
    np.testing.assert_array_equal(growth.base_rates(7), [0.2] * 5 + [-0.1] * 2)


@pytest.mark.parametrize("growth", [
    synth.GrowthSpec(sd0=0.0),
    synth.GrowthSpec(phases=((1, 0.2),)),
    synth.GrowthSpec(phases=((0, 0.2), (5, 0.1), (5, 0.0))),
    synth.GrowthSpec(exog_coef=(0.1,)),
    synth.GrowthSpec(ar=1.0),
])
def test_growth_spec_validation(growth):
    with pytest.raises(errors.ConfigurationError):
        growth.validate()


def test_expected_inputs():
    rating, helpful, sentiment = synth.ReviewSpec().expected_inputs()
    assert rating == pytest.approx(0.7875)
    assert helpful == pytest.approx((1 - np.exp(-2.0)) * 0.6)
    assert sentiment == pytest.approx(0.75)


@pytest.mark.parametrize("pattern", list(SpamPattern))
def test_spam_profiles_are_distributions(pattern):
    t = np.arange(60)
    sd = np.exp(-0.5 * ((t - 30) / 5.0) ** 2)
    profile = synth.spam_profile(sd, pattern)
    assert profile.sum() == pytest.approx(1.0)
    assert np.all(profile >= 0)


def test_spam_lead_and_follow():
    t = np.arange(60)
    sd = np.exp(-0.5 * ((t - 30) / 3.0) ** 2)
    assert np.argmax(synth.spam_profile(sd, SpamPattern.lead)) == 30 - synth.SPAM_LAG
    assert np.argmax(synth.spam_profile(sd, SpamPattern.follow)) == 30 + synth.SPAM_LAG


def test_weekly_reviews_follow_the_density(small_scenario):
    spec = synth.ProductSpec("X", n_reviews=3000, nonavp_fraction=0.2)
    lifecycle, truth, records = synth.gen_lifecycle(small_scenario, spec, np.random.default_rng(3))
    weeks = np.array([(r.date - small_scenario.start_date).days // 7 for r in records if r.verified])
    observed = np.bincount(weeks, minlength=len(truth.sd)).astype(float)
    expected = 3000 * truth.sd / truth.sd.sum()
    big = expected >= 5
    obs = np.r_[observed[big], observed[~big].sum()]
    exp = np.r_[expected[big], expected[~big].sum()]
    if exp[-1] < 5:
        obs, exp = obs[:-1], exp[:-1]
        obs[np.argmax(exp)] += observed[~big].sum()
        exp[np.argmax(exp)] += expected[~big].sum()
    assert stats.chisquare(obs, exp).pvalue > 1e-3

    n_nonavp = sum(not r.verified for r in records)
    assert n_nonavp == 750
    assert lifecycle.nonavp_fraction == pytest.approx(0.2)
    assert all(1 <= r.rating <= 5 and r.helpful_votes <= r.total_votes for r in records)
    assert [r.date for r in records] == sorted(r.date for r in records)


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("preset", list(PairPreset))
def test_presets_reach_their_outcome(preset, seed):
    scenario = synth.MarketScenario(seed=seed)
    _, truth, lead, comp = synth.gen_pair(scenario, preset, "L", "C", np.random.default_rng(seed))
    assert truth.events.outcome == Outcome(preset.value)
    assert truth.preset == preset
    assert lead and comp
    assert np.all(truth.sd_competitor[:truth.entry_week] == 0)


def test_expected_coefficients_start_even():
    spec = synth.pair_preset(PairPreset.death)
    coefficients = synth.expected_coefficients(spec.leader_reviews, spec.competitor_reviews, spec.entry_week, 60)
    assert len(coefficients) == 60
    assert coefficients.a_ij[0] == 0.5
    # the better competitor presses harder on the leader once it enters
    assert coefficients.a_ij[-1] > 0.5 > coefficients.a_ji[-1]


def test_entry_after_horizon_is_rejected():
    scenario = synth.MarketScenario(horizon_weeks=25)
    with pytest.raises(errors.ConfigurationError):
        synth.gen_pair(scenario, PairPreset.undecided, "L", "C")


def test_market_layout(market, small_scenario):
    assert len(market.products) == small_scenario.n_products
    assert len(market.pairs) == 2 * len(small_scenario.pair_presets)
    assert set(market.records) == set(market.prices)
    patterns = {t.spam for t in market.products.values()}
    assert len(patterns) == min(small_scenario.n_products, len(SpamPattern))
    for pair in market.pairs:
        assert pair.leader_id in market.records and pair.competitor_id in market.records


def test_market_is_deterministic(market, small_scenario):
    again = synth.gen_market(small_scenario, threads=1)
    assert again.records == market.records
    assert again.prices == market.prices
    for a, b in zip(again.pair_truths, market.pair_truths):
        np.testing.assert_array_equal(a.sd_leader, b.sd_leader)


def test_write_market(market, market_dir):
    paths = {name: market_dir / filename for name, filename in synth.MARKET_FILES.items()}
    assert all(p.is_file() for p in paths.values())
    parsed = ingest.parse_reviews_file(paths["reviews"])
    assert not parsed.diagnostics
    assert parsed.accepted == sum(len(r) for r in market.records.values())
    truth = json.loads(paths["truth"].read_text())
    assert truth["header"]["seed"] == market.scenario.seed
    assert len(truth["data"]["pairs"]) == len(market.pairs)
    with pytest.raises(errors.OutputExists):
        synth.write_market(market, market_dir)


def test_scenario_round_trip(tmp_path):
    scenario = synth.MarketScenario(seed=3, horizon_weeks=40, spam_patterns=("lead", "follow"))
    path = tmp_path / "scenario.json"
    synth.dump_scenario(scenario, path)
    assert synth.load_scenario(path) == scenario


@pytest.mark.parametrize("data", [
    {"seeds": 1},
    {"horizon_weeks": 10},
    {"growth": {"sd0": 2.0}},
    {"reviews": {"avp_rating_probs": [0.5, 0.5]}},
    {"spam_patterns": ["loud"]},
    {"start": "2012-13-01"},
])
def test_scenario_rejects_bad_values(data):
    with pytest.raises(errors.ConfigurationError):
        synth.MarketScenario.from_dict(data)


def test_load_scenario_errors(tmp_path):
    with pytest.raises(errors.MissingPath):
        synth.load_scenario(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(errors.ConfigurationError):
        synth.load_scenario(bad)


def test_scenario_override_keeps_other_fields():
    scenario = synth.MarketScenario(n_products=3)
    assert dataclasses.replace(scenario, seed=9).n_products == 3
