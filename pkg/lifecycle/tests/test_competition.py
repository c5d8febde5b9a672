import numpy as np
import pytest

from .. import competition, errors, forecast, synth, varx
from ..config import CompetitionConfig, ForecastConfig
from ..types import Outcome


def test_competition_edge():
    neutral = np.array([0.5, 0.5, 0.5])
    assert competition.competition_edge(neutral, np.array([0.8, 0.5, 0.2])) == pytest.approx(0.0)
    assert competition.competition_edge(neutral, np.array([0.8, 0.8, 0.8])) == pytest.approx(0.3)
    weekly = competition.competition_edge(np.zeros((4, 3)), np.ones((4, 3)))
    np.testing.assert_allclose(weekly, np.ones(4))
    with pytest.raises(errors.InvalidArgument):
        competition.competition_edge(np.zeros(2), np.zeros(2))


def test_coefficient_paths_clamp():
    a = competition.coefficient_paths(np.ones(15), delta=0.05)
    assert a[0] == 0.5
    assert a[1] == pytest.approx(0.55)
    assert a[10] == pytest.approx(1.0)
    assert a[14] == 1.0
    b = competition.coefficient_paths(-np.ones(15), delta=0.1, initial=0.3)
    assert b[3] == pytest.approx(0.0)
    assert np.all(b >= 0)


def test_learned_paths_mirror_each_other(rng):
    inputs_i = rng.uniform(0.4, 0.6, (20, 3))
    inputs_j = rng.uniform(0.4, 0.6, (20, 3))
    coefficients = competition.learn_coefficients(inputs_i, inputs_j, CompetitionConfig(delta=0.05))
    np.testing.assert_allclose(coefficients.a_ij + coefficients.a_ji, 1.0)
    assert len(coefficients) == 20


def test_coefficients_validated():
    with pytest.raises(errors.DomainError):
        competition.CompetitionCoefficients(np.array([1.2]), np.array([0.0]))
    with pytest.raises(errors.InvalidArgument):
        competition.CompetitionCoefficients(np.zeros(2), np.zeros(3))
    constant = competition.CompetitionCoefficients.constant(4, 0.2, 0.7)
    np.testing.assert_array_equal(constant.a_ji, [0.7] * 4)


def test_uncoupled_step_matches_single_product(rng):
    for _ in range(50):
        sd_i, sd_j = rng.uniform(0, 1, 2)
        r_i, r_j = rng.uniform(-0.5, 0.5, 2)
        nxt_i, nxt_j = competition.lvc_comp_step(sd_i, sd_j, r_i, r_j, 0.0, 0.0)
        assert nxt_i == forecast.lvc_step(sd_i, r_i)
        assert nxt_j == forecast.lvc_step(sd_j, r_j)


def test_competitor_suppresses_leader():
    alone, _ = competition.lvc_comp_step(0.3, 0.4, 0.2, 0.2, 0.0, 0.0)
    pressed, _ = competition.lvc_comp_step(0.3, 0.4, 0.2, 0.2, 0.8, 0.0)
    assert pressed < alone
    assert pressed == pytest.approx(0.3 * (1 + 0.2 * (1 - 0.3 - 0.8 * 0.4)))


def test_invert_comp_growth_recovers_rates():
    t = np.arange(60)
    r_i = 0.05 * np.sin(t / 6.0) + 0.02
    r_j = 0.04 * np.cos(t / 5.0) + 0.03
    coefficients = competition.CompetitionCoefficients.constant(60, 0.3, 0.6)
    sd_i, sd_j = synth.simulate_pair(r_i, r_j, 0.05, 0.02, 0, coefficients)
    g_i = competition.invert_comp_growth(sd_i, sd_j, coefficients.a_ij)
    g_j = competition.invert_comp_growth(sd_j, sd_i, coefficients.a_ji)
    np.testing.assert_allclose(g_i.values[1:-1], r_i[1:-1], atol=1e-9)
    np.testing.assert_allclose(g_j.values[1:-1], r_j[1:-1], atol=1e-9)


def test_invert_comp_growth_checks_lengths():
    with pytest.raises(errors.InvalidArgument):
        competition.invert_comp_growth(np.ones(3), np.ones(2), np.zeros(3))


def test_carry_forward():
    values = np.array([0.0, 0.8, 0.0, 0.0, 0.2])
    present = np.array([False, True, False, False, True])
    np.testing.assert_allclose(competition.carry_forward(values, present), [0.5, 0.8, 0.8, 0.8, 0.2])


def test_pair_densities_share_one_scale():
    sd_i, sd_j = competition.pair_densities([0, 3, 5, 2, 0, 0], [0, 0, 1, 4, 6, 1], 1.0, 1.0)
    assert sd_i.sum() + sd_j.sum() == pytest.approx(1.0)
    assert sd_i.sum() == pytest.approx(10 / 22)
    with pytest.raises(errors.InsufficientData):
        competition.pair_densities([0, 0], [0, 0], 1.0, 1.0)


def test_pair_density_starts_at_first_sale():
    sd_i, sd_j = competition.pair_densities([4, 3, 5, 2, 1, 1], [0, 0, 0, 4, 6, 1], 0.05, 0.05)
    assert np.all(sd_j[:3] == 0)
    assert np.all(sd_j[3:] > 0)
    assert sd_j.sum() == pytest.approx(11 / 27)
    assert sd_i.sum() == pytest.approx(16 / 27)


LEADER = [0.1, 0.3, 0.5, 0.4, 0.2, 0.1, 0.3, 0.48, 0.5]
COMPETITOR = [0.0, 0.0, 0.1, 0.3, 0.4, 0.3, 0.2, 0.1, 0.1]


def test_detect_survival():
    events = competition.detect_events(LEADER, COMPETITOR, entry_week=2)
    assert events.outcome == Outcome.survival
    assert events.breakeven_week == 4
    assert events.takeover_time == 2
    assert events.leader_peak == 0.5
    assert events.recovery_week == 7
    assert events.recovery_time == 3
    assert events.takeover_volume_pct == pytest.approx(-20.0)
    assert events.to_dict()["outcome"] == "survival"


def test_detect_death_by_horizon():
    events = competition.detect_events(LEADER, COMPETITOR, entry_week=2, horizon=2)
    assert events.outcome == Outcome.death
    assert events.recovery_week == 7


def test_detect_death_without_recovery():
    leader = LEADER[:7]
    events = competition.detect_events(leader, COMPETITOR[:7], entry_week=2, theta=0.9)
    assert events.outcome == Outcome.death
    assert events.recovery_week is None
    assert events.recovery_time is None


def test_detect_undecided():
    events = competition.detect_events([0.5, 0.5, 0.5], [0.0, 0.1, 0.2], entry_week=1)
    assert events.outcome == Outcome.undecided
    assert events.breakeven_week is None
    assert events.takeover_time is None
    assert events.takeover_volume_pct == pytest.approx(-60.0)


def test_breakeven_not_before_entry():
    events = competition.detect_events([0.1, 0.2, 0.3, 0.1], [0.2, 0.0, 0.1, 0.2], entry_week=2)
    assert events.breakeven_week == 3


def test_takeover_volume():
    assert competition.takeover_volume(0.5, 0.75) == pytest.approx(50.0)
    with pytest.raises(errors.DomainError):
        competition.takeover_volume(0.0, 0.3)


def _exogenous_pair(rng, T=60):
    model = varx.VarxModel(
        a=np.array([0.05, 0.04]),
        A=np.array([[[0.3, 0.0], [0.0, 0.3]]]),
        b=np.full((2, 12), 0.01),
        residual_scale=np.zeros(2),
    )
    X = rng.normal(size=(T, 12))
    r = varx.simulate(model, T, X, y0=[1e-4, 1e-4])
    return r, X


def test_neutral_pair_matches_single_product_backtest(rng):
    r, X = _exogenous_pair(rng)
    zero = competition.CompetitionCoefficients.constant(len(r))
    sd_i, sd_j = synth.simulate_pair(r[:, 0], r[:, 1], 0.01, 0.02, 0, zero)
    mask = np.ones(len(r), dtype=bool)
    eval_i, eval_j = competition.backtest_pair_density(
        sd_i, sd_j, zero, X[:, :6], mask, X[:, 6:], mask, coupled=False, ids=("L", "C"))
    single_i = forecast.backtest_density(sd_i, X[:, :6], mask)
    single_j = forecast.backtest_density(sd_j, X[:, 6:], mask)
    assert eval_i.model_name == "LVC-COMP"
    assert eval_i.product_id == "L"
    np.testing.assert_array_equal(eval_i.predictions, single_i.predictions)
    np.testing.assert_array_equal(eval_j.predictions, single_j.predictions)


def test_coupled_backtest_exact_on_noiseless_pair(rng):
    r, X = _exogenous_pair(rng)
    coefficients = competition.CompetitionCoefficients.constant(len(r), 0.3, 0.2)
    sd_i, sd_j = synth.simulate_pair(r[:, 0], r[:, 1], 0.01, 0.02, 0, coefficients)
    eval_i, eval_j = competition.backtest_pair_density(sd_i, sd_j, coefficients, X[:, :6], None, X[:, 6:], None)
    assert eval_i.n_units == eval_j.n_units == len(r) - 20
    assert eval_i.mae < 1e-9
    assert eval_j.mae < 1e-9


def test_pair_backtest_starts_after_entry(rng):
    r, X = _exogenous_pair(rng)
    coefficients = competition.CompetitionCoefficients.constant(len(r), 0.3, 0.2)
    sd_i, sd_j = synth.simulate_pair(r[:, 0], r[:, 1], 0.01, 0.02, 10, coefficients)
    eval_i, _ = competition.backtest_pair_density(sd_i, sd_j, coefficients, X[:, :6], None, X[:, 6:], None,
                                                  config=ForecastConfig(window=20))
    assert eval_i.origins[0] == 29


def test_pair_backtest_checks_calendar():
    zero = competition.CompetitionCoefficients.constant(30)
    with pytest.raises(errors.InvalidArgument):
        competition.backtest_pair_density(np.ones(30), np.ones(29), zero)
    with pytest.raises(errors.InsufficientData):
        competition.backtest_pair_density(np.full(30, 0.1), np.r_[np.zeros(15), np.full(15, 0.1)], zero)


def test_build_pair(review):
    leader = [review("L", "2012-01-02"), review("L", "2012-01-10"), review("L", "2012-01-24", rating=1)]
    competitor = [review("C", "2012-01-17", rating=5), review("C", "2012-01-31")]
    pair = competition.build_pair("L", leader, "C", competitor, label=Outcome.death)
    assert pair.name == "L/C"
    assert pair.entry_week == 2
    assert len(pair) == 5
    assert pair.leader_inputs.shape == (5, 3)
    assert pair.leader_density.sum() + pair.competitor_density.sum() == pytest.approx(1.0)
    assert pair.outcome == Outcome.death
    assert len(pair.coefficients) == 5
    assert pair.leader.epoch_week == pair.competitor.epoch_week


def test_build_pair_notes_early_competitor(review):
    leader = [review("L", "2012-01-16")]
    competitor = [review("C", "2012-01-02")]
    pair = competition.build_pair("L", leader, "C", competitor)
    assert pair.entry_week == 0
    assert any("before the leader" in d for d in pair.diagnostics)


def test_build_pair_needs_reviews(review):
    with pytest.raises(errors.InsufficientData):
        competition.build_pair("L", [], "C", [review("C")])


def test_coefficient_paths_stay_in_unit_interval(rng):
    ce = rng.uniform(-1, 1, 10**6)
    for delta in (0.05, 0.5):
        a = competition.coefficient_paths(ce, delta=delta)
        assert len(a) == len(ce)
        assert a.min() >= 0.0
        assert a.max() <= 1.0
