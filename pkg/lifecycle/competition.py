"""Two-product competition: coupled density dynamics, learned competition
coefficients, paired backtests and takeover/recovery events.

For a leader i and a competitor j on a shared calendar,

    SD_i(t+1) = SD_i(t) (1 + r_i(t) (1 - SD_i(t)/K_i - a_ij(t) SD_j(t)/K_i))

and symmetrically for j. The coefficient a_ij(t) drifts by `delta` times the
weekly competition edge of j over i, starting from an even 0.5.
"""

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import errors, kde
from .config import CompetitionConfig, ForecastConfig
from .forecast import (
    ForecastEvaluation,
    GrowthSeries,
    evaluation_origins,
    first_valid_index,
    predict_growth,
)
from .ingest import ReviewRecord
from .series import (
    ProductLifecycle,
    build_lifecycle,
    is_any,
    normalized_rating,
    review_helpfulness,
    review_sentiment,
    week_start,
    weekly_mean,
)
from .types import Outcome

log = logging.getLogger(__name__)

# rating, helpfulness, sentiment
EDGE_INPUTS = ("rating", "helpfulness", "sentiment")
NEUTRAL_INPUT = 0.5


@dataclass(frozen=True, eq=False)
class CompetitionCoefficients:
    a_ij: np.ndarray  # suppression of the leader by the competitor
    a_ji: np.ndarray  # suppression of the competitor by the leader

    def __post_init__(self):
        for name in ("a_ij", "a_ji"):
            a = np.asarray(getattr(self, name), dtype=float)
            if np.any(a < 0) or np.any(a > 1):
                raise errors.DomainError(f"competition coefficients must lie in [0, 1] ({name})")
            object.__setattr__(self, name, a)
        if self.a_ij.shape != self.a_ji.shape:
            raise errors.InvalidArgument("coefficient paths differ in length")

    def __len__(self) -> int:
        return len(self.a_ij)

    @classmethod
    def constant(cls, length: int, a_ij: float = 0.0, a_ji: float = 0.0) -> "CompetitionCoefficients":
        return cls(np.full(length, float(a_ij)), np.full(length, float(a_ji)))


@dataclass(frozen=True)
class CompetitionEvents:
    entry_week: int
    outcome: Outcome
    breakeven_week: Optional[int] = None
    takeover_time: Optional[int] = None
    recovery_week: Optional[int] = None
    recovery_time: Optional[int] = None
    leader_peak: float = 0.0
    competitor_peak: float = 0.0
    takeover_volume_pct: Optional[float] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "entry_week": self.entry_week,
            "outcome": self.outcome.value,
            "breakeven_week": self.breakeven_week,
            "takeover_time": self.takeover_time,
            "recovery_week": self.recovery_week,
            "recovery_time": self.recovery_time,
            "leader_peak": self.leader_peak,
            "competitor_peak": self.competitor_peak,
            "takeover_volume_pct": self.takeover_volume_pct,
        }


@dataclass(frozen=True, eq=False)
class CompetitionPair:
    """A leader and its competitor on one absolute weekly calendar."""

    leader: ProductLifecycle
    competitor: ProductLifecycle
    entry_week: int
    leader_density: np.ndarray
    competitor_density: np.ndarray
    leader_inputs: np.ndarray  # (weeks x 3) rating, helpfulness, sentiment
    competitor_inputs: np.ndarray
    coefficients: CompetitionCoefficients
    events: CompetitionEvents
    label: Optional[Outcome] = None
    diagnostics: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.leader_density)

    @property
    def name(self) -> str:
        return f"{self.leader.product_id}/{self.competitor.product_id}"

    @property
    def outcome(self) -> Outcome:
        """The manifest label when given, else the detected one."""
        return self.label or self.events.outcome

    @property
    def origin(self) -> dt.date:
        return self.leader.origin


def competition_edge(inputs_i: np.ndarray, inputs_j: np.ndarray) -> Union[float, np.ndarray]:
    """Mean advantage of j over i across rating, helpfulness and sentiment.

    Inputs are [0, 1]-normalized triples, or (weeks x 3) matrices of them.
    """
    inputs_i = np.asarray(inputs_i, dtype=float)
    inputs_j = np.asarray(inputs_j, dtype=float)
    if inputs_i.shape != inputs_j.shape or inputs_i.shape[-1] != len(EDGE_INPUTS):
        raise errors.InvalidArgument(f"edge inputs must be matching (..., 3) arrays, got {inputs_i.shape} and {inputs_j.shape}")
    ce = (inputs_j - inputs_i).sum(axis=-1) / 3.0
    return float(ce) if ce.ndim == 0 else ce


def update_coefficient(a: float, ce: float, delta: float = 0.05) -> float:
    return min(max(a + ce * delta, 0.0), 1.0)


def coefficient_paths(ce: Sequence[float], delta: float = 0.05, initial: float = 0.5) -> np.ndarray:
    """a(0) = initial and a(t+1) = clamp(a(t) + CE(t) delta); same length as `ce`."""
    ce = np.asarray(ce, dtype=float)
    a = np.empty(len(ce))
    if len(ce) == 0:
        return a
    a[0] = initial
    for t in range(1, len(ce)):
        a[t] = update_coefficient(a[t - 1], ce[t - 1], delta)
    return a


def learn_coefficients(
    inputs_i: np.ndarray,
    inputs_j: np.ndarray,
    config: Optional[CompetitionConfig] = None,
) -> CompetitionCoefficients:
    config = config or CompetitionConfig()
    ce = competition_edge(inputs_i, inputs_j)
    return CompetitionCoefficients(
        coefficient_paths(ce, config.delta, config.initial_coefficient),
        coefficient_paths(-ce, config.delta, config.initial_coefficient),
    )


def lvc_comp_step(
    sd_i: float,
    sd_j: float,
    r_i: float,
    r_j: float,
    a_ij: float,
    a_ji: float,
    capacity_i: float = 1.0,
    capacity_j: float = 1.0,
) -> Tuple[float, float]:
    """Advance both densities one week from the same week-t state."""
    nxt_i = sd_i * (1 + r_i * (1 - sd_i / capacity_i - a_ij * sd_j / capacity_i))
    nxt_j = sd_j * (1 + r_j * (1 - sd_j / capacity_j - a_ji * sd_i / capacity_j))
    return min(max(nxt_i, 0.0), capacity_i), min(max(nxt_j, 0.0), capacity_j)


def invert_comp_growth(
    sd_i: Sequence[float],
    sd_j: Sequence[float],
    a_ij: Sequence[float],
    capacity: float = 1.0,
    epsilon: float = 1e-4,
    floor: float = 1e-8,
) -> GrowthSeries:
    """Growth rates of product i under competition; masked where the bracket vanishes."""
    sd_i = np.asarray(sd_i, dtype=float)
    sd_j = np.asarray(sd_j, dtype=float)
    a_ij = np.asarray(a_ij, dtype=float)
    T = len(sd_i)
    if len(sd_j) != T or len(a_ij) != T:
        raise errors.InvalidArgument("densities and coefficients must share one calendar")
    values = np.zeros(T)
    mask = np.zeros(T, dtype=bool)
    if T == 0:
        return GrowthSeries(values, mask)
    bracket = 1 - sd_i[:-1] / capacity - a_ij[:-1] * sd_j[:-1] / capacity
    ok = (sd_i[:-1] >= floor) & (np.abs(bracket) >= floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (sd_i[1:] / sd_i[:-1] - 1) / bracket
    values[:-1] = np.where(ok, r, 0.0)
    mask[:-1] = ok
    values[0], mask[0] = epsilon, True
    return GrowthSeries(values, mask)


def carry_forward(values: np.ndarray, present: np.ndarray, initial: float = NEUTRAL_INPUT) -> np.ndarray:
    """Fill weeks without reviews with the last observed value, `initial` before the first."""
    idx = np.where(present, np.arange(len(values)), -1)
    idx = np.maximum.accumulate(idx) if len(idx) else idx
    return np.where(idx >= 0, values[np.clip(idx, 0, None)], initial)


def edge_inputs(records: Sequence[ReviewRecord], week_span: int, origin: dt.date) -> np.ndarray:
    """Weekly (rating, helpfulness, sentiment) of all reviews, each in [0, 1]."""
    columns = []
    for value in (normalized_rating, review_helpfulness, review_sentiment):
        means, present = weekly_mean(records, value, is_any, week_span, origin)
        columns.append(carry_forward(means, present))
    return np.column_stack(columns)


def _from_first_sale(counts: np.ndarray, smoothed: np.ndarray) -> np.ndarray:
    """Zero the smoothing tail before the first sale, keeping the count total."""
    sold = np.flatnonzero(counts > 0)
    out = smoothed.copy()
    if not len(sold):
        return out
    out[:sold[0]] = 0.0
    kept = out.sum()
    return out * (counts.sum() / kept) if kept > 0 else out


def pair_densities(
    leader_counts: Sequence[float],
    competitor_counts: Sequence[float],
    leader_bandwidth: float,
    competitor_bandwidth: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Smoothed weekly sales of both products divided by their joint total.

    Neither density leaks into the weeks before that product's first sale.
    """
    leader_counts = np.asarray(leader_counts, dtype=float)
    competitor_counts = np.asarray(competitor_counts, dtype=float)
    total = leader_counts.sum() + competitor_counts.sum()
    if total <= 0:
        raise errors.InsufficientData("sales of the pair", 1, 0)
    return (
        _from_first_sale(leader_counts, kde.smooth(leader_counts, leader_bandwidth)) / total,
        _from_first_sale(competitor_counts, kde.smooth(competitor_counts, competitor_bandwidth)) / total,
    )


def _first_at_or_above(x: np.ndarray, level: float, start: int) -> Optional[int]:
    hits = np.flatnonzero(x[start:] >= level)
    return int(start + hits[0]) if len(hits) else None


def takeover_volume(peak_first: float, peak_second: float) -> float:
    """Percent by which the second product's peak exceeds the first's."""
    if not peak_first > 0:
        raise errors.DomainError(f"first peak must be positive, got {peak_first}")
    return (peak_second / peak_first - 1) * 100


def detect_events(
    leader: Sequence[float],
    competitor: Sequence[float],
    entry_week: int,
    theta: float = 0.9,
    horizon: Optional[int] = None,
) -> CompetitionEvents:
    """Breakeven, takeover and recovery of a leader against a competitor entering at `entry_week`.

    The leader survives if, after the breakeven week, it climbs back to `theta`
    times its peak up to breakeven within `horizon` weeks (any time if None).
    """
    leader = np.asarray(leader, dtype=float)
    competitor = np.asarray(competitor, dtype=float)
    if leader.shape != competitor.shape:
        raise errors.InvalidArgument("leader and competitor densities must share one calendar")
    competitor_peak = float(competitor.max()) if len(competitor) else 0.0
    ahead = (competitor >= leader) & (competitor > 0)
    ahead[:max(entry_week, 0)] = False
    hits = np.flatnonzero(ahead)
    if not len(hits):
        leader_peak = float(leader.max()) if len(leader) else 0.0
        volume = takeover_volume(leader_peak, competitor_peak) if leader_peak > 0 else None
        return CompetitionEvents(entry_week, Outcome.undecided, leader_peak=leader_peak,
                                 competitor_peak=competitor_peak, takeover_volume_pct=volume)

    breakeven = int(hits[0])
    leader_peak = float(leader[:breakeven + 1].max())
    recovery_week = _first_at_or_above(leader, theta * leader_peak, breakeven + 1) if leader_peak > 0 else None
    recovery_time = recovery_week - breakeven if recovery_week is not None else None
    survived = recovery_time is not None and (horizon is None or recovery_time <= horizon)
    return CompetitionEvents(
        entry_week=entry_week,
        outcome=Outcome.survival if survived else Outcome.death,
        breakeven_week=breakeven,
        takeover_time=breakeven - entry_week,
        recovery_week=recovery_week,
        recovery_time=recovery_time,
        leader_peak=leader_peak,
        competitor_peak=competitor_peak,
        takeover_volume_pct=takeover_volume(leader_peak, competitor_peak) if leader_peak > 0 else None,
    )


def build_pair(
    leader_id: str,
    leader_records: Sequence[ReviewRecord],
    competitor_id: str,
    competitor_records: Sequence[ReviewRecord],
    leader_price: Optional[float] = None,
    competitor_price: Optional[float] = None,
    label: Optional[Outcome] = None,
    config: Optional[CompetitionConfig] = None,
) -> CompetitionPair:
    """Align two review streams on absolute weeks and derive everything a pair needs."""
    config = config or CompetitionConfig()
    if not leader_records or not competitor_records:
        raise errors.InsufficientData(f"reviews of pair {leader_id}/{competitor_id}", 1, 0)
    first = min(min(r.date for r in leader_records), min(r.date for r in competitor_records))
    last = max(max(r.date for r in leader_records), max(r.date for r in competitor_records))
    origin = week_start(first)
    span = (last - origin).days // 7 + 1
    entry_week = (min(r.date for r in competitor_records) - origin).days // 7

    leader = build_lifecycle(leader_id, leader_records, leader_price, origin, span)
    competitor = build_lifecycle(competitor_id, competitor_records, competitor_price, origin, span)
    sd_i, sd_j = pair_densities(leader.sales_count.values, competitor.sales_count.values,
                                leader.bandwidth, competitor.bandwidth)
    inputs_i = edge_inputs(leader.reviews, span, origin)
    inputs_j = edge_inputs(competitor.reviews, span, origin)
    events = detect_events(sd_i, sd_j, entry_week, config.theta, config.horizon)

    diagnostics = []
    if min(r.date for r in competitor_records) < min(r.date for r in leader_records):
        diagnostics.append("competitor reviewed before the leader")
    if label is not None and label != events.outcome:
        diagnostics.append(f"manifest label {label} overrides detected {events.outcome}")
    for message in diagnostics:
        log.info("Pair %s/%s: %s", leader_id, competitor_id, message)

    return CompetitionPair(
        leader=leader,
        competitor=competitor,
        entry_week=entry_week,
        leader_density=sd_i,
        competitor_density=sd_j,
        leader_inputs=inputs_i,
        competitor_inputs=inputs_j,
        coefficients=learn_coefficients(inputs_i, inputs_j, config),
        events=events,
        label=label,
        diagnostics=diagnostics,
    )


def backtest_pair_density(
    sd_i: Sequence[float],
    sd_j: Sequence[float],
    coefficients: CompetitionCoefficients,
    exog_i: Optional[np.ndarray] = None,
    exog_mask_i: Optional[np.ndarray] = None,
    exog_j: Optional[np.ndarray] = None,
    exog_mask_j: Optional[np.ndarray] = None,
    config: Optional[ForecastConfig] = None,
    coupled: bool = True,
    ids: Tuple[str, str] = ("", ""),
) -> Tuple[ForecastEvaluation, ForecastEvaluation]:
    """One-week-ahead forecasts of both densities over sliding windows.

    Coupled mode regresses both growth rates jointly on all twelve allied
    series; otherwise each product gets its own one-dimensional fit.
    """
    config = config or ForecastConfig()
    sd_i = np.asarray(sd_i, dtype=float)
    sd_j = np.asarray(sd_j, dtype=float)
    if len(sd_i) != len(sd_j) or len(coefficients) != len(sd_i):
        raise errors.InvalidArgument("pair series must share one calendar")
    a_ij, a_ji = coefficients.a_ij, coefficients.a_ji
    g_i = invert_comp_growth(sd_i, sd_j, a_ij, config.capacity, config.epsilon, config.floor)
    g_j = invert_comp_growth(sd_j, sd_i, a_ji, config.capacity, config.epsilon, config.floor)
    first = max(first_valid_index(sd_i, config.floor), first_valid_index(sd_j, config.floor))
    origins = evaluation_origins(len(sd_i), config.window, first)
    if len(origins) < 1:
        raise errors.InsufficientData(f"overlapping weeks of pair {ids[0]}/{ids[1]}", first + config.window + 1, len(sd_i))

    joint_r = np.column_stack([g_i.values, g_j.values])
    joint_mask = np.column_stack([g_i.mask, g_j.mask])
    joint_exog = joint_exog_mask = None
    if coupled and exog_i is not None and exog_j is not None:
        joint_exog = np.hstack([exog_i, exog_j])
        if exog_mask_i is not None and exog_mask_j is not None:
            joint_exog_mask = exog_mask_i & exog_mask_j

    eval_i = ForecastEvaluation("LVC-COMP", ids[0])
    eval_j = ForecastEvaluation("LVC-COMP", ids[1])
    fallbacks = 0
    for t in origins:
        if coupled:
            rates, fell_back = predict_growth(joint_r, joint_mask, joint_exog, joint_exog_mask, t, config)
            r_i, r_j = float(rates[0]), float(rates[1])
        else:
            rate_i, fb_i = predict_growth(g_i.values, g_i.mask, exog_i, exog_mask_i, t, config)
            rate_j, fb_j = predict_growth(g_j.values, g_j.mask, exog_j, exog_mask_j, t, config)
            r_i, r_j, fell_back = float(rate_i[0]), float(rate_j[0]), fb_i or fb_j
        fallbacks += fell_back
        pred_i, pred_j = lvc_comp_step(sd_i[t], sd_j[t], r_i, r_j, a_ij[t], a_ji[t], config.capacity, config.capacity)
        eval_i.add(t, pred_i, sd_i[t + 1])
        eval_j.add(t, pred_j, sd_j[t + 1])
    if fallbacks:
        for e in (eval_i, eval_j):
            e.diagnostics.append(f"{fallbacks} windows without enough valid rows used the mean rate")
    return eval_i, eval_j


def comp_backtest(
    pair: CompetitionPair,
    config: Optional[ForecastConfig] = None,
    competition: Optional[CompetitionConfig] = None,
) -> Tuple[ForecastEvaluation, ForecastEvaluation]:
    """LVC-COMP evaluations of the leader and the competitor."""
    competition = competition or CompetitionConfig()
    exog_i, mask_i = pair.leader.exogenous()
    exog_j, mask_j = pair.competitor.exogenous()
    return backtest_pair_density(
        pair.leader_density, pair.competitor_density, pair.coefficients,
        exog_i, mask_i, exog_j, mask_j,
        config=config, coupled=competition.coupled,
        ids=(pair.leader.product_id, pair.competitor.product_id),
    )
