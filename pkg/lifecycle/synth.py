"""Synthetic review markets with known sales dynamics.

Hidden densities follow the single-product or the competition step driven by
growth rates that mix a piecewise-constant base rate with six latent AR(1)
series. Weekly review counts are drawn multinomially from the densities, and
the latent series tilt the review attributes so that the observable allied
series carry a noisy copy of them.
"""

import dataclasses
import datetime as dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import errors, kde, reports
from .competition import (
    CompetitionCoefficients,
    CompetitionEvents,
    CompetitionPair,
    build_pair,
    coefficient_paths,
    detect_events,
    lvc_comp_step,
)
from .config import CompetitionConfig
from .forecast import lvc_step
from .ingest import PairSpec, PriceTable, ReviewRecord, write_pair_manifest, write_prices, write_reviews
from .ksc import shift
from .series import ProductLifecycle, build_lifecycle
from .types import PairPreset, PathLikeT, SpamPattern
from .util import parallel_map, to_jsonable

log = logging.getLogger(__name__)

N_EXOG = 6
SPAM_LAG = 4


@dataclass
class GrowthSpec:
    """r(t) = base rate of the phase containing t + exog_coef . X(t-1) + noise."""

    sd0: float = 0.01
    # (first week, base rate), first week of the first phase is 0
    phases: Tuple[Tuple[int, float], ...] = ((0, 0.25), (15, -0.05))
    exog_coef: Tuple[float, ...] = (0.01,) * N_EXOG
    noise: float = 0.002
    # lag-one autocorrelation of the latent series
    ar: float = 0.5

    def validate(self) -> None:
        if not 0 < self.sd0 <= 1:
            raise errors.ConfigurationError(f"initial density must lie in (0, 1], got {self.sd0}")
        if not self.phases or self.phases[0][0] != 0:
            raise errors.ConfigurationError("growth phases must start at week 0")
        starts = [p[0] for p in self.phases]
        if starts != sorted(set(starts)):
            raise errors.ConfigurationError(f"growth phases must have increasing start weeks, got {starts}")
        if len(self.exog_coef) != N_EXOG:
            raise errors.ConfigurationError(f"expected {N_EXOG} exogenous coefficients, got {len(self.exog_coef)}")
        if self.noise < 0 or not -1 < self.ar < 1:
            raise errors.ConfigurationError("noise must be non-negative and |ar| < 1")

    def base_rates(self, length: int) -> np.ndarray:
        rates = np.empty(length)
        for k, (start, rate) in enumerate(self.phases):
            end = self.phases[k + 1][0] if k + 1 < len(self.phases) else length
            rates[start:end] = rate
        return rates


@dataclass
class ReviewSpec:
    """Review attribute distributions; `sensitivity` scales the latent tilt."""

    avp_rating_probs: Tuple[float, ...] = (0.05, 0.05, 0.1, 0.3, 0.5)
    nonavp_rating_probs: Tuple[float, ...] = (0.15, 0.05, 0.05, 0.15, 0.6)
    helpful_prob: float = 0.6
    vote_rate: float = 2.0
    pos_rate: float = 3.0
    neg_rate: float = 1.0
    filler_words: float = 30.0
    comment_rate: float = 0.2
    sensitivity: float = 0.3

    def validate(self) -> None:
        for name in ("avp_rating_probs", "nonavp_rating_probs"):
            probs = np.asarray(getattr(self, name), dtype=float)
            if probs.shape != (5,) or np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
                raise errors.ConfigurationError(f"{name} must be 5 non-negative probabilities summing to 1")
        if not 0 <= self.helpful_prob <= 1:
            raise errors.ConfigurationError(f"helpful_prob must lie in [0, 1], got {self.helpful_prob}")
        for name in ("vote_rate", "pos_rate", "neg_rate", "filler_words", "comment_rate"):
            if getattr(self, name) < 0:
                raise errors.ConfigurationError(f"{name} must be non-negative")

    def expected_inputs(self) -> np.ndarray:
        """Expected (rating, helpfulness, sentiment) of an AVP review, each in [0, 1]."""
        rating = float(np.dot(self.avp_rating_probs, np.arange(5)) / 4)
        helpful = (1 - np.exp(-self.vote_rate)) * self.helpful_prob
        total = self.pos_rate + self.neg_rate
        sentiment = 0.5 if total == 0 else 0.5 * ((self.pos_rate - self.neg_rate) / total + 1)
        return np.array([rating, helpful, sentiment])


@dataclass
class ProductSpec:
    product_id: str
    start_week: int = 0
    n_reviews: int = 2000
    nonavp_fraction: float = 0.1
    spam: SpamPattern = SpamPattern.organic
    price: Optional[float] = 20.0
    growth: GrowthSpec = field(default_factory=GrowthSpec)
    reviews: ReviewSpec = field(default_factory=ReviewSpec)


@dataclass
class MarketScenario:
    """Everything that determines a synthetic market; the seed fixes every draw."""

    seed: int = 0
    start: str = "2012-01-02"
    horizon_weeks: int = 80
    n_products: int = 20
    n_reviews: int = 2000
    nonavp_fraction: float = 0.1
    spam_patterns: Tuple[SpamPattern, ...] = tuple(SpamPattern)
    growth: GrowthSpec = field(default_factory=GrowthSpec)
    reviews: ReviewSpec = field(default_factory=ReviewSpec)
    pair_presets: Tuple[PairPreset, ...] = (PairPreset.death, PairPreset.survival, PairPreset.undecided)
    pairs_per_preset: int = 4
    # expected reviews per unit of summed hidden density, shared by both products of a pair
    pair_review_rate: float = 400.0
    price_range: Tuple[float, float] = (5.0, 100.0)

    def __post_init__(self):
        self.spam_patterns = tuple(SpamPattern(p) for p in self.spam_patterns)
        self.pair_presets = tuple(PairPreset(p) for p in self.pair_presets)

    @property
    def start_date(self) -> dt.date:
        return dt.date.fromisoformat(self.start)

    def validate(self) -> None:
        if self.horizon_weeks < 25:
            raise errors.ConfigurationError(f"horizon must be at least 25 weeks, got {self.horizon_weeks}")
        if self.n_products < 0 or self.pairs_per_preset < 0:
            raise errors.ConfigurationError("product and pair counts must be non-negative")
        if self.n_reviews < 1 or self.pair_review_rate <= 0:
            raise errors.ConfigurationError("review volumes must be positive")
        if not 0 <= self.nonavp_fraction < 1:
            raise errors.ConfigurationError(f"non-AVP fraction must lie in [0, 1), got {self.nonavp_fraction}")
        if self.n_products and not self.spam_patterns:
            raise errors.ConfigurationError("at least one spam pattern is required")
        lo, hi = self.price_range
        if not 0 <= lo <= hi:
            raise errors.ConfigurationError(f"invalid price range {self.price_range}")
        try:
            self.start_date
        except ValueError as e:
            raise errors.ConfigurationError(f"invalid start date {self.start!r}") from e
        self.growth.validate()
        self.reviews.validate()

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MarketScenario":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise errors.ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
        kwargs = dict(data)
        try:
            if "growth" in kwargs:
                growth = dict(kwargs["growth"])
                if "phases" in growth:
                    growth["phases"] = tuple((int(s), float(r)) for s, r in growth["phases"])
                if "exog_coef" in growth:
                    growth["exog_coef"] = tuple(float(c) for c in growth["exog_coef"])
                kwargs["growth"] = GrowthSpec(**growth)
            if "reviews" in kwargs:
                kwargs["reviews"] = ReviewSpec(**{k: tuple(v) if isinstance(v, list) else v
                                                   for k, v in kwargs["reviews"].items()})
            for key in ("spam_patterns", "pair_presets", "price_range"):
                if key in kwargs:
                    kwargs[key] = tuple(kwargs[key])
            scenario = cls(**kwargs)
        except (TypeError, ValueError) as e:
            raise errors.ConfigurationError(f"invalid scenario: {e}") from e
        scenario.validate()
        return scenario


def load_scenario(path: PathLikeT) -> MarketScenario:
    path = Path(path)
    if not path.is_file():
        raise errors.MissingPath(str(path))
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise errors.ConfigurationError(f"{path}: {e}") from e
    if not isinstance(data, dict):
        raise errors.ConfigurationError(f"{path}: scenario must be a JSON object")
    return MarketScenario.from_dict(data)


def dump_scenario(scenario: MarketScenario, path: PathLikeT) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class ProductTruth:
    product_id: str
    sd: np.ndarray
    r: np.ndarray
    exog: np.ndarray  # latent (weeks x 6)
    start_week: int
    spam: SpamPattern

    def to_dict(self) -> Dict[str, Any]:
        return {
            "product_id": self.product_id,
            "start_week": self.start_week,
            "spam": self.spam.value,
            "sd": self.sd.tolist(),
            "r": self.r.tolist(),
        }


@dataclass(frozen=True, eq=False)
class PairTruth:
    leader_id: str
    competitor_id: str
    preset: PairPreset
    entry_week: int
    sd_leader: np.ndarray
    sd_competitor: np.ndarray
    r_leader: np.ndarray
    r_competitor: np.ndarray
    exog_leader: np.ndarray
    exog_competitor: np.ndarray
    coefficients: CompetitionCoefficients
    events: CompetitionEvents

    def to_dict(self) -> Dict[str, Any]:
        return {
            "leader_id": self.leader_id,
            "competitor_id": self.competitor_id,
            "preset": self.preset.value,
            "entry_week": self.entry_week,
            "events": self.events.to_dict(),
            "sd_leader": self.sd_leader.tolist(),
            "sd_competitor": self.sd_competitor.tolist(),
        }


def latent_series(length: int, ar: float, rng: np.random.Generator, width: int = N_EXOG) -> np.ndarray:
    """Stationary unit-variance AR(1) columns."""
    x = np.empty((length, width))
    x[0] = rng.standard_normal(width)
    innovation = np.sqrt(1 - ar * ar)
    for t in range(1, length):
        x[t] = ar * x[t - 1] + innovation * rng.standard_normal(width)
    return x


def growth_rates(growth: GrowthSpec, exog: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    length = len(exog)
    lagged = np.vstack([np.zeros((1, exog.shape[1])), exog[:-1]])
    r = growth.base_rates(length) + lagged @ np.asarray(growth.exog_coef)
    if growth.noise:
        r = r + growth.noise * rng.standard_normal(length)
    return r


def simulate_density(r: Sequence[float], sd0: float, capacity: float = 1.0) -> np.ndarray:
    """SD(0) = sd0 and SD(t+1) = lvc_step(SD(t), r(t))."""
    r = np.asarray(r, dtype=float)
    sd = np.empty(len(r))
    sd[0] = sd0
    for t in range(len(r) - 1):
        sd[t + 1] = lvc_step(sd[t], r[t], capacity)
    return sd


def simulate_pair(
    r_i: Sequence[float],
    r_j: Sequence[float],
    sd0_i: float,
    sd0_j: float,
    entry_week: int,
    coefficients: CompetitionCoefficients,
    capacity: float = 1.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Coupled densities; the competitor is zero before `entry_week` and sd0_j on it."""
    T = len(r_i)
    sd_i = np.empty(T)
    sd_j = np.zeros(T)
    sd_i[0] = sd0_i
    if entry_week == 0:
        sd_j[0] = sd0_j
    for t in range(T - 1):
        sd_i[t + 1], nxt_j = lvc_comp_step(sd_i[t], sd_j[t], r_i[t], r_j[t],
                                           coefficients.a_ij[t], coefficients.a_ji[t], capacity, capacity)
        sd_j[t + 1] = sd0_j if t + 1 == entry_week else nxt_j
    return sd_i, sd_j


def spam_profile(sd: np.ndarray, pattern: SpamPattern, lag: int = SPAM_LAG) -> np.ndarray:
    """Weekly non-AVP review probabilities shaped around the sales density."""
    pattern = SpamPattern(pattern)
    if pattern == SpamPattern.organic:
        shape = sd
    elif pattern == SpamPattern.lead:
        shape = shift(sd, -lag)
    elif pattern == SpamPattern.lead_lagged:
        shape = shift(sd, -lag) + 0.5 * shift(sd, 2 * lag)
    elif pattern == SpamPattern.follow:
        shape = shift(sd, lag)
    elif pattern == SpamPattern.buffered_lagged:
        shape = kde.smooth(shift(sd, lag), 4.0 * lag * lag)
    else:
        shape = sd ** 3
    if shape.sum() <= 0:
        shape = sd
    return shape / shape.sum()


def _tilted(probs: Sequence[float], x: np.ndarray, strength: float) -> np.ndarray:
    """Per-week rating distributions, shifted toward high stars when x > 0."""
    logits = np.log(np.clip(np.asarray(probs, dtype=float), 1e-12, None))
    logits = logits[None, :] + strength * x[:, None] * (np.arange(5) - 2)[None, :] / 2
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    return p / p.sum(axis=1, keepdims=True)


def _sample_reviews(
    product_id: str,
    counts: np.ndarray,
    verified: bool,
    exog: np.ndarray,
    spec: ReviewSpec,
    first_day: dt.date,
    rng: np.random.Generator,
) -> List[ReviewRecord]:
    weeks = np.repeat(np.arange(len(counts)), counts.astype(int))
    n = len(weeks)
    if n == 0:
        return []
    base = 0 if verified else 3
    x_help, x_sent, x_rate = exog[weeks, base], exog[weeks, base + 1], exog[:, base + 2]
    s = spec.sensitivity

    probs = _tilted(spec.avp_rating_probs if verified else spec.nonavp_rating_probs, x_rate, s)
    cdf = np.cumsum(probs, axis=1)
    ratings = 1 + np.minimum((rng.random(n)[:, None] > cdf[weeks]).sum(axis=1), 4)

    total_votes = rng.poisson(spec.vote_rate, n)
    helpful_votes = rng.binomial(total_votes, np.clip(spec.helpful_prob + s * x_help / 3, 0.02, 0.98))
    pos = rng.poisson(spec.pos_rate * np.exp(s * x_sent))
    neg = rng.poisson(spec.neg_rate * np.exp(-s * x_sent))
    words = pos + neg + rng.poisson(spec.filler_words, n)
    comments = rng.poisson(spec.comment_rate, n)
    days = weeks * 7 + rng.integers(0, 7, n)

    return [
        ReviewRecord(
            product_id=product_id,
            date=first_day + dt.timedelta(days=int(days[k])),
            rating=int(ratings[k]),
            verified=verified,
            helpful_votes=int(helpful_votes[k]),
            total_votes=int(total_votes[k]),
            pos_words=int(pos[k]),
            neg_words=int(neg[k]),
            word_count=int(words[k]),
            comments=int(comments[k]),
        )
        for k in range(n)
    ]


def _nonavp_total(n_avp: int, fraction: float) -> int:
    return int(round(n_avp * fraction / (1 - fraction))) if fraction > 0 else 0


def product_reviews(
    product_id: str,
    sd: np.ndarray,
    n_reviews: int,
    nonavp_fraction: float,
    spam: SpamPattern,
    exog: np.ndarray,
    spec: ReviewSpec,
    first_day: dt.date,
    rng: np.random.Generator,
    avp_counts: Optional[np.ndarray] = None,
) -> List[ReviewRecord]:
    """Reviews of one product, sorted by date; AVP counts follow `sd` unless given."""
    if avp_counts is None:
        avp_counts = rng.multinomial(n_reviews, sd / sd.sum())
    n_avp = int(avp_counts.sum())
    nonavp_counts = rng.multinomial(_nonavp_total(n_avp, nonavp_fraction), spam_profile(sd, spam))
    records = _sample_reviews(product_id, avp_counts, True, exog, spec, first_day, rng)
    records += _sample_reviews(product_id, nonavp_counts, False, exog, spec, first_day, rng)
    records.sort(key=lambda r: r.date)
    return records


def gen_lifecycle(
    scenario: MarketScenario,
    product: ProductSpec,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[ProductLifecycle, ProductTruth, List[ReviewRecord]]:
    """One product: hidden density and growth, observable reviews, derived lifecycle."""
    rng = rng or np.random.default_rng(scenario.seed)
    product.growth.validate()
    product.reviews.validate()
    length = scenario.horizon_weeks
    exog = latent_series(length, product.growth.ar, rng)
    r = growth_rates(product.growth, exog, rng)
    sd = simulate_density(r, product.growth.sd0)
    if not sd.sum() > 0:
        raise errors.ConfigurationError(f"{product.product_id}: simulated density vanishes")
    first_day = scenario.start_date + dt.timedelta(weeks=product.start_week)
    records = product_reviews(product.product_id, sd, product.n_reviews, product.nonavp_fraction,
                              product.spam, exog, product.reviews, first_day, rng)
    lifecycle = build_lifecycle(product.product_id, records, product.price)
    truth = ProductTruth(product.product_id, sd, r, exog, product.start_week, product.spam)
    return lifecycle, truth, records


@dataclass
class PairPresetSpec:
    leader: GrowthSpec
    competitor: GrowthSpec
    entry_week: int
    leader_reviews: ReviewSpec
    competitor_reviews: ReviewSpec


_GOOD = ReviewSpec(avp_rating_probs=(0.02, 0.03, 0.05, 0.3, 0.6), pos_rate=4.0, neg_rate=0.5, helpful_prob=0.8)
_POOR = ReviewSpec(avp_rating_probs=(0.15, 0.15, 0.2, 0.25, 0.25), pos_rate=2.0, neg_rate=2.0, helpful_prob=0.4)
_PAIR_EXOG = (0.01,) * N_EXOG


def pair_preset(preset: PairPreset) -> PairPresetSpec:
    """Growth schedules whose hidden trajectories end in the named outcome."""
    preset = PairPreset(preset)
    if preset == PairPreset.death:
        return PairPresetSpec(
            leader=GrowthSpec(0.01, ((0, 0.25), (15, -0.05)), _PAIR_EXOG),
            competitor=GrowthSpec(0.005, ((0, 0.3), (18, -0.03)), _PAIR_EXOG),
            entry_week=20,
            leader_reviews=_POOR,
            competitor_reviews=_GOOD,
        )
    if preset == PairPreset.survival:
        return PairPresetSpec(
            leader=GrowthSpec(0.01, ((0, 0.25), (15, -0.08), (30, 0.2), (45, -0.05)), _PAIR_EXOG),
            competitor=GrowthSpec(0.01, ((0, 0.35), (12, -0.15)), _PAIR_EXOG),
            entry_week=18,
            leader_reviews=_GOOD,
            competitor_reviews=_POOR,
        )
    return PairPresetSpec(
        leader=GrowthSpec(0.01, ((0, 0.25), (15, -0.05)), _PAIR_EXOG),
        competitor=GrowthSpec(0.001, ((0, 0.1), (10, -0.05)), _PAIR_EXOG),
        entry_week=25,
        leader_reviews=ReviewSpec(),
        competitor_reviews=ReviewSpec(),
    )


def expected_coefficients(
    leader: ReviewSpec,
    competitor: ReviewSpec,
    entry_week: int,
    length: int,
    config: Optional[CompetitionConfig] = None,
) -> CompetitionCoefficients:
    """Coefficient paths from the expected review quality; neutral inputs before entry."""
    config = config or CompetitionConfig()
    inputs_i = np.tile(leader.expected_inputs(), (length, 1))
    inputs_j = np.tile(competitor.expected_inputs(), (length, 1))
    inputs_j[:entry_week] = 0.5
    ce = (inputs_j - inputs_i).sum(axis=1) / 3.0
    return CompetitionCoefficients(
        coefficient_paths(ce, config.delta, config.initial_coefficient),
        coefficient_paths(-ce, config.delta, config.initial_coefficient),
    )


def gen_pair(
    scenario: MarketScenario,
    preset: PairPreset,
    leader_id: str,
    competitor_id: str,
    rng: Optional[np.random.Generator] = None,
    prices: Tuple[Optional[float], Optional[float]] = (None, None),
    config: Optional[CompetitionConfig] = None,
) -> Tuple[CompetitionPair, PairTruth, List[ReviewRecord], List[ReviewRecord]]:
    """A leader and a competitor sharing one calendar and one review rate per unit density."""
    rng = rng or np.random.default_rng(scenario.seed)
    config = config or CompetitionConfig()
    spec = pair_preset(preset)
    length = scenario.horizon_weeks
    if spec.entry_week >= length - 1:
        raise errors.ConfigurationError(f"entry week {spec.entry_week} outside a {length}-week horizon")

    exog_i = latent_series(length, spec.leader.ar, rng)
    exog_j = latent_series(length, spec.competitor.ar, rng)
    r_i = growth_rates(spec.leader, exog_i, rng)
    r_j = np.zeros(length)
    r_j[spec.entry_week:] = growth_rates(spec.competitor, exog_j[spec.entry_week:], rng)
    coefficients = expected_coefficients(spec.leader_reviews, spec.competitor_reviews, spec.entry_week, length, config)
    sd_i, sd_j = simulate_pair(r_i, r_j, spec.leader.sd0, spec.competitor.sd0, spec.entry_week, coefficients)
    events = detect_events(sd_i, sd_j, spec.entry_week, config.theta, config.horizon)

    mass = np.concatenate([sd_i, sd_j])
    n_total = max(2, int(round(scenario.pair_review_rate * mass.sum())))
    counts = rng.multinomial(n_total, mass / mass.sum())
    first_day = scenario.start_date
    leader_records = product_reviews(leader_id, sd_i, 0, scenario.nonavp_fraction, SpamPattern.organic,
                                     exog_i, spec.leader_reviews, first_day, rng, counts[:length])
    competitor_records = product_reviews(competitor_id, sd_j, 0, scenario.nonavp_fraction, SpamPattern.organic,
                                         exog_j, spec.competitor_reviews, first_day, rng, counts[length:])
    if not competitor_records:
        raise errors.InsufficientData(f"reviews of competitor {competitor_id}", 1, 0)

    pair = build_pair(leader_id, leader_records, competitor_id, competitor_records,
                      prices[0], prices[1], config=config)
    truth = PairTruth(leader_id, competitor_id, PairPreset(preset), spec.entry_week, sd_i, sd_j, r_i, r_j,
                      exog_i, exog_j, coefficients, events)
    return pair, truth, leader_records, competitor_records


@dataclass(eq=False)
class SyntheticMarket:
    scenario: MarketScenario
    records: Dict[str, List[ReviewRecord]] = field(default_factory=dict)
    prices: Dict[str, float] = field(default_factory=dict)
    pairs: List[PairSpec] = field(default_factory=list)
    products: Dict[str, ProductTruth] = field(default_factory=dict)
    pair_truths: List[PairTruth] = field(default_factory=list)

    def truth_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario.to_dict(),
            "products": [t.to_dict() for t in self.products.values()],
            "pairs": [t.to_dict() for t in self.pair_truths],
        }


def _seeded(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


def product_spec(scenario: MarketScenario, index: int, rng: np.random.Generator) -> ProductSpec:
    """Randomized variation of the scenario's growth template for market product `index`."""
    template = scenario.growth
    peak = int(rng.integers(10, 26))
    growth = dataclasses.replace(
        template,
        sd0=float(rng.uniform(0.005, 0.02)),
        phases=((0, float(rng.uniform(0.15, 0.3))), (peak, float(rng.uniform(-0.06, -0.03)))),
    )
    lo, hi = scenario.price_range
    return ProductSpec(
        product_id=f"P{index:04d}",
        start_week=0,
        n_reviews=scenario.n_reviews,
        nonavp_fraction=scenario.nonavp_fraction,
        spam=scenario.spam_patterns[index % len(scenario.spam_patterns)],
        price=round(float(rng.uniform(lo, hi)), 2),
        growth=growth,
        reviews=scenario.reviews,
    )


def gen_market(scenario: MarketScenario, threads: Optional[int] = None) -> SyntheticMarket:
    """Independent products and competing pairs, each drawn from its own derived seed."""
    scenario.validate()
    market = SyntheticMarket(scenario)

    def one_product(i: int):
        rng = _seeded(scenario.seed, 0, i)
        spec = product_spec(scenario, i, rng)
        _, truth, records = gen_lifecycle(scenario, spec, rng)
        return spec, truth, records

    for spec, truth, records in parallel_map(one_product, range(scenario.n_products), threads):
        market.records[spec.product_id] = records
        market.products[spec.product_id] = truth
        if spec.price is not None:
            market.prices[spec.product_id] = spec.price

    jobs = [(k, preset) for k, preset in enumerate(
        p for p in scenario.pair_presets for _ in range(scenario.pairs_per_preset))]

    def one_pair(job):
        k, preset = job
        rng = _seeded(scenario.seed, 1, k)
        lo, hi = scenario.price_range
        prices = (round(float(rng.uniform(lo, hi)), 2), round(float(rng.uniform(lo, hi)), 2))
        _, truth, lead, comp = gen_pair(scenario, preset, f"L{k:03d}", f"C{k:03d}", rng, prices)
        return truth, lead, comp, prices

    for truth, lead, comp, prices in parallel_map(one_pair, jobs, threads):
        market.records[truth.leader_id] = lead
        market.records[truth.competitor_id] = comp
        market.prices[truth.leader_id], market.prices[truth.competitor_id] = prices
        market.pairs.append(PairSpec(truth.leader_id, truth.competitor_id))
        market.pair_truths.append(truth)
    log.info("Generated %d products and %d pairs (%d reviews)", len(market.products), len(market.pairs),
             sum(len(r) for r in market.records.values()))
    return market


MARKET_FILES = {
    "reviews": "reviews.jsonl",
    "prices": "prices.csv",
    "pairs": "pairs.csv",
    "truth": "truth.json",
}


def write_market(market: SyntheticMarket, out_dir: PathLikeT, force: bool = False) -> Dict[str, Path]:
    """Reviews, prices, pair manifest and the ground-truth sidecar."""
    out_dir = Path(out_dir)
    paths = {name: out_dir / filename for name, filename in MARKET_FILES.items()}
    existing = [p for p in paths.values() if p.exists()]
    if existing and not force:
        raise errors.OutputExists(str(existing[0]))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_reviews((r for pid in sorted(market.records) for r in market.records[pid]), paths["reviews"])
    write_prices(PriceTable(dict(market.prices)), paths["prices"])
    write_pair_manifest(market.pairs, paths["pairs"])
    reports.write_json_report(market.truth_dict(), paths["truth"], market.scenario.seed, market.scenario, force=True)
    return paths
