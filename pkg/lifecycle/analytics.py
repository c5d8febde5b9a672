"""Trust profiles, competition factors with Fisher's exact test, and the
review feature set used to predict competition events."""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import gammaln

from . import errors
from .competition import CompetitionPair
from .config import FactorConfig
from .ingest import ReviewRecord
from .series import ProductLifecycle, review_helpfulness, review_sentiment
from .types import Outcome, Response

log = logging.getLogger(__name__)

TRUST_ATTRIBUTES = ("burst", "sales", "avp_rating", "rating_deviation")


@dataclass(frozen=True, eq=False)
class TrustProfile:
    """Trust attributes binned by the integer percentage of non-AVP reviews."""

    bins: pd.DataFrame  # bin, n_products, <attribute>_mean, <attribute>_var
    scatter: pd.DataFrame  # product_id, nonavp_pct, revenue
    cubic: Optional[np.ndarray] = None  # highest power first

    def cubic_frame(self) -> pd.DataFrame:
        if self.cubic is None:
            return pd.DataFrame(columns=["power", "coefficient"])
        return pd.DataFrame({"power": [3, 2, 1, 0], "coefficient": self.cubic})


def review_burst(reviews: Sequence[ReviewRecord]) -> float:
    """Mean gap in days between consecutive reviews; 0 for fewer than two."""
    if len(reviews) < 2:
        return 0.0
    days = np.array(sorted(r.date.toordinal() for r in reviews), dtype=float)
    return float(np.diff(days).mean())


def _normalize_columns(df: pd.DataFrame, columns: Iterable[str]) -> pd.DataFrame:
    for c in columns:
        lo, hi = df[c].min(), df[c].max()
        df[c] = (df[c] - lo) / (hi - lo) if hi > lo else 0.0
    return df


def trust_attributes(lifecycles: Iterable[ProductLifecycle]) -> pd.DataFrame:
    """Per-product trust attributes before binning (burst already normalized across products)."""
    rows = []
    for lc in lifecycles:
        ratings = np.array([r.rating for r in lc.reviews], dtype=float)
        avp = np.array([r.rating for r in lc.reviews if r.verified], dtype=float)
        rows.append({
            "product_id": lc.product_id,
            "nonavp_pct": lc.nonavp_fraction * 100,
            "burst": review_burst(lc.reviews),
            "sales": float(lc.sales_count.values.sum()),
            "avp_rating": float(avp.mean()) if len(avp) else 0.0,
            "rating_deviation": float(ratings.std()) if len(ratings) else 0.0,
            "revenue": float(lc.revenue.values.sum()) if lc.price is not None else np.nan,
        })
    df = pd.DataFrame(rows, columns=["product_id", "nonavp_pct", *TRUST_ATTRIBUTES, "revenue"])
    return _normalize_columns(df, ["burst"])


def cubic_fit(percentages: Sequence[float], revenues: Sequence[float]) -> np.ndarray:
    """Least-squares cubic, coefficients from the highest power down."""
    x = np.asarray(percentages, dtype=float)
    y = np.asarray(revenues, dtype=float)
    if len(x) < 4:
        raise errors.InsufficientData("products with revenue for a cubic fit", 4, len(x))
    return np.polyfit(x, y, 3)


def trust_profile(lifecycles: Iterable[ProductLifecycle]) -> TrustProfile:
    attrs = trust_attributes(lifecycles)
    if attrs.empty:
        raise errors.InsufficientData("products", 1, 0)
    attrs["bin"] = attrs["nonavp_pct"].round().astype(int).clip(0, 100)
    grouped = attrs.groupby("bin", sort=True)
    bins = grouped.size().rename("n_products").to_frame()
    for name in TRUST_ATTRIBUTES:
        bins[f"{name}_mean"] = grouped[name].mean()
        bins[f"{name}_var"] = grouped[name].var(ddof=0)
    bins = _normalize_columns(bins.reset_index(), [c for c in bins.columns if c != "n_products"])

    scatter = attrs.loc[attrs["revenue"].notna(), ["product_id", "nonavp_pct", "revenue"]].reset_index(drop=True)
    cubic = None
    if len(scatter) >= 4:
        cubic = cubic_fit(scatter["nonavp_pct"], scatter["revenue"])
    else:
        log.warning("Only %d products with prices; skipping the revenue cubic fit", len(scatter))
    return TrustProfile(bins, scatter, cubic)


FACTOR_DESCRIPTIONS = (
    "higher AVP like rating of leader despite fewer reviews than competitor",
    "leader has more than {pre_entry_reviews} reviews before competitor entry",
    "introduction dates more than {introduction_gap_days} days apart",
    "price difference above {price_gap:.0%} of the higher price",
    "average weekly sales differ by more than {sales_gap:g} in the first {early_weeks} weeks of competition",
    "AVP ratings differ by more than {rating_gap:g} in the first {early_weeks} weeks of competition",
    "non-AVP ratings differ by more than {rating_gap:g} in the first {early_weeks} weeks of competition",
    "positive leader sentiment before competitor entry",
    "positive competitor sentiment in its first {early_weeks} weeks",
)


@dataclass(frozen=True)
class FactorVector:
    values: Tuple[bool, ...]
    diagnostics: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.values) != len(FACTOR_DESCRIPTIONS):
            raise errors.InvalidArgument(f"expected {len(FACTOR_DESCRIPTIONS)} factors, got {len(self.values)}")

    def __getitem__(self, i: int) -> bool:
        return self.values[i]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


def _weeks(reviews: Sequence[ReviewRecord], origin) -> np.ndarray:
    return np.array([(r.date - origin).days // 7 for r in reviews], dtype=int)


@dataclass(frozen=True)
class PairWindows:
    """Review subsets of a pair around the competitor's entry."""

    leader_pre: List[ReviewRecord] = field(default_factory=list)
    leader_early: List[ReviewRecord] = field(default_factory=list)
    competitor_early: List[ReviewRecord] = field(default_factory=list)
    leader_overlap: List[ReviewRecord] = field(default_factory=list)
    competitor_overlap: List[ReviewRecord] = field(default_factory=list)


def pair_windows(pair: CompetitionPair, early_weeks: int = 4, overlap_weeks: Optional[int] = None) -> PairWindows:
    entry = pair.entry_week
    end = None if overlap_weeks is None else entry + overlap_weeks

    def pick(reviews, lo, hi):
        weeks = _weeks(reviews, pair.origin)
        keep = weeks >= lo if lo is not None else np.ones(len(weeks), dtype=bool)
        if hi is not None:
            keep &= weeks < hi
        return [r for r, k in zip(reviews, keep) if k]

    lead, comp = pair.leader.reviews, pair.competitor.reviews
    return PairWindows(
        leader_pre=pick(lead, None, entry),
        leader_early=pick(lead, entry, entry + early_weeks),
        competitor_early=pick(comp, entry, entry + early_weeks),
        leader_overlap=pick(lead, entry, end),
        competitor_overlap=pick(comp, entry, end),
    )


def _mean(values: Sequence[float]) -> Optional[float]:
    return float(np.mean(values)) if len(values) else None


def _differ(a: Optional[float], b: Optional[float], gap: float) -> bool:
    return a is not None and b is not None and abs(a - b) > gap


def factor_vector(pair: CompetitionPair, config: Optional[FactorConfig] = None) -> FactorVector:
    """The nine boolean competition factors of a pair."""
    config = config or FactorConfig()
    w = pair_windows(pair, config.early_weeks, config.leader_rating_weeks)
    diagnostics = []

    def avp_like(reviews):
        return _mean([r.rating for r in reviews if r.verified and r.is_like])

    lead_like, comp_like = avp_like(w.leader_overlap), avp_like(w.competitor_overlap)
    f1 = (lead_like is not None and (comp_like is None or lead_like > comp_like)
          and len(w.leader_overlap) < len(w.competitor_overlap))

    f2 = len(w.leader_pre) > config.pre_entry_reviews

    intro_i = min(r.date for r in pair.leader.reviews)
    intro_j = min(r.date for r in pair.competitor.reviews)
    f3 = abs((intro_j - intro_i).days) > config.introduction_gap_days

    p_i, p_j = pair.leader.price, pair.competitor.price
    if p_i is None or p_j is None:
        diagnostics.append("missing price, price factor set to false")
        f4 = False
    else:
        f4 = max(p_i, p_j) > 0 and abs(p_i - p_j) > config.price_gap * max(p_i, p_j)

    lo, hi = pair.entry_week, pair.entry_week + config.early_weeks
    sales_i = _mean(pair.leader.sales_count.values[lo:hi])
    sales_j = _mean(pair.competitor.sales_count.values[lo:hi])
    f5 = _differ(sales_i, sales_j, config.sales_gap)

    def rating(reviews, verified):
        return _mean([r.rating for r in reviews if r.verified == verified])

    f6 = _differ(rating(w.leader_early, True), rating(w.competitor_early, True), config.rating_gap)
    f7 = _differ(rating(w.leader_early, False), rating(w.competitor_early, False), config.rating_gap)

    threshold = 0.0 if config.literal_sentiment else 0.5
    sent_i = _mean([review_sentiment(r) for r in w.leader_pre])
    sent_j = _mean([review_sentiment(r) for r in w.competitor_early])
    f8 = sent_i is not None and sent_i > threshold
    f9 = sent_j is not None and sent_j > threshold

    for message in diagnostics:
        log.warning("Pair %s: %s", pair.name, message)
    return FactorVector((f1, f2, f3, f4, f5, f6, f7, f8, f9), tuple(diagnostics))


def _log_hypergeom(a: np.ndarray, row1: int, col1: int, n: int) -> np.ndarray:
    b = row1 - a
    c = col1 - a
    d = n - row1 - c
    return (gammaln(row1 + 1) + gammaln(n - row1 + 1) + gammaln(col1 + 1) + gammaln(n - col1 + 1)
            - gammaln(n + 1) - gammaln(a + 1) - gammaln(b + 1) - gammaln(c + 1) - gammaln(d + 1))


def fisher_exact(table: Sequence[Sequence[int]]) -> float:
    """Two-sided p-value: total probability of same-margin tables no likelier than `table`."""
    t = np.asarray(table, dtype=np.int64)
    if t.shape != (2, 2):
        raise errors.InvalidArgument(f"expected a 2x2 table, got shape {t.shape}")
    if np.any(t < 0):
        raise errors.InvalidArgument("table counts must be non-negative")
    n = int(t.sum())
    if n < 1:
        raise errors.InvalidArgument("table is empty")
    row1, col1 = int(t[0].sum()), int(t[:, 0].sum())
    if min(row1, n - row1, col1, n - col1) == 0:
        return 1.0
    support = np.arange(max(0, row1 + col1 - n), min(row1, col1) + 1)
    logp = _log_hypergeom(support, row1, col1, n)
    observed = _log_hypergeom(np.array([t[0, 0]]), row1, col1, n)[0]
    # relative slack for ties lost to rounding
    keep = logp <= observed + np.log1p(1e-7)
    return float(min(1.0, np.exp(logp[keep]).sum()))


def odds_ratio(table: Sequence[Sequence[int]]) -> float:
    (a, b), (c, d) = np.asarray(table, dtype=float)
    if b * c == 0:
        return np.inf if a * d > 0 else np.nan
    return float(a * d / (b * c))


def factor_table(
    vectors: Sequence[FactorVector],
    outcomes: Sequence[Outcome],
    config: Optional[FactorConfig] = None,
) -> pd.DataFrame:
    """Per factor: survival/death x present/absent counts and Fisher p-value.

    Undecided pairs are left out.
    """
    if len(vectors) != len(outcomes):
        raise errors.InvalidArgument("one outcome per factor vector required")
    params = dataclasses.asdict(config or FactorConfig())
    decided = [(v, Outcome(o)) for v, o in zip(vectors, outcomes) if Outcome(o) != Outcome.undecided]
    if not decided:
        raise errors.InsufficientData("pairs with a survival or death outcome", 1, 0)
    rows = []
    for k, description in enumerate(FACTOR_DESCRIPTIONS):
        table = np.zeros((2, 2), dtype=int)
        for v, o in decided:
            table[0 if o == Outcome.survival else 1, 0 if v[k] else 1] += 1
        rows.append({
            "factor": k + 1,
            "description": description.format(**params),
            "odds_table": f"{table[0, 0]}/{table[0, 1]}/{table[1, 0]}/{table[1, 1]}",
            "odds_ratio": odds_ratio(table),
            "p_value": fisher_exact(table),
        })
    return pd.DataFrame(rows)


FEATURE_NAMES = (
    "avg_pos_words",
    "avg_neg_words",
    "sd_pos_words",
    "sd_neg_words",
    "avg_avp_like_rating",
    "avg_avp_dislike_rating",
    "avg_nonavp_like_rating",
    "avg_nonavp_dislike_rating",
    "sd_avp_like_rating",
    "sd_avp_dislike_rating",
    "sd_nonavp_like_rating",
    "sd_nonavp_dislike_rating",
    "n_avp_like",
    "n_avp_dislike",
    "n_nonavp_like",
    "n_nonavp_dislike",
    "n_comments",
    "avg_helpfulness",
    "sd_helpfulness",
    "avg_word_length",
)


def _stats(values: Sequence[float]) -> Tuple[float, float]:
    if not len(values):
        return 0.0, 0.0
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std())


def review_features(reviews: Sequence[ReviewRecord]) -> np.ndarray:
    """The 20 review statistics of a window; empty populations contribute zeros."""
    avg_pos, sd_pos = _stats([r.pos_words for r in reviews])
    avg_neg, sd_neg = _stats([r.neg_words for r in reviews])
    groups = {}
    for verified in (True, False):
        for like in (True, False):
            groups[verified, like] = [r.rating for r in reviews if r.verified == verified and r.is_like == like]
    rating_stats = {key: _stats(v) for key, v in groups.items()}
    order = [(True, True), (True, False), (False, True), (False, False)]
    avg_help, sd_help = _stats([review_helpfulness(r) for r in reviews])
    avg_len, _ = _stats([r.word_count for r in reviews])
    return np.array([
        avg_pos, avg_neg, sd_pos, sd_neg,
        *[rating_stats[k][0] for k in order],
        *[rating_stats[k][1] for k in order],
        *[float(len(groups[k])) for k in order],
        float(sum(r.comments for r in reviews)),
        avg_help, sd_help,
        avg_len,
    ])


FEATURE_BLOCKS = ("leader_pre", "competitor_early", "leader_early")


def feature_columns() -> List[str]:
    return [f"factor_{k + 1}" for k in range(len(FACTOR_DESCRIPTIONS))] + [
        f"{block}_{name}" for block in FEATURE_BLOCKS for name in FEATURE_NAMES
    ]


def pair_features(pair: CompetitionPair, config: Optional[FactorConfig] = None) -> np.ndarray:
    config = config or FactorConfig()
    w = pair_windows(pair, config.early_weeks, config.leader_rating_weeks)
    return np.concatenate([
        factor_vector(pair, config).as_array(),
        review_features(w.leader_pre),
        review_features(w.competitor_early),
        review_features(w.leader_early),
    ])


def feature_matrix(pairs: Sequence[CompetitionPair], config: Optional[FactorConfig] = None) -> pd.DataFrame:
    """69 features per pair, indexed by pair name."""
    rows = [pair_features(p, config) for p in pairs]
    data = np.vstack(rows) if rows else np.empty((0, len(feature_columns())))
    return pd.DataFrame(data, columns=feature_columns(), index=[p.name for p in pairs])


def pair_response(pair: CompetitionPair, response: Response) -> float:
    """Event value to regress on, NaN when undefined for this pair.

    Recovery time is only defined for surviving leaders.
    """
    events = pair.events
    response = Response(response)
    if response == Response.takeover_time:
        value = events.takeover_time
    elif response == Response.recovery_time:
        value = events.recovery_time if pair.outcome == Outcome.survival else None
    else:
        value = events.takeover_volume_pct if events.breakeven_week is not None else None
    return np.nan if value is None else float(value)


def responses(pairs: Sequence[CompetitionPair]) -> Dict[Response, np.ndarray]:
    return {r: np.array([pair_response(p, r) for p in pairs]) for r in Response}
