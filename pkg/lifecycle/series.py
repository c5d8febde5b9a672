"""Weekly allied time series, cross-correlation and normalizations."""

import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from . import errors
from .ingest import ReviewRecord
from .types import PathLikeT, RatingFilter

log = logging.getLogger(__name__)

# Monday; absolute week indices count from here
ABSOLUTE_EPOCH = dt.date(1970, 1, 5)

Predicate = Callable[[ReviewRecord], bool]
ArrayLike = Union["WeeklySeries", np.ndarray, Sequence[float]]


def is_avp(r: ReviewRecord) -> bool:
    return r.verified


def is_nonavp(r: ReviewRecord) -> bool:
    return not r.verified


def is_any(r: ReviewRecord) -> bool:
    return True


@dataclass(frozen=True, eq=False)
class WeeklySeries:
    """Real values on a uniform weekly grid starting at absolute week `epoch_week`."""

    epoch_week: int
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) < 1:
            raise errors.InvalidArgument("weekly series must be a non-empty vector")
        if not np.all(np.isfinite(values)):
            raise errors.InvalidArgument("weekly series values must be finite")
        object.__setattr__(self, "values", values)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != values.shape:
                raise errors.InvalidArgument("mask and values differ in length")
            object.__setattr__(self, "mask", mask)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def valid(self) -> np.ndarray:
        return np.ones(len(self), dtype=bool) if self.mask is None else self.mask

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"week": np.arange(len(self)), "value": self.values})
        if self.mask is not None:
            df["mask"] = self.mask.astype(int)
        return df

    def to_csv(self, path: PathLikeT) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.10g")


def read_series_csv(path: PathLikeT) -> WeeklySeries:
    path = Path(path)
    if not path.is_file():
        raise errors.MissingPath(str(path))
    df = pd.read_csv(path, comment="#")
    if "value" not in df.columns:
        raise errors.ConfigurationError(f"{path}: expected a 'value' column")
    mask = df["mask"].to_numpy(dtype=bool) if "mask" in df.columns else None
    epoch = int(df["week"].iloc[0]) if "week" in df.columns and len(df) else 0
    return WeeklySeries(epoch, df["value"].to_numpy(dtype=float), mask)


def absolute_week(date: dt.date) -> int:
    return (date - ABSOLUTE_EPOCH).days // 7


def week_start(date: dt.date) -> dt.date:
    """Monday of the absolute week containing `date`."""
    return ABSOLUTE_EPOCH + dt.timedelta(weeks=absolute_week(date))


def week_indices(records: Sequence[ReviewRecord], origin: dt.date) -> np.ndarray:
    return np.array([(r.date - origin).days // 7 for r in records], dtype=int)


def _select(records: Sequence[ReviewRecord], predicate: Predicate, span: int, origin: dt.date):
    chosen = [r for r in records if predicate(r)]
    weeks = week_indices(chosen, origin)
    inside = (weeks >= 0) & (weeks < span)
    if not np.all(inside):
        log.debug("Ignoring %d reviews outside the %d-week span", int((~inside).sum()), span)
    return [r for r, ok in zip(chosen, inside) if ok], weeks[inside]


def _origin(records: Sequence[ReviewRecord], origin: Optional[dt.date]) -> dt.date:
    if origin is not None:
        return origin
    return min(r.date for r in records) if records else ABSOLUTE_EPOCH


def bin_weekly(
    records: Sequence[ReviewRecord],
    predicate: Predicate,
    week_span: int,
    origin: Optional[dt.date] = None,
) -> WeeklySeries:
    """Count the selected reviews per week; week 0 starts at `origin` (default: first review)."""
    if week_span < 1:
        raise errors.InvalidArgument(f"week span must be positive, got {week_span}")
    origin = _origin(records, origin)
    _, weeks = _select(records, predicate, week_span, origin)
    counts = np.bincount(weeks, minlength=week_span)[:week_span].astype(float)
    return WeeklySeries(absolute_week(origin), counts)


def helpfulness(hv: int, tv: int) -> float:
    if hv < 0 or tv < 0:
        raise errors.DomainError(f"vote counts must be non-negative: HV={hv}, TV={tv}")
    if hv > tv:
        raise errors.DomainError(f"helpful votes exceed total votes: HV={hv}, TV={tv}")
    return 0.0 if tv == 0 else hv / tv


def sentiment_coefficient(cps: int, cns: int) -> float:
    """Lexicon polarity in [0, 1]; 0.5 when no opinion words were found."""
    total = cps + cns
    if total == 0:
        return 0.5
    return 0.5 * ((cps - cns) / total + 1.0)


def review_helpfulness(r: ReviewRecord) -> float:
    return helpfulness(r.helpful_votes, r.total_votes)


def review_sentiment(r: ReviewRecord) -> float:
    return sentiment_coefficient(r.pos_words, r.neg_words)


def normalized_rating(r: ReviewRecord) -> float:
    return (r.rating - 1) / 4.0


def weekly_mean(
    records: Sequence[ReviewRecord],
    value: Callable[[ReviewRecord], float],
    predicate: Predicate,
    week_span: int,
    origin: Optional[dt.date] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-week mean of `value` over selected reviews, and which weeks had any."""
    origin = _origin(records, origin)
    chosen, weeks = _select(records, predicate, week_span, origin)
    weights = np.array([value(r) for r in chosen], dtype=float)
    counts = np.bincount(weeks, minlength=week_span)[:week_span]
    sums = np.bincount(weeks, weights=weights, minlength=week_span)[:week_span] if len(chosen) else np.zeros(week_span)
    present = counts > 0
    means = np.zeros(week_span)
    means[present] = sums[present] / counts[present]
    return means, present


def weekly_helpfulness(records, predicate: Predicate, week_span: int, origin: Optional[dt.date] = None) -> WeeklySeries:
    origin = _origin(records, origin)
    means, _ = weekly_mean(records, review_helpfulness, predicate, week_span, origin)
    return WeeklySeries(absolute_week(origin), means)


def weekly_sentiment(records, predicate: Predicate, week_span: int, origin: Optional[dt.date] = None) -> WeeklySeries:
    origin = _origin(records, origin)
    means, _ = weekly_mean(records, review_sentiment, predicate, week_span, origin)
    return WeeklySeries(absolute_week(origin), means)


_RATING_FILTERS = {
    RatingFilter.avp_like: lambda r: r.verified and r.is_like,
    RatingFilter.nonavp_all: is_nonavp,
}


def cumulative_rating(
    records: Sequence[ReviewRecord],
    rating_filter: RatingFilter,
    week_span: int,
    origin: Optional[dt.date] = None,
) -> WeeklySeries:
    """Running mean rating; weeks before the first matching review are 0 and masked out."""
    origin = _origin(records, origin)
    chosen, weeks = _select(records, _RATING_FILTERS[RatingFilter(rating_filter)], week_span, origin)
    ratings = np.array([r.rating for r in chosen], dtype=float)
    counts = np.cumsum(np.bincount(weeks, minlength=week_span)[:week_span])
    sums = np.cumsum(np.bincount(weeks, weights=ratings, minlength=week_span)[:week_span]) if len(chosen) else np.zeros(week_span)
    defined = counts > 0
    values = np.zeros(week_span)
    values[defined] = sums[defined] / counts[defined]
    return WeeklySeries(absolute_week(origin), values, defined)


@dataclass(frozen=True, eq=False)
class ProductLifecycle:
    """All weekly series of one product on a shared grid."""

    product_id: str
    price: Optional[float]
    origin: dt.date
    sales_count: WeeklySeries
    nonavp_count: WeeklySeries
    helpfulness_avp: WeeklySeries
    sentiment_avp: WeeklySeries
    helpfulness_nonavp: WeeklySeries
    sentiment_nonavp: WeeklySeries
    cum_avp_like_rating: WeeklySeries
    cum_nonavp_rating: WeeklySeries
    revenue: WeeklySeries
    sales_density: WeeklySeries
    bandwidth: float
    nonavp_fraction: float
    reviews: Tuple[ReviewRecord, ...] = field(repr=False, default=())

    def __len__(self) -> int:
        return len(self.sales_count)

    @property
    def epoch_week(self) -> int:
        return self.sales_count.epoch_week

    def named_series(self) -> List[Tuple[str, WeeklySeries]]:
        return [
            ("sales_count", self.sales_count),
            ("nonavp_count", self.nonavp_count),
            ("helpfulness_avp", self.helpfulness_avp),
            ("sentiment_avp", self.sentiment_avp),
            ("helpfulness_nonavp", self.helpfulness_nonavp),
            ("sentiment_nonavp", self.sentiment_nonavp),
            ("cum_avp_like_rating", self.cum_avp_like_rating),
            ("cum_nonavp_rating", self.cum_nonavp_rating),
            ("revenue", self.revenue),
            ("sales_density", self.sales_density),
        ]

    def exogenous(self) -> Tuple[np.ndarray, np.ndarray]:
        """The six allied series as a (weeks x 6) matrix plus the row validity mask.

        Cumulative ratings are mapped to [0, 1]. A rating population that never
        appears keeps its zero column and does not invalidate any rows.
        """
        columns = [
            self.helpfulness_avp.values,
            self.sentiment_avp.values,
            _unit_rating(self.cum_avp_like_rating),
            self.helpfulness_nonavp.values,
            self.sentiment_nonavp.values,
            _unit_rating(self.cum_nonavp_rating),
        ]
        mask = np.ones(len(self), dtype=bool)
        for s in (self.cum_avp_like_rating, self.cum_nonavp_rating):
            if s.mask is not None and s.mask.any():
                mask &= s.mask
        return np.column_stack(columns), mask

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"week": np.arange(len(self))})
        for name, s in self.named_series():
            df[name] = s.values
            if s.mask is not None:
                df[f"{name}_mask"] = s.mask.astype(int)
        return df


def _unit_rating(s: WeeklySeries) -> np.ndarray:
    out = np.where(s.valid, (s.values - 1.0) / 4.0, 0.0)
    return np.clip(out, 0.0, 1.0)


def build_lifecycle(
    product_id: str,
    records: Sequence[ReviewRecord],
    price: Optional[float] = None,
    origin: Optional[dt.date] = None,
    week_span: Optional[int] = None,
) -> ProductLifecycle:
    """Derive every weekly series of a product.

    Without an explicit `origin` the grid is relative (week 0 = first review);
    pairs pass a shared absolute week start instead.
    """
    from . import kde

    if not records and (origin is None or week_span is None):
        raise errors.InsufficientData(f"reviews of {product_id}", 1, 0)
    records = sorted(records, key=lambda r: r.date)
    origin = _origin(records, origin)
    if week_span is None:
        week_span = max((r.date - origin).days // 7 for r in records) + 1

    sales = bin_weekly(records, is_avp, week_span, origin)
    nonavp = bin_weekly(records, is_nonavp, week_span, origin)
    epoch = sales.epoch_week
    if price is None:
        log.warning("No price for %s; revenue is left at zero", product_id)
    revenue = WeeklySeries(epoch, sales.values * (price if price is not None else 0.0))

    density = kde.estimate_density_or_empty(sales.values)
    n_total = len(records)
    return ProductLifecycle(
        product_id=product_id,
        price=price,
        origin=origin,
        sales_count=sales,
        nonavp_count=nonavp,
        helpfulness_avp=weekly_helpfulness(records, is_avp, week_span, origin),
        sentiment_avp=weekly_sentiment(records, is_avp, week_span, origin),
        helpfulness_nonavp=weekly_helpfulness(records, is_nonavp, week_span, origin),
        sentiment_nonavp=weekly_sentiment(records, is_nonavp, week_span, origin),
        cum_avp_like_rating=cumulative_rating(records, RatingFilter.avp_like, week_span, origin),
        cum_nonavp_rating=cumulative_rating(records, RatingFilter.nonavp_all, week_span, origin),
        revenue=revenue,
        sales_density=WeeklySeries(epoch, density.values),
        bandwidth=density.bandwidth,
        nonavp_fraction=float(nonavp.values.sum() / n_total) if n_total else 0.0,
        reviews=tuple(records),
    )


def _as_array(x: ArrayLike) -> np.ndarray:
    if isinstance(x, WeeklySeries):
        return x.values
    return np.asarray(x, dtype=float)


def align(x: WeeklySeries, y: WeeklySeries) -> Tuple[np.ndarray, np.ndarray]:
    """Crop two series to their common absolute weeks."""
    start = max(x.epoch_week, y.epoch_week)
    stop = min(x.epoch_week + len(x), y.epoch_week + len(y))
    if stop <= start:
        raise errors.InsufficientData("overlapping weeks", 1, 0)
    return (x.values[start - x.epoch_week:stop - x.epoch_week],
            y.values[start - y.epoch_week:stop - y.epoch_week])


def _paired(x: ArrayLike, y: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(x, WeeklySeries) and isinstance(y, WeeklySeries):
        return align(x, y)
    return _as_array(x), _as_array(y)


def ccf(x: ArrayLike, y: ArrayLike, max_lag: int) -> np.ndarray:
    """Cross-correlation of x(i) with y(i + k) for k = -max_lag..max_lag.

    Means and norms are taken over the overlapping index set at each lag.
    """
    if max_lag < 0:
        raise errors.InvalidArgument(f"max_lag must be non-negative, got {max_lag}")
    xs, ys = _paired(x, y)
    out = np.empty(2 * max_lag + 1)
    for pos, k in enumerate(range(-max_lag, max_lag + 1)):
        lo = max(0, -k)
        hi = min(len(xs), len(ys) - k)
        if hi - lo < 3:
            raise errors.InsufficientData(f"overlap at lag {k}", 3, max(0, hi - lo))
        xw = xs[lo:hi] - xs[lo:hi].mean()
        yw = ys[lo + k:hi + k] - ys[lo + k:hi + k].mean()
        denom = np.sqrt(np.dot(xw, xw) * np.dot(yw, yw))
        if denom == 0:
            raise errors.UndefinedCorrelation(k)
        out[pos] = np.dot(xw, yw) / denom
    return np.clip(out, -1.0, 1.0)


def ccf_lags(max_lag: int) -> np.ndarray:
    return np.arange(-max_lag, max_lag + 1)


def ccf_confidence_bound(n: int, level: float = 0.99) -> float:
    """Half-width of the band within which white-noise correlations fall."""
    if n < 1:
        raise errors.InvalidArgument(f"need at least one observation, got {n}")
    if not 0 < level < 1:
        raise errors.InvalidArgument(f"confidence level must be in (0, 1), got {level}")
    return float(stats.norm.ppf(0.5 + level / 2) / np.sqrt(n))


def mean_ccf(pairs: Iterable[Tuple[ArrayLike, ArrayLike]], max_lag: int) -> np.ndarray:
    vectors = [ccf(x, y, max_lag) for x, y in pairs]
    if not vectors:
        raise errors.InsufficientData("series pairs", 1, 0)
    return np.mean(vectors, axis=0)


def ccf_frame(x: ArrayLike, y: ArrayLike, max_lag: int, level: float = 0.99) -> pd.DataFrame:
    values = ccf(x, y, max_lag)
    xs, ys = _paired(x, y)
    n = min(len(xs), len(ys))
    bound = ccf_confidence_bound(n, level)
    return pd.DataFrame({"lag": ccf_lags(max_lag), "ccf": values, "lower": -bound, "upper": bound})


def minmax_normalize(x: ArrayLike) -> np.ndarray:
    values = _as_array(x)
    if values.size == 0:
        raise errors.DegenerateRange("cannot normalize an empty series")
    lo, hi = values.min(), values.max()
    if hi == lo:
        raise errors.DegenerateRange(f"constant series ({lo}) has no range")
    return (values - lo) / (hi - lo)


def aggregate_weeks(x: ArrayLike, block: int = 13) -> np.ndarray:
    """Sum consecutive blocks of weeks (13 weeks per quarter); a partial tail block is dropped."""
    if block < 1:
        raise errors.InvalidArgument(f"block must be positive, got {block}")
    values = _as_array(x)
    n_blocks = len(values) // block
    return values[:n_blocks * block].reshape(n_blocks, block).sum(axis=1)
