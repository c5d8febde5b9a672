"""Review streams, sentiment lexicons, price tables and pair manifests."""

import datetime as dt
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import pandas as pd
import pyarrow as pa
import pyarrow.compute as pc
from pyarrow import csv as pa_csv

from . import errors
from .schemas import (
    OPTIONAL_COUNT_FIELDS,
    REQUIRED_REVIEW_FIELDS,
    RF,
    PairArrowSchema,
    PriceArrowSchema,
    ReviewArrowSchema,
)
from .types import Outcome, PathLikeT

log = logging.getLogger(__name__)

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


@dataclass(frozen=True)
class ReviewRecord:
    product_id: str
    date: dt.date
    rating: int
    verified: bool
    helpful_votes: int
    total_votes: int
    pos_words: int = 0
    neg_words: int = 0
    word_count: int = 0
    comments: int = 0

    @property
    def is_like(self) -> bool:
        return self.rating >= 4

    def to_dict(self) -> Dict[str, Any]:
        return {
            RF.product_id.value: self.product_id,
            RF.date.value: self.date.isoformat(),
            RF.rating.value: self.rating,
            RF.verified.value: self.verified,
            RF.helpful_votes.value: self.helpful_votes,
            RF.total_votes.value: self.total_votes,
            RF.pos_words.value: self.pos_words,
            RF.neg_words.value: self.neg_words,
            RF.word_count.value: self.word_count,
            RF.comments.value: self.comments,
        }


@dataclass(frozen=True)
class Lexicon:
    positive: FrozenSet[str]
    negative: FrozenSet[str]

    def __post_init__(self):
        if self.positive & self.negative:
            raise errors.InvalidArgument("lexicon polarities overlap")


@dataclass(frozen=True)
class PriceTable:
    prices: Mapping[str, float]

    def __post_init__(self):
        for product_id, price in self.prices.items():
            if not price >= 0:
                raise errors.DomainError(f"negative or missing price for {product_id}: {price}")

    def get(self, product_id: str) -> Optional[float]:
        return self.prices.get(product_id)

    def __contains__(self, product_id: object) -> bool:
        return product_id in self.prices

    def __len__(self) -> int:
        return len(self.prices)


@dataclass(frozen=True)
class Diagnostic:
    """A non-fatal problem with one input line, product or pair."""

    where: str
    message: str


@dataclass
class ParseResult:
    records: Dict[str, List[ReviewRecord]] = field(default_factory=dict)
    diagnostics: List[Diagnostic] = field(default_factory=list)
    lines: int = 0

    @property
    def accepted(self) -> int:
        return sum(len(r) for r in self.records.values())

    @property
    def rejected(self) -> int:
        return len(self.diagnostics)


@dataclass(frozen=True)
class PairSpec:
    """One row of the pair manifest."""

    leader_id: str
    competitor_id: str
    label: Optional[Outcome] = None


def tokenize(text: str) -> List[str]:
    return [tok for tok in _TOKEN_SPLIT.split(text.lower()) if tok]


def score_sentiment(tokens: Iterable[str], lex: Lexicon) -> Tuple[int, int]:
    """Count positive and negative lexicon hits, with multiplicity."""
    cps = cns = 0
    for tok in tokens:
        if tok in lex.positive:
            cps += 1
        elif tok in lex.negative:
            cns += 1
    return cps, cns


def _read_word_list(path: Path) -> List[str]:
    if not path.is_file():
        raise errors.MissingPath(str(path))
    words = []
    with path.open(encoding="utf-8", errors="replace") as f:
        for line in f:
            word = line.strip().lower()
            if word and not word.startswith(";"):
                words.append(word)
    return words


def load_lexicon(pos_path: PathLikeT, neg_path: PathLikeT) -> Lexicon:
    positive = set(_read_word_list(Path(pos_path)))
    negative = set(_read_word_list(Path(neg_path)))
    overlap = positive & negative
    if overlap:
        log.warning("Dropping %d words listed as both positive and negative: %s",
                    len(overlap), ", ".join(sorted(overlap)[:10]))
    return Lexicon(frozenset(positive - overlap), frozenset(negative - overlap))


def _get_count(obj: Mapping[str, Any], name: str, default: Optional[int] = None) -> int:
    value = obj.get(name, default)
    if value is None:
        raise ValueError(f"missing field '{name}'")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"field '{name}' must be an integer, got {value!r}")
    if value < 0:
        raise ValueError(f"field '{name}' must be non-negative, got {value}")
    return value


def _parse_record(obj: Any, lexicon: Optional[Lexicon]) -> ReviewRecord:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    missing = [f.value for f in REQUIRED_REVIEW_FIELDS if f.value not in obj]
    if missing:
        raise ValueError(f"missing field(s) {', '.join(missing)}")

    product_id = obj[RF.product_id.value]
    if not isinstance(product_id, str) or not product_id:
        raise ValueError("product_id must be a non-empty string")
    try:
        date = dt.date.fromisoformat(obj[RF.date.value])
    except (TypeError, ValueError):
        raise ValueError(f"date must be YYYY-MM-DD, got {obj[RF.date.value]!r}") from None

    rating = obj[RF.rating.value]
    if isinstance(rating, bool) or not isinstance(rating, int):
        raise ValueError(f"rating must be an integer, got {rating!r}")
    if not 1 <= rating <= 5:
        raise ValueError(f"rating {rating} outside [1, 5]")
    verified = obj[RF.verified.value]
    if not isinstance(verified, bool):
        raise ValueError(f"verified must be a boolean, got {verified!r}")

    hv = _get_count(obj, RF.helpful_votes.value)
    tv = _get_count(obj, RF.total_votes.value)
    if hv > tv:
        raise ValueError(f"helpful_votes {hv} > total_votes {tv}")

    extras = {f.value: _get_count(obj, f.value, 0) for f in OPTIONAL_COUNT_FIELDS}
    text = obj.get("text")
    if RF.pos_words.value in obj or RF.neg_words.value in obj:
        cps = _get_count(obj, RF.pos_words.value)
        cns = _get_count(obj, RF.neg_words.value)
        if text is not None and RF.word_count.value not in obj and isinstance(text, str):
            extras[RF.word_count.value] = len(tokenize(text))
    elif text is not None:
        if not isinstance(text, str):
            raise ValueError("text must be a string")
        if lexicon is None:
            raise ValueError("review text given but no lexicon loaded")
        tokens = tokenize(text)
        cps, cns = score_sentiment(tokens, lexicon)
        if RF.word_count.value not in obj:
            extras[RF.word_count.value] = len(tokens)
    else:
        raise ValueError("need either text or pos_words/neg_words")

    return ReviewRecord(
        product_id=product_id,
        date=date,
        rating=rating,
        verified=verified,
        helpful_votes=hv,
        total_votes=tv,
        pos_words=cps,
        neg_words=cns,
        **extras,
    )


def parse_reviews(
    lines: Iterable[Union[str, bytes]],
    lexicon: Optional[Lexicon] = None,
    source: str = "<stream>",
) -> ParseResult:
    """Parse JSON-lines reviews; every line is either accepted or reported.

    Byte lines are decoded one at a time as UTF-8.
    """
    result = ParseResult()
    grouped: Dict[str, List[ReviewRecord]] = defaultdict(list)
    for lineno, line in enumerate(lines, 1):
        result.lines += 1
        try:
            if isinstance(line, bytes):
                try:
                    line = line.decode("utf-8")
                except UnicodeDecodeError as e:
                    raise ValueError(f"invalid UTF-8 at byte {e.start}") from None
            line = line.strip()
            if not line:
                raise ValueError("empty line")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"malformed JSON ({e.msg})") from None
            record = _parse_record(obj, lexicon)
        except ValueError as e:
            result.diagnostics.append(Diagnostic(f"{source}:{lineno}", str(e)))
            continue
        grouped[record.product_id].append(record)

    # stable sort keeps input order for same-day reviews
    result.records = {pid: sorted(recs, key=lambda r: r.date) for pid, recs in sorted(grouped.items())}
    for diag in result.diagnostics[:20]:
        log.warning("Rejected %s: %s", diag.where, diag.message)
    if result.rejected > 20:
        log.warning("... %d more rejected lines", result.rejected - 20)
    log.info("Parsed %s: %d lines, %d accepted, %d rejected, %d products",
             source, result.lines, result.accepted, result.rejected, len(result.records))
    return result


def parse_reviews_file(path: PathLikeT, lexicon: Optional[Lexicon] = None) -> ParseResult:
    path = Path(path)
    if not path.is_file():
        raise errors.MissingPath(str(path))
    with path.open("rb") as f:
        return parse_reviews(f, lexicon=lexicon, source=str(path))


def serialize_reviews(records: Iterable[ReviewRecord]) -> Iterator[str]:
    for record in records:
        yield json.dumps(record.to_dict(), sort_keys=False)


def write_reviews(records: Iterable[ReviewRecord], path: PathLikeT) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open("w", encoding="utf-8") as f:
        for line in serialize_reviews(records):
            f.write(line + "\n")
            n += 1
    log.info("Wrote %d reviews to %s", n, path)
    return n


def records_to_table(records: Iterable[ReviewRecord]) -> pa.Table:
    rows = [r.to_dict() for r in records]
    for row in rows:
        row[RF.date.value] = dt.date.fromisoformat(row[RF.date.value])
    return pa.Table.from_pylist(rows, schema=ReviewArrowSchema)


def summarize(records: Mapping[str, Sequence[ReviewRecord]]) -> pd.DataFrame:
    """Per-product review counts, date range and mean rating."""
    table = records_to_table(r for recs in records.values() for r in recs)
    if table.num_rows == 0:
        return pd.DataFrame(columns=["product_id", "n_reviews", "n_avp", "n_nonavp",
                                     "first_date", "last_date", "mean_rating"])
    table = table.append_column("avp", pc.cast(table[RF.verified.value], pa.int64()))
    grouped = table.group_by(RF.product_id.value).aggregate([
        (RF.rating.value, "count"),
        ("avp", "sum"),
        (RF.date.value, "min"),
        (RF.date.value, "max"),
        (RF.rating.value, "mean"),
    ])
    df = grouped.to_pandas().rename(columns={
        "rating_count": "n_reviews",
        "avp_sum": "n_avp",
        "date_min": "first_date",
        "date_max": "last_date",
        "rating_mean": "mean_rating",
    })
    df["n_nonavp"] = df["n_reviews"] - df["n_avp"]
    df = df[["product_id", "n_reviews", "n_avp", "n_nonavp", "first_date", "last_date", "mean_rating"]]
    return df.sort_values("product_id", kind="stable").reset_index(drop=True)


def _read_csv(path: Path, schema: pa.Schema, required: Sequence[str]) -> pa.Table:
    if not path.is_file():
        raise errors.MissingPath(str(path))
    try:
        table = pa_csv.read_csv(
            str(path),
            convert_options=pa_csv.ConvertOptions(
                column_types={f.name: f.type for f in schema},
                strings_can_be_null=True,
            ),
        )
    except pa.ArrowInvalid as e:
        raise errors.ConfigurationError(f"cannot read {path}: {e}") from e
    missing = [c for c in required if c not in table.column_names]
    if missing:
        raise errors.ConfigurationError(f"{path}: missing column(s) {', '.join(missing)}")
    return table


def load_prices(path: PathLikeT) -> PriceTable:
    table = _read_csv(Path(path), PriceArrowSchema, ["product_id", "price"])
    prices: Dict[str, float] = {}
    for product_id, price in zip(table["product_id"].to_pylist(), table["price"].to_pylist()):
        if product_id is None or price is None:
            log.warning("Skipping incomplete price row in %s", path)
            continue
        prices[product_id] = float(price)
    return PriceTable(prices)


def write_prices(prices: PriceTable, path: PathLikeT) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(sorted(prices.prices.items()), columns=["product_id", "price"])
    df.to_csv(path, index=False, float_format="%.6f")


def load_pair_manifest(path: PathLikeT) -> List[PairSpec]:
    table = _read_csv(Path(path), PairArrowSchema, ["leader_id", "competitor_id"])
    labels = table["label"].to_pylist() if "label" in table.column_names else [None] * table.num_rows
    pairs = []
    for leader, competitor, label in zip(table["leader_id"].to_pylist(), table["competitor_id"].to_pylist(), labels):
        if not leader or not competitor:
            raise errors.ConfigurationError(f"{path}: empty product id in pair manifest")
        if label is not None and label.strip():
            try:
                outcome: Optional[Outcome] = Outcome(label.strip().lower())
            except ValueError:
                raise errors.ConfigurationError(f"{path}: unknown pair label {label!r}") from None
        else:
            outcome = None
        pairs.append(PairSpec(leader, competitor, outcome))
    return pairs


def write_pair_manifest(pairs: Iterable[PairSpec], path: PathLikeT) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(
        [(p.leader_id, p.competitor_id, p.label.value if p.label else "") for p in pairs],
        columns=["leader_id", "competitor_id", "label"],
    )
    df.to_csv(path, index=False)

