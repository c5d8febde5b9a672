from functools import lru_cache
from types import MappingProxyType
from typing import Mapping

import pyarrow as pa

from .types import StrEnum


class ReviewField(StrEnum):
    product_id = "product_id"
    date = "date"
    rating = "rating"
    verified = "verified"
    helpful_votes = "helpful_votes"
    total_votes = "total_votes"

    # Sentiment lexicon hits
    pos_words = "pos_words"
    neg_words = "neg_words"

    # Optional extras
    word_count = "word_count"
    comments = "comments"

    @property
    def pa_type(self) -> pa.DataType:
        return _get_review_pyarrow_types()[self]


RF = ReviewField


@lru_cache
def _get_review_pyarrow_types() -> Mapping[str, pa.DataType]:
    return MappingProxyType(
        {
            RF.product_id.value: pa.string(),
            RF.date.value: pa.date32(),
            RF.rating.value: pa.int8(),
            RF.verified.value: pa.bool_(),
            RF.helpful_votes.value: pa.int64(),
            RF.total_votes.value: pa.int64(),
            RF.pos_words.value: pa.int64(),
            RF.neg_words.value: pa.int64(),
            RF.word_count.value: pa.int64(),
            RF.comments.value: pa.int64(),
        }
    )


# noinspection PyUnresolvedReferences
ReviewArrowSchema: pa.Schema = pa.schema(
    (fld.value, fld.pa_type) for fld in ReviewField
)

REQUIRED_REVIEW_FIELDS = (
    RF.product_id,
    RF.date,
    RF.rating,
    RF.verified,
    RF.helpful_votes,
    RF.total_votes,
)
OPTIONAL_COUNT_FIELDS = (RF.word_count, RF.comments)

PriceArrowSchema: pa.Schema = pa.schema(
    [("product_id", pa.string()), ("price", pa.float64())]
)

PairArrowSchema: pa.Schema = pa.schema(
    [("leader_id", pa.string()), ("competitor_id", pa.string()), ("label", pa.string())]
)
