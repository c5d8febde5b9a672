import datetime as dt
import logging
import os
import sys
from typing import Union

PathLikeT = Union[str, os.PathLike]
DateLikeT = Union[str, dt.date]

if sys.version_info >= (3, 11):
    # noinspection PyUnresolvedReferences
    from enum import StrEnum
else:
    from enum import Enum, auto

    class StrEnum(str, Enum):
        # noinspection PyTypeChecker
        def __new__(cls, value: Union[auto, str], *args, **kwargs):
            if not isinstance(value, (str, auto)):
                raise TypeError(
                    f"Not a string/auto type: {value=!r} [type={type(value)}]"
                )
            return super().__new__(cls, value, *args, **kwargs)

        def __repr__(self):
            """Return a string representation of the enumeration member."""
            return f"<{self.__class__.__name__}.{self.name}: '{self.value}'>"

        def __str__(self):
            """Return the value of the enumeration member."""
            return str(self.value)

        @staticmethod
        def _generate_next_value_(name: str, *args, **kwargs):
            return name


class LogLevel(StrEnum):
    CRITICAL = "CRITICAL"
    ERROR = "ERROR"
    WARNING = "WARNING"
    INFO = "INFO"
    DEBUG = "DEBUG"

    def to_int(self) -> int:
        return logging.getLevelName(self.value)


class Outcome(StrEnum):
    """Competition outcome for the previous leader."""

    death = "death"
    survival = "survival"
    undecided = "undecided"


class Role(StrEnum):
    leader = "leader"
    competitor = "competitor"


class RatingFilter(StrEnum):
    """Review subsets for cumulative ratings."""

    avp_like = "avp_like"
    nonavp_all = "nonavp_all"


class CurveFamily(StrEnum):
    fourier = "fourier"
    power = "power"
    gaussian = "gaussian"


class ExogSelection(StrEnum):
    """Whether a growth-rate window regresses on the allied series."""

    always = "always"
    bic = "bic"
    never = "never"


class Response(StrEnum):
    """Regression targets for competing pairs."""

    takeover_time = "takeover_time"
    recovery_time = "recovery_time"
    volume_pct = "volume_pct"


class Method(StrEnum):
    lasso = "lasso"
    elastic_net = "elastic_net"


class SpamPattern(StrEnum):
    """Shapes of non-AVP review bursts around the AVP sales peak."""

    organic = "organic"
    lead = "lead"
    lead_lagged = "lead_lagged"
    follow = "follow"
    buffered_lagged = "buffered_lagged"
    buffered_tight = "buffered_tight"


class PairPreset(StrEnum):
    death = "death"
    survival = "survival"
    undecided = "undecided"
