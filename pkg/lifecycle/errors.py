from dataclasses import dataclass
from typing import Dict, Type


class LifecycleError(Exception):
    pass


class InvalidArgument(LifecycleError):
    pass


class DomainError(InvalidArgument):
    pass


class DegenerateRange(DomainError):
    pass


class UndefinedDistance(DomainError):
    pass


@dataclass
class UndefinedCorrelation(DomainError):
    lag: int

    def __post_init__(self):
        self.args = (f"correlation undefined at lag {self.lag} (constant overlap)",)


@dataclass
class InsufficientData(LifecycleError):
    what: str
    required: int
    available: int

    def __post_init__(self):
        self.args = (f"{self.what}: need {self.required}, got {self.available}",)


class ConfigurationError(LifecycleError):
    pass


@dataclass
class MissingPath(ConfigurationError):
    path: str

    def __post_init__(self):
        self.args = (f"no such file: {self.path}",)


@dataclass
class OutputExists(LifecycleError):
    path: str

    def __post_init__(self):
        self.args = (f"refusing to overwrite {self.path} (use --force)",)


@dataclass
class EmptyCluster(LifecycleError):
    cluster: int


# CLI exit status per error category, most specific class first
EXIT_CODES: Dict[Type[Exception], int] = {
    MissingPath: 3,
    ConfigurationError: 3,
    OutputExists: 4,
    InsufficientData: 6,
    DomainError: 7,
    InvalidArgument: 5,
    LifecycleError: 8,
}
UNEXPECTED_EXIT_CODE = 1


def exit_code(err: BaseException) -> int:
    for error_type, code in EXIT_CODES.items():
        if isinstance(err, error_type):
            return code
    return UNEXPECTED_EXIT_CODE
