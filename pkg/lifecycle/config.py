"""Configuration-related dataclasses."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .types import CurveFamily, ExogSelection


@dataclass
class KdeConfig:
    """Diffusion density estimation."""

    # degenerate histograms (fewer than this many occupied bins) skip the fixed-point search
    min_occupied_bins: int = 2

    # upper ends of the root-finding brackets, tried in order (unit-interval diffusion time)
    brackets: Tuple[float, ...] = (0.01, 0.1, 0.5)


@dataclass
class KscConfig:
    """K-Spectral-Centroid clustering."""

    k: int = 4
    max_iter: int = 100
    seed: int = 0

    # maximal |shift| as a fraction of the profile length
    q_fraction: float = 0.25

    # inverse power iteration for the centroid eigenvector
    eig_tol: float = 1e-10
    eig_max_iter: int = 500


@dataclass
class ForecastConfig:
    """Rolling-window single-product forecasting."""

    window: int = 20
    lag: int = 1

    # 1 keeps the backtest causal, 0 uses same-week exogenous values
    exog_lag: int = 1

    # per window, keep the allied series only when they lower the BIC
    exog_selection: ExogSelection = ExogSelection.bic

    # r(0) seed and inversion guard
    epsilon: float = 1e-4
    floor: float = 1e-8
    capacity: float = 1.0

    # products whose median weekly AVP count is below this are not evaluated
    min_median_sales: float = 7.0

    arima_order: Tuple[int, int, int] = (1, 1, 1)
    curve_families: Tuple[CurveFamily, ...] = (
        CurveFamily.fourier, CurveFamily.power, CurveFamily.gaussian,
    )

    # Levenberg-Marquardt for the gaussian curve family
    curve_fit_max_evals: int = 800
    curve_fit_tol: float = 1e-10


@dataclass
class CompetitionConfig:
    """Two-product competition dynamics and labelling."""

    # coefficient contribution of a single week (history of 20 weeks)
    delta: float = 0.05
    initial_coefficient: float = 0.5

    # recovery threshold relative to the pre-breakeven leader peak
    theta: float = 0.9

    # weeks after which an unrecovered leader is labelled dead, None for the whole series
    horizon: Optional[int] = None

    # False fits one VARX per product on its own exogenous series
    coupled: bool = True


@dataclass
class FactorConfig:
    """Competition factor predicates."""

    pre_entry_reviews: int = 50
    introduction_gap_days: int = 730
    price_gap: float = 0.5
    sales_gap: float = 1.0
    rating_gap: float = 1.0
    early_weeks: int = 4

    # "sentiment coefficient > 0" read as > 0.5 on the [0, 1] scale unless literal
    literal_sentiment: bool = False

    # None evaluates factor 1 over the whole overlap
    leader_rating_weeks: Optional[int] = None


@dataclass
class RegressionConfig:
    """Cross-validated sparse regression."""

    folds: int = 3
    inner_folds: int = 3
    seed: int = 0
    n_lambdas: int = 30
    lambda_min_ratio: float = 1e-6
    alphas: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

    # "min" takes the lowest inner-CV error, "1se" the sparsest within one standard error
    selection: str = "min"

    tol: float = 1e-7
    max_sweeps: int = 100_000


@dataclass
class RunConfig:
    """Inputs, outputs and per-subcommand parameters of a CLI run."""

    reviews: Optional[Path] = None
    prices: Optional[Path] = None
    lexicon: Optional[Tuple[Path, Path]] = None
    pairs: Optional[Path] = None
    scenario: Optional[Path] = None
    out: Path = Path("out")
    force: bool = False
    seed: int = 0
    threads: Optional[int] = None

    ksc: KscConfig = field(default_factory=KscConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    competition: CompetitionConfig = field(default_factory=CompetitionConfig)
    factors: FactorConfig = field(default_factory=FactorConfig)
    regression: RegressionConfig = field(default_factory=RegressionConfig)

    def parameters(self) -> Dict[str, Any]:
        """Settings that shape report contents; I/O paths and thread counts excluded."""
        return {
            "seed": self.seed,
            "ksc": self.ksc,
            "forecast": self.forecast,
            "competition": self.competition,
            "factors": self.factors,
            "regression": self.regression,
        }
