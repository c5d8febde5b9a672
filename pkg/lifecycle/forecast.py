"""Single-product sales-density forecasting with a learned growth rate.

Densities evolve as SD(t+1) = SD(t)(1 + r(t)(1 - SD(t)/K)). Observed growth
rates are recovered by inverting that step, a VARX on the six allied series
forecasts the next rate, and the step is applied once more. Every model is
scored one week ahead over a sliding training window.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import errors, varx
from .config import ForecastConfig
from .series import ProductLifecycle
from .types import ExogSelection

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GrowthSeries:
    values: np.ndarray
    mask: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


@dataclass(eq=False)
class ForecastEvaluation:
    model_name: str
    product_id: str = ""
    origins: List[int] = field(default_factory=list)
    predictions: List[float] = field(default_factory=list)
    truths: List[float] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)

    def add(self, origin: int, prediction: float, truth: float) -> None:
        self.origins.append(origin)
        self.predictions.append(float(prediction))
        self.truths.append(float(truth))

    @property
    def n_units(self) -> int:
        return len(self.predictions)

    @property
    def residuals(self) -> np.ndarray:
        return np.asarray(self.predictions) - np.asarray(self.truths)

    @property
    def mae(self) -> float:
        return mae(self.predictions, self.truths)

    def detail_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "product_id": self.product_id,
            "model": self.model_name,
            "week": np.asarray(self.origins, dtype=int) + 1,
            "prediction": self.predictions,
            "truth": self.truths,
        })


def mae(pred: Sequence[float], truth: Sequence[float]) -> float:
    pred_a = np.asarray(pred, dtype=float)
    truth_a = np.asarray(truth, dtype=float)
    if pred_a.shape != truth_a.shape:
        raise errors.InvalidArgument(f"prediction and truth lengths differ: {pred_a.shape} vs {truth_a.shape}")
    if pred_a.size == 0:
        raise errors.InvalidArgument("mean absolute error of zero predictions")
    return float(np.mean(np.abs(pred_a - truth_a)))


def aggregate_mae(evaluations: Iterable[ForecastEvaluation]) -> float:
    """Unweighted mean of per-product errors."""
    values = [e.mae for e in evaluations if e.n_units]
    if not values:
        raise errors.InsufficientData("evaluated products", 1, 0)
    return float(np.mean(values))


def lvc_step(sd: float, r: float, capacity: float = 1.0) -> float:
    nxt = sd * (1 + r * (1 - sd / capacity))
    return min(max(nxt, 0.0), capacity)


def invert_growth(
    sd: Sequence[float],
    capacity: float = 1.0,
    epsilon: float = 1e-4,
    floor: float = 1e-8,
) -> GrowthSeries:
    """Growth rates r(t) taking SD(t) to SD(t+1); the last week has no successor and is masked."""
    sd = np.asarray(sd, dtype=float)
    T = len(sd)
    values = np.zeros(T)
    mask = np.zeros(T, dtype=bool)
    if T == 0:
        return GrowthSeries(values, mask)
    bracket = 1 - sd[:-1] / capacity
    ok = (sd[:-1] >= floor) & (bracket >= floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (sd[1:] / sd[:-1] - 1) / bracket
    values[:-1] = np.where(ok, r, 0.0)
    mask[:-1] = ok
    values[0], mask[0] = epsilon, True
    return GrowthSeries(values, mask)


def first_valid_index(sd: Sequence[float], floor: float = 1e-8) -> int:
    above = np.flatnonzero(np.asarray(sd) >= floor)
    return int(above[0]) if len(above) else len(sd)


def evaluation_origins(length: int, window: int, first_valid: int = 0) -> range:
    """Forecast origins t (predicting week t + 1) for a series of `length` weeks.

    The first origin closes the first full training window, so there are
    length - window - first_valid of them.
    """
    return range(first_valid + window - 1, length - 1)


def passes_sales_filter(lifecycle: ProductLifecycle, min_median_sales: float = 7.0) -> bool:
    return float(np.median(lifecycle.sales_count.values)) >= min_median_sales


def _fallback_rate(r: np.ndarray, ok: np.ndarray) -> float:
    return float(np.mean(r[ok])) if ok.any() else 0.0


def _fit_window(y, X, mask, config: ForecastConfig) -> varx.VarxModel:
    selection = ExogSelection(config.exog_selection)
    if selection == ExogSelection.bic:
        return varx.select_exog(y, X, p=config.lag, exog_lag=config.exog_lag, mask=mask)
    return varx.fit(y, X, p=config.lag, exog_lag=config.exog_lag, mask=mask,
                    use_exog=selection == ExogSelection.always)


def predict_growth(
    r: np.ndarray,
    r_mask: np.ndarray,
    exog: Optional[np.ndarray],
    exog_mask: Optional[np.ndarray],
    t: int,
    config: ForecastConfig,
) -> Tuple[np.ndarray, bool]:
    """Forecast r(t) from the growth rates known at origin t; returns (rates, used_fallback).

    The training window is the `window` weeks of density ending at t, which
    fix the rates r(t - window + 1) .. r(t - 1). `r` may hold one column per
    product; masked weeks drop their regression rows.
    """
    lo = max(t - config.window + 1, 0)
    y = r[lo:t]
    mask = r_mask[lo:t]
    if mask.ndim == 2:
        mask = mask.all(axis=1)
    X = X_hist = None
    if exog is not None:
        X = np.array(exog[lo:t], dtype=float)
        if exog_mask is not None:
            X[~exog_mask[lo:t]] = np.nan
        X_hist = exog[lo:t - config.exog_lag + 1]
    try:
        model = _fit_window(y, X, mask, config)
    except errors.InsufficientData as e:
        log.debug("Window ending at week %d: %s, using the window mean", t, e)
        y2 = y[:, None] if y.ndim == 1 else y
        m2 = r_mask[lo:t, None] if r_mask.ndim == 1 else r_mask[lo:t]
        return np.array([_fallback_rate(y2[:, j], m2[:, j]) for j in range(y2.shape[1])]), True
    return varx.predict_one(model, y, X_hist), False


def backtest_density(
    sd: Sequence[float],
    exog: Optional[np.ndarray] = None,
    exog_mask: Optional[np.ndarray] = None,
    config: Optional[ForecastConfig] = None,
    product_id: str = "",
) -> ForecastEvaluation:
    """One-week-ahead density forecasts over every sliding window of `sd`."""
    config = config or ForecastConfig()
    sd = np.asarray(sd, dtype=float)
    growth = invert_growth(sd, config.capacity, config.epsilon, config.floor)
    first = first_valid_index(sd, config.floor)
    origins = evaluation_origins(len(sd), config.window, first)
    if len(origins) < 1:
        raise errors.InsufficientData(f"weeks of {product_id or 'series'}", first + config.window + 1, len(sd))

    evaluation = ForecastEvaluation("LVC-Sale", product_id)
    fallbacks = 0
    for t in origins:
        rate, fell_back = predict_growth(growth.values, growth.mask, exog, exog_mask, t, config)
        fallbacks += fell_back
        evaluation.add(t, lvc_step(sd[t], float(rate[0]), config.capacity), sd[t + 1])
    if fallbacks:
        evaluation.diagnostics.append(f"{fallbacks} windows without enough valid rows used the mean rate")
    return evaluation


def lvc_sale_backtest(lifecycle: ProductLifecycle, config: Optional[ForecastConfig] = None) -> ForecastEvaluation:
    config = config or ForecastConfig()
    exog, exog_mask = lifecycle.exogenous()
    return backtest_density(lifecycle.sales_density.values, exog, exog_mask, config, lifecycle.product_id)
