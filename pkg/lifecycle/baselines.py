"""Reference forecasters: ARIMA by Hannan-Rissanen and three curve families.

All of them follow the sliding protocol of `forecast.backtest_density`: fit
on the `window` weeks ending at the origin, predict the next week.
"""

import logging
import warnings
from math import comb
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from . import errors
from .config import ForecastConfig
from .forecast import ForecastEvaluation, evaluation_origins
from .types import CurveFamily

log = logging.getLogger(__name__)


class FitFailed(errors.LifecycleError):
    pass


def _lagged(z: np.ndarray, rows: np.ndarray, lags: int) -> np.ndarray:
    return np.column_stack([z[rows - i] for i in range(1, lags + 1)]) if lags else np.empty((len(rows), 0))


def fit_ar(z: np.ndarray, p: int) -> Tuple[float, np.ndarray, np.ndarray]:
    """Least-squares AR(p) with intercept; residuals are NaN for the first p values."""
    z = np.asarray(z, dtype=float)
    resid = np.full(len(z), np.nan)
    if p == 0:
        c = float(z.mean())
        return c, np.zeros(0), z - c
    rows = np.arange(p, len(z))
    if len(rows) < p + 2:
        raise errors.InsufficientData("AR rows", p + 2, len(rows))
    Z = np.column_stack([np.ones(len(rows)), _lagged(z, rows, p)])
    coef = np.linalg.lstsq(Z, z[rows], rcond=None)[0]
    resid[rows] = z[rows] - Z @ coef
    return float(coef[0]), coef[1:], resid


def is_invertible(theta: np.ndarray) -> bool:
    """True when every root of 1 + theta_1 x + ... + theta_q x^q lies outside the unit circle."""
    if len(theta) == 0 or not np.any(theta):
        return True
    poly = np.r_[theta[::-1], 1.0]
    poly = np.trim_zeros(poly, "f")
    return bool(np.all(np.abs(np.roots(poly)) > 1.0))


def fit_arma(z: np.ndarray, p: int, q: int) -> Tuple[float, np.ndarray, np.ndarray]:
    """Hannan-Rissanen: a long autoregression supplies innovation proxies for an OLS ARMA fit."""
    z = np.asarray(z, dtype=float)
    if q == 0:
        c, phi, _ = fit_ar(z, p)
        return c, phi, np.zeros(0)
    m = max(p, q) + 2
    _, _, proxy = fit_ar(z, m)
    start = m + q
    rows = np.arange(max(start, p), len(z))
    if len(rows) < 1 + p + q + 1:
        raise errors.InsufficientData("ARMA rows", 2 + p + q, len(rows))
    Z = np.column_stack([np.ones(len(rows)), _lagged(z, rows, p), _lagged(proxy, rows, q)])
    coef = np.linalg.lstsq(Z, z[rows], rcond=None)[0]
    return float(coef[0]), coef[1:1 + p], coef[1 + p:]


def _arma_next(z: np.ndarray, c: float, phi: np.ndarray, theta: np.ndarray) -> float:
    p, q = len(phi), len(theta)
    e = np.zeros(len(z))
    for t in range(max(p, q), len(z)):
        e[t] = z[t] - c - np.dot(phi, z[t - p:t][::-1]) - np.dot(theta, e[t - q:t][::-1])
    pred = c
    if p:
        pred += np.dot(phi, z[len(z) - p:][::-1])
    if q:
        pred += np.dot(theta, e[len(e) - q:][::-1])
    return float(pred)


def _undifference(history: np.ndarray, z_next: float, d: int) -> float:
    """Turn a forecast of the d-th difference back into a level forecast."""
    value = z_next
    for k in range(1, d + 1):
        value -= (-1) ** k * comb(d, k) * history[-k]
    return float(value)


def arima_one_step(window_values: np.ndarray, p: int, d: int, q: int) -> Tuple[float, bool]:
    """Next-value forecast; the flag reports a fall back to AR(p) on a non-invertible MA part."""
    z = np.diff(window_values, n=d) if d else np.asarray(window_values, dtype=float)
    c, phi, theta = fit_arma(z, p, q)
    fell_back = False
    if not is_invertible(theta):
        c, phi, _ = fit_ar(z, p)
        theta = np.zeros(0)
        fell_back = True
    return _undifference(window_values, _arma_next(z, c, phi, theta), d), fell_back


def arima_forecast(
    series: Sequence[float],
    p: int = 1,
    d: int = 1,
    q: int = 1,
    window: int = 20,
    first_valid: int = 0,
    product_id: str = "",
) -> ForecastEvaluation:
    series = np.asarray(series, dtype=float)
    need = window + d + max(p, q) + 2
    if len(series) - first_valid < need:
        raise errors.InsufficientData(f"weeks for ARIMA({p},{d},{q})", need, len(series) - first_valid)
    evaluation = ForecastEvaluation("ARIMA", product_id)
    fallbacks = 0
    for t in evaluation_origins(len(series), window, first_valid):
        train = series[t - window + 1:t + 1]
        try:
            pred, fell_back = arima_one_step(train, p, d, q)
        except errors.InsufficientData as e:
            evaluation.diagnostics.append(f"origin {t}: {e}")
            continue
        fallbacks += fell_back
        evaluation.add(t, pred, series[t + 1])
    if fallbacks:
        msg = f"{fallbacks} windows had a non-invertible MA part and used AR({p})"
        log.debug("%s: %s", product_id, msg)
        evaluation.diagnostics.append(msg)
    return evaluation


def fourier_design(t: np.ndarray, omega: float, order: int = 2) -> np.ndarray:
    cols = [np.ones(len(t))]
    for k in range(1, order + 1):
        cols += [np.cos(k * omega * t), np.sin(k * omega * t)]
    return np.column_stack(cols)


def fit_fourier(t: np.ndarray, y: np.ndarray, omega: float, order: int = 2) -> np.ndarray:
    """Coefficients [a0, a1, b1, a2, b2, ...] of a0 + sum a_k cos(k w t) + b_k sin(k w t)."""
    return np.linalg.lstsq(fourier_design(t, omega, order), y, rcond=None)[0]


def fit_power(t: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """a t^b by a straight line in log-log space."""
    if np.any(t < 1):
        raise FitFailed("power fit needs t >= 1")
    if np.any(y <= 0):
        raise FitFailed("power fit needs strictly positive values")
    slope, intercept = np.polyfit(np.log(t), np.log(y), 1)
    return float(np.exp(intercept)), float(slope)


def gaussian_curve(t: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    return a * np.exp(-(((t - b) / c) ** 2))


def _moment_init(t: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    w = np.clip(y, 0, None)
    if w.sum() <= 0:
        return float(np.max(y)), float(t.mean()), float(np.ptp(t) / 4 or 1.0)
    b = np.dot(w, t) / w.sum()
    var = np.dot(w, (t - b) ** 2) / w.sum()
    return float(w.max()), float(b), float(np.sqrt(2 * var) or 1.0)


def _peak_init(t: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    i = int(np.argmax(y))
    return float(y[i]), float(t[i]), float(np.ptp(t) / 4 or 1.0)


def _fit_from(t, y, theta, max_evals: int, tol: float) -> np.ndarray:
    with warnings.catch_warnings():
        # covariance is unused
        warnings.simplefilter("ignore", optimize.OptimizeWarning)
        try:
            popt, _ = optimize.curve_fit(gaussian_curve, t, y, p0=theta, maxfev=max_evals, xtol=tol, ftol=tol)
        except (RuntimeError, ValueError) as e:
            raise FitFailed(str(e)) from e
    return popt


def fit_gaussian(t: np.ndarray, y: np.ndarray, max_evals: int = 800, tol: float = 1e-10) -> Tuple[float, float, float]:
    """a exp(-((t - b)/c)^2) by Levenberg-Marquardt, restarting from moment estimates on failure."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    for init in (_peak_init, _moment_init):
        try:
            a, b, c = _fit_from(t, y, init(t, y), max_evals, tol)
        except FitFailed as e:
            log.debug("Gaussian fit from %s failed: %s", init.__name__, e)
            continue
        if np.all(np.isfinite([a, b, c])) and c != 0:
            return float(a), float(b), float(abs(c))
    raise FitFailed("Gaussian fit failed from both starting points")


def curve_one_step(values: np.ndarray, family: CurveFamily, config: Optional[ForecastConfig] = None) -> float:
    """Fit one curve family on local times 1..n and extrapolate to n + 1."""
    config = config or ForecastConfig()
    n = len(values)
    t = np.arange(1, n + 1, dtype=float)
    nxt = np.array([n + 1.0])
    family = CurveFamily(family)
    if family == CurveFamily.fourier:
        omega = 2 * np.pi / (2 * n)
        return float(fourier_design(nxt, omega) @ fit_fourier(t, values, omega))
    if family == CurveFamily.power:
        a, b = fit_power(t, values)
        return float(a * nxt[0] ** b)
    a, b, c = fit_gaussian(t, values, config.curve_fit_max_evals, config.curve_fit_tol)
    return float(gaussian_curve(nxt, a, b, c)[0])


_CURVE_NAMES = {CurveFamily.fourier: "Fourier", CurveFamily.power: "Power", CurveFamily.gaussian: "Gaussian"}


def curve_fit_forecast(
    series: Sequence[float],
    family: CurveFamily,
    window: int = 20,
    first_valid: int = 0,
    config: Optional[ForecastConfig] = None,
    product_id: str = "",
) -> ForecastEvaluation:
    series = np.asarray(series, dtype=float)
    family = CurveFamily(family)
    if len(series) - first_valid < window + 1:
        raise errors.InsufficientData(f"weeks for the {family} fit", window + 1, len(series) - first_valid)
    evaluation = ForecastEvaluation(_CURVE_NAMES[family], product_id)
    for t in evaluation_origins(len(series), window, first_valid):
        try:
            pred = curve_one_step(series[t - window + 1:t + 1], family, config)
        except FitFailed as e:
            evaluation.diagnostics.append(f"origin {t}: {e}")
            continue
        evaluation.add(t, pred, series[t + 1])
    if evaluation.diagnostics:
        log.debug("%s %s: skipped %d windows", product_id, family, len(evaluation.diagnostics))
    return evaluation
