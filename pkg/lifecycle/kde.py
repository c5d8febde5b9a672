"""Diffusion kernel density estimation on weekly histograms.

Histograms are padded to a power-of-two grid and smoothed by damping their
cosine-transform coefficients, i.e. by running the heat equation with
reflecting boundaries. The diffusion time is chosen by the improved
Sheather-Jones fixed point; bandwidths are reported in weeks² (the variance
of the equivalent Gaussian kernel).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import fft, optimize

from . import errors
from .config import KdeConfig

log = logging.getLogger(__name__)

_PI_SQ = np.pi ** 2


@dataclass(frozen=True, eq=False)
class DensityProfile:
    values: np.ndarray
    bandwidth: float


def _grid_size(n: int) -> int:
    return 1 << max(2, int(np.ceil(np.log2(n))))


def _padded(histogram: Union[np.ndarray, Sequence[float]]) -> np.ndarray:
    hist = np.asarray(histogram, dtype=float)
    if hist.ndim != 1 or len(hist) == 0:
        raise errors.InvalidArgument("histogram must be a non-empty vector")
    if np.any(hist < 0) or not np.all(np.isfinite(hist)):
        raise errors.InvalidArgument("histogram counts must be finite and non-negative")
    padded = np.zeros(_grid_size(len(hist)))
    padded[:len(hist)] = hist
    return padded


def _fixed_point(t: float, n: float, i_sq: np.ndarray, a2: np.ndarray) -> float:
    ell = 7
    f = 2 * np.pi ** (2 * ell) * np.sum(i_sq ** ell * a2 * np.exp(-i_sq * _PI_SQ * t))
    for s in range(ell - 1, 1, -1):
        if not f > 0:
            return np.nan
        k0 = np.prod(np.arange(1, 2 * s, 2)) / np.sqrt(2 * np.pi)
        const = (1 + 0.5 ** (s + 0.5)) / 3
        time = (2 * const * k0 / n / f) ** (2 / (3 + 2 * s))
        f = 2 * np.pi ** (2 * s) * np.sum(i_sq ** s * a2 * np.exp(-i_sq * _PI_SQ * time))
    if not f > 0:
        return np.nan
    return t - (2 * n * np.sqrt(np.pi) * f) ** (-2 / 5)


def rule_of_thumb_bandwidth(histogram: Union[np.ndarray, Sequence[float]], n: Optional[float] = None) -> float:
    """Gaussian reference bandwidth (1.06 sigma n^-1/5), squared, in weeks².

    A histogram with all mass in one week uses sigma = 1 week.
    """
    hist = np.asarray(histogram, dtype=float)
    total = hist.sum()
    n = total if n is None else n
    if n < 2 or total <= 0:
        raise errors.InsufficientData("histogram count", 2, int(n))
    centers = np.arange(len(hist))
    mean = np.dot(centers, hist) / total
    sigma = np.sqrt(np.dot((centers - mean) ** 2, hist) / total)
    if sigma == 0:
        sigma = 1.0
    h = 1.06 * sigma * n ** (-1 / 5)
    return float(h * h)


def select_bandwidth(
    histogram: Union[np.ndarray, Sequence[float]],
    n: Optional[float] = None,
    config: Optional[KdeConfig] = None,
) -> float:
    """Improved Sheather-Jones diffusion time for a weekly histogram, in weeks²."""
    config = config or KdeConfig()
    hist = np.asarray(histogram, dtype=float)
    n = float(hist.sum()) if n is None else float(n)
    if n < 2:
        raise errors.InsufficientData("histogram count", 2, int(n))
    if len(hist) < 4:
        raise errors.InvalidArgument(f"histogram needs at least 4 weeks, got {len(hist)}")

    padded = _padded(hist)
    grid = len(padded)
    if np.count_nonzero(padded) < config.min_occupied_bins:
        log.debug("Degenerate histogram, using the rule-of-thumb bandwidth")
        return rule_of_thumb_bandwidth(hist, n)

    a = fft.dct(padded / padded.sum(), type=2)
    a2 = (a[1:] / 2) ** 2
    i_sq = np.arange(1, grid, dtype=float) ** 2

    lower_value = _fixed_point(0.0, n, i_sq, a2)
    for upper in config.brackets:
        upper_value = _fixed_point(upper, n, i_sq, a2)
        if not (np.isfinite(lower_value) and np.isfinite(upper_value)) or lower_value * upper_value > 0:
            continue
        try:
            t_unit = optimize.brentq(_fixed_point, 0.0, upper, args=(n, i_sq, a2), xtol=1e-14)
        except (ValueError, RuntimeError):
            continue
        if t_unit > 0:
            log.debug("ISJ diffusion time %.6g (grid %d, n=%g)", t_unit, grid, n)
            return float(t_unit * grid * grid)
    log.debug("Fixed point not bracketed, using the rule-of-thumb bandwidth")
    return rule_of_thumb_bandwidth(hist, n)


def diffuse(histogram: Union[np.ndarray, Sequence[float]], t_star: float) -> DensityProfile:
    """Run the heat equation for time `t_star` (weeks²) on the normalized histogram."""
    if not t_star > 0:
        raise errors.InvalidArgument(f"diffusion time must be positive, got {t_star}")
    hist = np.asarray(histogram, dtype=float)
    padded = _padded(hist)
    total = padded.sum()
    if total <= 0:
        raise errors.InsufficientData("histogram count", 1, 0)
    grid = len(padded)

    a = fft.dct(padded / total, type=2)
    k = np.arange(grid, dtype=float)
    a *= np.exp(-k * k * _PI_SQ * (t_star / (grid * grid)) / 2)
    smoothed = fft.idct(a, type=2)[:len(hist)]
    smoothed = np.clip(smoothed, 0.0, None)
    mass = smoothed.sum()
    if mass <= 0:
        raise errors.InsufficientData("density mass inside the histogram span", 1, 0)
    return DensityProfile(smoothed / mass, float(t_star))


def estimate_density(histogram: Union[np.ndarray, Sequence[float]], config: Optional[KdeConfig] = None) -> DensityProfile:
    return diffuse(histogram, select_bandwidth(histogram, config=config))


def estimate_density_or_empty(histogram: Union[np.ndarray, Sequence[float]]) -> DensityProfile:
    """Density for lifecycle building; tiny histograms fall back to plain normalization.

    An all-zero histogram yields an all-zero profile with bandwidth 0.
    """
    hist = np.asarray(histogram, dtype=float)
    total = hist.sum()
    if total <= 0:
        return DensityProfile(np.zeros(len(hist)), 0.0)
    if total < 2 or len(hist) < 4:
        return DensityProfile(hist / total, 0.0)
    return estimate_density(hist)


def smooth(values: Union[np.ndarray, Sequence[float]], t_star: float) -> np.ndarray:
    """Diffuse an arbitrary non-negative weekly profile, keeping its total."""
    values = np.asarray(values, dtype=float)
    total = values.sum()
    if total <= 0 or t_star <= 0:
        return values.copy()
    return diffuse(values, t_star).values * total
