"""Lasso and elastic-net regression by cyclic coordinate descent, with
nested k-fold cross-validation."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import errors
from .config import RegressionConfig
from .types import Method, Response
from .util import parallel_map

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        scale = X.std(axis=0)
        # constant columns stay at zero after centering
        scale[scale == 0] = 1.0
        return cls(X.mean(axis=0), scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def raw_coefficients(self, coef: np.ndarray, intercept: float) -> Tuple[np.ndarray, float]:
        """Coefficients and intercept acting on unstandardized columns."""
        raw = coef / self.scale
        return raw, float(intercept - np.dot(self.mean, raw))


@dataclass(frozen=True, eq=False)
class ElasticNetFit:
    coef: np.ndarray
    lam: float
    alpha_mix: float
    sweeps: int
    converged: bool


def soft_threshold(rho: float, threshold: float) -> float:
    if rho > threshold:
        return rho - threshold
    if rho < -threshold:
        return rho + threshold
    return 0.0


def objective(X: np.ndarray, y: np.ndarray, coef: np.ndarray, lam: float, alpha_mix: float = 1.0,
              penalty_factor: Optional[np.ndarray] = None) -> float:
    """0.5 ||y - X b||^2 / n + lam * sum_k w_k (alpha |b_k| + (1 - alpha) b_k^2 / 2)."""
    w = np.ones(len(coef)) if penalty_factor is None else penalty_factor
    resid = y - X @ coef
    penalty = np.sum(w * (alpha_mix * np.abs(coef) + (1 - alpha_mix) * coef * coef / 2))
    return float(0.5 * np.dot(resid, resid) / len(y) + lam * penalty)


def elastic_net_fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    alpha_mix: float = 0.5,
    penalty_factor: Optional[Sequence[float]] = None,
    init: Optional[np.ndarray] = None,
    tol: float = 1e-7,
    max_sweeps: int = 100_000,
) -> ElasticNetFit:
    """Coordinate descent without intercept; the caller centers `y` and scales `X`.

    Stops when no coefficient moves by `tol` or more within one sweep.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if len(y) != n:
        raise errors.InvalidArgument(f"{n} rows but {len(y)} responses")
    if lam < 0:
        raise errors.InvalidArgument(f"penalty must be non-negative, got {lam}")
    if not 0 <= alpha_mix <= 1:
        raise errors.InvalidArgument(f"mixing parameter must lie in [0, 1], got {alpha_mix}")
    w = np.ones(p) if penalty_factor is None else np.asarray(penalty_factor, dtype=float)
    if w.shape != (p,) or np.any(w < 0):
        raise errors.InvalidArgument("penalty factors must be one non-negative value per column")

    coef = np.zeros(p) if init is None else np.array(init, dtype=float)
    resid = y - X @ coef
    col_sq = np.einsum("ij,ij->j", X, X) / n
    l1 = lam * alpha_mix * w
    l2 = lam * (1 - alpha_mix) * w

    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(p):
            if col_sq[j] == 0:
                continue
            old = coef[j]
            rho = np.dot(X[:, j], resid) / n + col_sq[j] * old
            new = soft_threshold(rho, l1[j]) / (col_sq[j] + l2[j])
            if new != old:
                resid -= X[:, j] * (new - old)
                coef[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < tol:
            return ElasticNetFit(coef, lam, alpha_mix, sweep, True)
    log.warning("Coordinate descent stopped after %d sweeps without converging (lambda=%g)", max_sweeps, lam)
    return ElasticNetFit(coef, lam, alpha_mix, max_sweeps, False)


def lasso_fit(X: np.ndarray, y: np.ndarray, lam: float, **kwargs) -> ElasticNetFit:
    return elastic_net_fit(X, y, lam, alpha_mix=1.0, **kwargs)


def lambda_max(X: np.ndarray, y: np.ndarray, alpha_mix: float = 1.0,
               penalty_factor: Optional[np.ndarray] = None) -> float:
    """Smallest penalty at which every penalized coefficient is zero."""
    n = len(y)
    grad = np.abs(X.T @ y) / n
    w = np.ones(X.shape[1]) if penalty_factor is None else np.asarray(penalty_factor, dtype=float)
    penalized = w > 0
    if not penalized.any():
        return 0.0
    return float(np.max(grad[penalized] / w[penalized]) / max(alpha_mix, 1e-3))


def lambda_grid(X: np.ndarray, y: np.ndarray, alpha_mix: float, n_lambdas: int = 30,
                min_ratio: float = 1e-6, penalty_factor: Optional[np.ndarray] = None) -> np.ndarray:
    top = lambda_max(X, y, alpha_mix, penalty_factor)
    if top <= 0:
        return np.zeros(1)
    return np.geomspace(top, top * min_ratio, n_lambdas)


def elastic_net_path(
    X: np.ndarray,
    y: np.ndarray,
    alpha_mix: float = 1.0,
    lambdas: Optional[Sequence[float]] = None,
    config: Optional[RegressionConfig] = None,
    penalty_factor: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficients along a decreasing penalty grid, warm-started from the previous solution."""
    config = config or RegressionConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if lambdas is None:
        lambdas = lambda_grid(X, y, alpha_mix, config.n_lambdas, config.lambda_min_ratio, penalty_factor)
    lambdas = np.asarray(lambdas, dtype=float)
    coefs = np.zeros((len(lambdas), X.shape[1]))
    coef = None
    for i, lam in enumerate(lambdas):
        fit = elastic_net_fit(X, y, lam, alpha_mix, penalty_factor, coef, config.tol, config.max_sweeps)
        coef = fit.coef
        coefs[i] = coef
    return lambdas, coefs


def kfold_indices(n: int, k: int, seed: int) -> List[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def _path_errors(X, y, train, test, alpha_mix, lambdas, config) -> np.ndarray:
    scaler = Standardizer.fit(X[train])
    center = y[train].mean()
    _, coefs = elastic_net_path(scaler.transform(X[train]), y[train] - center, alpha_mix, lambdas, config)
    pred = center + scaler.transform(X[test]) @ coefs.T
    return np.mean(np.abs(pred - y[test][:, None]), axis=0)


def _select(fold_errors: np.ndarray, rule: str) -> int:
    """Index into the (decreasing) penalty grid."""
    mean = fold_errors.mean(axis=0)
    best = int(np.argmin(mean))
    if rule != "1se" or fold_errors.shape[0] < 2:
        return best
    se = fold_errors[:, best].std(ddof=1) / np.sqrt(fold_errors.shape[0])
    return int(np.flatnonzero(mean <= mean[best] + se)[0])


def choose_penalty(
    X: np.ndarray,
    y: np.ndarray,
    alphas: Sequence[float],
    config: RegressionConfig,
    seed: int,
) -> Tuple[float, float]:
    """(lambda, alpha) with the lowest inner cross-validated error."""
    scaler = Standardizer.fit(X)
    Xs, yc = scaler.transform(X), y - y.mean()
    k = config.inner_folds
    if len(y) < 2 * k:
        alpha_mix = float(alphas[len(alphas) // 2])
        grid = lambda_grid(Xs, yc, alpha_mix, config.n_lambdas, config.lambda_min_ratio)
        log.debug("Too few rows (%d) for inner CV, using the middle of the grid", len(y))
        return float(np.median(grid)), alpha_mix
    folds = kfold_indices(len(y), k, seed)
    best: Tuple[float, float, float] = (np.inf, 0.0, alphas[0])
    for alpha_mix in alphas:
        grid = lambda_grid(Xs, yc, alpha_mix, config.n_lambdas, config.lambda_min_ratio)
        errs = np.vstack([
            _path_errors(X, y, np.setdiff1d(np.arange(len(y)), f), f, alpha_mix, grid, config)
            for f in folds
        ])
        i = _select(errs, config.selection)
        score = float(errs.mean(axis=0)[i])
        if score < best[0]:
            best = (score, float(grid[i]), alpha_mix)
    return best[1], best[2]


@dataclass
class RegressionResult:
    response: Response
    method: Method
    cv_mae: float
    baseline_mae: float
    n_rows: int
    fold_mae: List[float] = field(default_factory=list)
    lambdas: List[float] = field(default_factory=list)
    alphas: List[float] = field(default_factory=list)

    def to_row(self) -> dict:
        return {
            "response": self.response.value,
            "method": self.method.value,
            "cv_mae": self.cv_mae,
            "baseline_mae": self.baseline_mae,
            "n_rows": self.n_rows,
        }


def kfold_regress(
    features: np.ndarray,
    response: Sequence[float],
    method: Method = Method.lasso,
    config: Optional[RegressionConfig] = None,
    response_name: Response = Response.takeover_time,
    threads: Optional[int] = None,
) -> RegressionResult:
    """Held-out mean absolute error of a penalized linear model.

    Rows with an undefined response are dropped. Each outer fold picks its
    penalty by inner cross-validation on its training rows only.
    """
    config = config or RegressionConfig()
    method = Method(method)
    X = np.asarray(features, dtype=float)
    y = np.asarray(response, dtype=float)
    keep = np.isfinite(y)
    X, y = X[keep], y[keep]
    k = config.folds
    if len(y) < k:
        raise errors.InsufficientData(f"rows with a defined {response_name}", k, len(y))
    alphas = [1.0] if method == Method.lasso else list(config.alphas)
    folds = kfold_indices(len(y), k, config.seed)

    def run_fold(i: int) -> Tuple[float, float, float, float]:
        test = folds[i]
        train = np.setdiff1d(np.arange(len(y)), test)
        lam, alpha_mix = choose_penalty(X[train], y[train], alphas, config, config.seed + i + 1)
        scaler = Standardizer.fit(X[train])
        center = y[train].mean()
        fit = elastic_net_fit(scaler.transform(X[train]), y[train] - center, lam, alpha_mix,
                              tol=config.tol, max_sweeps=config.max_sweeps)
        pred = center + scaler.transform(X[test]) @ fit.coef
        baseline = float(np.mean(np.abs(center - y[test])))
        return float(np.mean(np.abs(pred - y[test]))), baseline, lam, alpha_mix

    cells = parallel_map(run_fold, range(k), threads)
    result = RegressionResult(
        response=Response(response_name),
        method=method,
        cv_mae=float(np.mean([c[0] for c in cells])),
        baseline_mae=float(np.mean([c[1] for c in cells])),
        n_rows=len(y),
        fold_mae=[c[0] for c in cells],
        lambdas=[c[2] for c in cells],
        alphas=[c[3] for c in cells],
    )
    log.info("%s/%s: CV MAE %.4g over %d rows (mean-only %.4g)",
             result.response, method, result.cv_mae, len(y), result.baseline_mae)
    return result
