"""Vector autoregression with exogenous regressors, fitted by equation-wise least squares."""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from . import errors

log = logging.getLogger(__name__)

# exact fits compare on this residual variance instead of zero
VARIANCE_FLOOR = 1e-30


@dataclass(frozen=True, eq=False)
class VarxModel:
    """y_t = a + sum_i A_i y_{t-i} + b X_{t-exog_lag} + e_t."""

    a: np.ndarray  # (n,)
    A: np.ndarray  # (p, n, n)
    b: np.ndarray  # (n, l)
    residual_scale: np.ndarray  # (n,)
    exog_lag: int = 1
    n_obs: int = 0  # regression rows behind the fit

    def __post_init__(self):
        n = len(self.a)
        if self.A.ndim != 3 or self.A.shape[1:] != (n, n):
            raise errors.InvalidArgument(f"autoregressive matrices must be (p, {n}, {n}), got {self.A.shape}")
        if self.b.ndim != 2 or self.b.shape[0] != n:
            raise errors.InvalidArgument(f"exogenous coefficients must have {n} rows, got {self.b.shape}")
        for name in ("a", "A", "b"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise errors.InvalidArgument(f"non-finite coefficients in {name}")

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def p(self) -> int:
        return self.A.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.b.shape[1]

    def bic(self) -> float:
        """Schwarz criterion with a diagonal residual covariance; lower is better."""
        if self.n_obs < 1:
            raise errors.InvalidArgument("model carries no regression rows")
        k = self.n * (1 + self.n * self.p + self.l)
        variance = np.maximum(self.residual_scale ** 2, VARIANCE_FLOOR)
        return float(self.n_obs * np.sum(np.log(variance)) + k * np.log(self.n_obs))

    def to_dict(self) -> Dict[str, object]:
        return {
            "n": self.n,
            "p": self.p,
            "l": self.l,
            "exog_lag": self.exog_lag,
            "n_obs": self.n_obs,
            "a": self.a.tolist(),
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "residual_scale": self.residual_scale.tolist(),
        }


def _as_2d(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def design_matrix(
    y: np.ndarray,
    X: Optional[np.ndarray] = None,
    p: int = 1,
    exog_lag: int = 1,
    mask: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Regressors [1, y_{t-1..t-p}, X_{t-exog_lag}], responses y_t and the row times used.

    A row is dropped when any value it touches is masked or non-finite.
    """
    y = _as_2d(y)
    T, n = y.shape
    X = np.zeros((T, 0)) if X is None else _as_2d(X)
    if len(X) != T:
        raise errors.InvalidArgument(f"exogenous series have {len(X)} rows, responses {T}")
    if p < 1:
        raise errors.InvalidArgument(f"lag order must be positive, got {p}")
    if exog_lag < 0:
        raise errors.InvalidArgument(f"exogenous lag must be non-negative, got {exog_lag}")
    valid = np.ones(T, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).copy()
    valid &= np.all(np.isfinite(y), axis=1)
    x_valid = np.all(np.isfinite(X), axis=1)

    start = max(p, exog_lag)
    rows = []
    for t in range(start, T):
        if valid[t - p:t + 1].all() and x_valid[t - exog_lag]:
            rows.append(t)
    times = np.array(rows, dtype=int)
    k = 1 + n * p + X.shape[1]
    Z = np.empty((len(times), k))
    if len(times):
        Z[:, 0] = 1.0
        for i in range(1, p + 1):
            Z[:, 1 + (i - 1) * n:1 + i * n] = y[times - i]
        Z[:, 1 + n * p:] = X[times - exog_lag]
    return Z, y[times], times


def fit(
    y: np.ndarray,
    X: Optional[np.ndarray] = None,
    p: int = 1,
    exog_lag: int = 1,
    mask: Optional[np.ndarray] = None,
    use_exog: bool = True,
) -> VarxModel:
    """Least-squares VARX(p); rank-deficient designs get the minimum-norm solution.

    With `use_exog` False the exogenous columns are left out of the regression
    but still decide which rows are usable, so both variants share one sample.
    """
    y2 = _as_2d(y)
    n = y2.shape[1]
    Z, Y, _ = design_matrix(y2, X, p, exog_lag, mask)
    if not use_exog:
        Z = Z[:, :1 + n * p]
    k = Z.shape[1]
    if len(Z) < k + 1:
        raise errors.InsufficientData("usable regression rows", k + 1, len(Z))
    coef, _, rank, _ = np.linalg.lstsq(Z, Y, rcond=None)
    if rank < k:
        log.debug("Rank-deficient VARX design (%d < %d), minimum-norm solution", rank, k)
    resid = Y - Z @ coef
    scale = np.sqrt(np.mean(resid * resid, axis=0))
    A = np.stack([coef[1 + i * n:1 + (i + 1) * n].T for i in range(p)])
    return VarxModel(a=coef[0].copy(), A=A, b=coef[1 + n * p:].T.copy(), residual_scale=scale,
                     exog_lag=exog_lag, n_obs=len(Z))


def select_exog(
    y: np.ndarray,
    X: Optional[np.ndarray] = None,
    p: int = 1,
    exog_lag: int = 1,
    mask: Optional[np.ndarray] = None,
) -> VarxModel:
    """The fit with or without the exogenous columns, whichever has the lower BIC."""
    restricted = fit(y, X, p, exog_lag, mask, use_exog=False)
    if X is None or _as_2d(X).shape[1] == 0:
        return restricted
    try:
        full = fit(y, X, p, exog_lag, mask)
    except errors.InsufficientData as e:
        log.debug("Exogenous fit skipped: %s", e)
        return restricted
    return full if full.bic() < restricted.bic() else restricted


def predict_one(model: VarxModel, y_hist: np.ndarray, X_hist: Optional[np.ndarray] = None) -> np.ndarray:
    """Forecast the step after the last row of `y_hist`.

    The last row of `X_hist` must be the exogenous row `exog_lag` weeks before
    the predicted step.
    """
    y_hist = _as_2d(y_hist)
    if len(y_hist) < model.p:
        raise errors.InvalidArgument(f"history of {len(y_hist)} weeks is shorter than lag order {model.p}")
    pred = model.a.copy()
    for i in range(1, model.p + 1):
        pred += model.A[i - 1] @ y_hist[-i]
    if model.l:
        if X_hist is None or len(X_hist) == 0:
            raise errors.InvalidArgument("exogenous history required")
        pred += model.b @ _as_2d(X_hist)[-1]
    return pred


def simulate(
    model: VarxModel,
    T: int,
    X: Optional[np.ndarray] = None,
    y0: Optional[np.ndarray] = None,
    noise: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Generate T steps from `model`; the first p rows are the initial values `y0`."""
    rng = rng or np.random.default_rng(0)
    n, p = model.n, model.p
    y = np.zeros((T, n))
    if y0 is not None:
        y[:p] = np.asarray(y0, dtype=float).reshape(p, n)
    X2 = np.zeros((T, 0)) if X is None else _as_2d(X)
    for t in range(p, T):
        mean = model.a.copy()
        for i in range(1, p + 1):
            mean += model.A[i - 1] @ y[t - i]
        if model.l:
            mean += model.b @ X2[t - model.exog_lag]
        y[t] = mean + (noise * rng.standard_normal(n) if noise else 0.0)
    return y
