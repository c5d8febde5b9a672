import numpy as np
import pytest

from .. import errors, regression
from ..config import RegressionConfig
from ..types import Method, Response


def _standardized(rng, n=120, p=6):
    X = rng.normal(size=(n, p))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    return X


def test_soft_threshold():
    assert regression.soft_threshold(3.0, 1.0) == 2.0
    assert regression.soft_threshold(-3.0, 1.0) == -2.0
    assert regression.soft_threshold(0.5, 1.0) == 0.0


def test_unpenalized_fit_is_least_squares(rng):
    X = _standardized(rng)
    y = X @ np.arange(1.0, 7.0) + rng.normal(size=len(X))
    y -= y.mean()
    fit = regression.lasso_fit(X, y, 0.0, tol=1e-12)
    assert fit.converged
    expected, *_ = np.linalg.lstsq(X, y, rcond=None)
    np.testing.assert_allclose(fit.coef, expected, atol=1e-8)


def test_ridge_closed_form(rng):
    X = _standardized(rng)
    y = X @ rng.normal(size=6) + rng.normal(size=len(X))
    y -= y.mean()
    n, lam = len(y), 0.3
    fit = regression.elastic_net_fit(X, y, lam, alpha_mix=0.0, tol=1e-12)
    expected = np.linalg.solve(X.T @ X / n + lam * np.eye(6), X.T @ y / n)
    np.testing.assert_allclose(fit.coef, expected, atol=1e-8)


def test_lasso_optimality_conditions(rng):
    X = _standardized(rng)
    y = X @ np.array([2.0, 0.0, -1.0, 0.0, 0.5, 0.0]) + rng.normal(size=len(X))
    y -= y.mean()
    lam = 0.2
    coef = regression.lasso_fit(X, y, lam, tol=1e-12).coef
    grad = X.T @ (y - X @ coef) / len(y)
    active = coef != 0
    assert active.any()
    np.testing.assert_allclose(grad[active], lam * np.sign(coef[active]), atol=1e-8)
    assert np.all(np.abs(grad[~active]) <= lam + 1e-8)


def test_lasso_recovers_support(rng):
    X = _standardized(rng, n=200, p=10)
    y = 3 * X[:, 0] - 2 * X[:, 3] + 0.1 * rng.normal(size=200)
    coef = regression.lasso_fit(X, y - y.mean(), 0.05).coef
    assert set(np.flatnonzero(coef)) == {0, 3}
    assert coef[0] == pytest.approx(2.95, abs=0.05)
    assert coef[3] == pytest.approx(-1.95, abs=0.05)


def test_unpenalized_column_survives_large_penalty(rng):
    X = _standardized(rng, p=3)
    y = X @ np.array([1.0, 2.0, 3.0])
    y -= y.mean()
    coef = regression.lasso_fit(X, y, 100.0, penalty_factor=[0.0, 1.0, 1.0], tol=1e-12).coef
    assert coef[1] == coef[2] == 0.0
    assert coef[0] == pytest.approx(np.dot(X[:, 0], y) / np.dot(X[:, 0], X[:, 0]))


def test_lambda_max_zeroes_everything(rng):
    X = _standardized(rng)
    y = X @ rng.normal(size=6)
    y -= y.mean()
    top = regression.lambda_max(X, y)
    assert np.all(regression.lasso_fit(X, y, 1.0001 * top).coef == 0)
    assert np.any(regression.lasso_fit(X, y, 0.9 * top).coef != 0)
    assert regression.lambda_max(X, y, alpha_mix=0.5) == pytest.approx(2 * top)


def test_path_is_warm_started_and_decreasing(rng):
    X = _standardized(rng)
    y = X @ rng.normal(size=6)
    y -= y.mean()
    lambdas, coefs = regression.elastic_net_path(X, y, 1.0, config=RegressionConfig(n_lambdas=12))
    assert len(lambdas) == 12
    assert np.all(np.diff(lambdas) < 0)
    np.testing.assert_allclose(coefs[0], 0, atol=1e-12)
    assert np.count_nonzero(coefs[-1]) == 6


def test_fit_argument_checks(rng):
    X = _standardized(rng)
    with pytest.raises(errors.InvalidArgument):
        regression.elastic_net_fit(X, np.zeros(3), 0.1)
    with pytest.raises(errors.InvalidArgument):
        regression.elastic_net_fit(X, np.zeros(len(X)), -1.0)
    with pytest.raises(errors.InvalidArgument):
        regression.elastic_net_fit(X, np.zeros(len(X)), 0.1, alpha_mix=1.5)
    with pytest.raises(errors.InvalidArgument):
        regression.elastic_net_fit(X, np.zeros(len(X)), 0.1, penalty_factor=[1.0])


def test_standardizer_round_trip(rng):
    X = rng.normal(loc=3.0, scale=2.0, size=(50, 3))
    X[:, 2] = 4.0
    scaler = regression.Standardizer.fit(X)
    Xs = scaler.transform(X)
    np.testing.assert_allclose(Xs[:, :2].mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(Xs[:, :2].std(axis=0), 1)
    assert np.all(Xs[:, 2] == 0)
    coef = np.array([0.5, -1.0, 2.0])
    raw, intercept = scaler.raw_coefficients(coef, 1.5)
    np.testing.assert_allclose(X @ raw + intercept, Xs @ coef + 1.5)


def test_kfold_indices_partition():
    folds = regression.kfold_indices(10, 3, seed=4)
    assert [len(f) for f in folds] == [4, 3, 3]
    assert sorted(np.concatenate(folds)) == list(range(10))
    assert all(np.array_equal(a, b) for a, b in zip(folds, regression.kfold_indices(10, 3, seed=4)))


def test_one_standard_error_rule():
    errs = np.array([
        [1.00, 0.62, 0.49, 0.46],
        [1.00, 0.58, 0.49, 0.50],
        [1.00, 0.60, 0.49, 0.48],
    ])
    assert regression._select(errs, "min") == 3
    assert regression._select(errs, "1se") == 2


def test_kfold_regress_beats_the_mean(rng):
    X = rng.normal(size=(60, 5))
    y = 2 * X[:, 0] - X[:, 1] + 0.1 * rng.normal(size=60)
    result = regression.kfold_regress(X, y, Method.lasso, RegressionConfig(n_lambdas=15))
    assert result.n_rows == 60
    assert len(result.fold_mae) == 3
    assert result.cv_mae < 0.25 * result.baseline_mae
    assert result.to_row()["method"] == "lasso"


def test_kfold_regress_elastic_net_drops_undefined_rows(rng):
    X = rng.normal(size=(40, 4))
    y = X[:, 2] + 0.1 * rng.normal(size=40)
    y[:5] = np.nan
    config = RegressionConfig(n_lambdas=10, alphas=(0.5, 0.9))
    result = regression.kfold_regress(X, y, Method.elastic_net, config, Response.recovery_time, threads=2)
    assert result.n_rows == 35
    assert result.response == Response.recovery_time
    assert set(result.alphas) <= {0.5, 0.9}
    assert result.cv_mae < result.baseline_mae


def test_kfold_regress_on_noise_stays_near_the_mean(rng):
    X = rng.normal(size=(150, 4))
    y = rng.normal(size=150)
    result = regression.kfold_regress(X, y, config=RegressionConfig(n_lambdas=15))
    assert result.cv_mae < 1.1 * result.baseline_mae


def test_kfold_regress_is_deterministic(rng):
    X = rng.normal(size=(30, 3))
    y = X[:, 0] + rng.normal(size=30)
    first = regression.kfold_regress(X, y, threads=1)
    second = regression.kfold_regress(X, y, threads=3)
    assert first.fold_mae == second.fold_mae


def test_kfold_regress_needs_rows():
    with pytest.raises(errors.InsufficientData):
        regression.kfold_regress(np.zeros((4, 2)), [1.0, np.nan, np.nan, 2.0])


def test_choose_penalty_with_few_rows(rng):
    X = rng.normal(size=(4, 2))
    y = rng.normal(size=4)
    lam, alpha_mix = regression.choose_penalty(X, y, [0.1, 0.5, 0.9], RegressionConfig(), seed=0)
    assert alpha_mix == 0.5
    assert lam > 0
