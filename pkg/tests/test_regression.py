import numpy as np
import pytest
from scipy.optimize import minimize_scalar
from scipy.stats import ortho_group

from fogcrn.errors import ConvergenceError, InvalidArgumentError, RankDeficientError
from fogcrn.learning import (Dataset, lambda_max, lasso_fit, lasso_kkt_violation,
                             lasso_objective, ols_fit, soft_threshold)


def _random_problem(n=60, d=6, seed=0, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    return Dataset(X, X @ w + noise * rng.standard_normal(n)), w


def test_dataset_validation():
    with pytest.raises(InvalidArgumentError):
        Dataset(np.ones((3, 2)), np.ones(4))
    with pytest.raises(InvalidArgumentError):
        Dataset(np.array([[np.nan]]), [1.0])
    with pytest.raises(InvalidArgumentError):
        Dataset(np.empty((0, 2)), [])


def test_ols_identity_returns_targets():
    y = np.array([3.0, -1.0, 0.5, 7.0])
    np.testing.assert_allclose(ols_fit(Dataset(np.eye(4), y)).w, y, atol=1e-14)


def test_ols_single_ones_column_is_mean():
    m = ols_fit(Dataset(np.ones((3, 1)), [1.0, 2.0, 3.0]))
    np.testing.assert_allclose(m.w, [2.0], atol=1e-14)


def test_ols_recovers_noiseless_weights():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((50, 5))
    w_star = rng.standard_normal(5)
    m = ols_fit(Dataset(X, X @ w_star))
    np.testing.assert_allclose(m.w, w_star, atol=1e-8)


def test_ols_normal_equations_residual():
    data, _ = _random_problem()
    m = ols_fit(data)
    g = data.X.T @ (data.y - data.X @ m.w)
    assert np.linalg.norm(g) <= 1e-9 * np.linalg.norm(data.X.T @ data.y)


def test_ols_rank_deficient_raises():
    X = np.column_stack([np.arange(5.0), 2 * np.arange(5.0)])
    with pytest.raises(RankDeficientError):
        ols_fit(Dataset(X, np.ones(5)))
    with pytest.raises(RankDeficientError):
        ols_fit(Dataset(np.ones((1, 3)), [1.0]))


def test_ols_intercept_column():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((40, 2))
    m = ols_fit(Dataset(X, X @ [1.0, -2.0] + 4.0), fit_intercept=True)
    np.testing.assert_allclose(m.w, [1.0, -2.0], atol=1e-10)
    assert m.intercept == pytest.approx(4.0, abs=1e-10)


def test_lasso_zero_lambda_matches_ols():
    data, _ = _random_problem()
    np.testing.assert_allclose(lasso_fit(data, 0.0, tol=1e-10).w, ols_fit(data).w, atol=1e-6)


def test_lasso_above_lambda_max_is_zero():
    data, _ = _random_problem(seed=4)
    lam = lambda_max(data)
    # independent recomputation of the subgradient-at-zero bound
    assert lam == pytest.approx(2.0 / data.n * np.abs(data.X.T @ data.y).max(), rel=1e-14)
    assert not np.any(lasso_fit(data, lam).w)
    assert not np.any(lasso_fit(data, 3 * lam).w)
    assert np.any(lasso_fit(data, 0.9 * lam).w)


def test_lasso_orthonormal_design_soft_threshold():
    d = 5
    Q = ortho_group.rvs(d, random_state=7)
    y = np.array([2.0, -0.3, 0.05, -1.2, 0.6])
    lam = 0.2
    m = lasso_fit(Dataset(Q, y), lam, tol=1e-12)
    yhat = Q.T @ y
    np.testing.assert_allclose(m.w, soft_threshold(yhat, d * lam / 2), atol=1e-9)
    # per-coordinate scalar oracle: with X^T X = I the objective separates into
    # (1/N)(w_j^2 - 2 w_j yhat_j) + lambda |w_j|
    for j in range(d):
        res = minimize_scalar(lambda w: (w * w - 2 * w * yhat[j]) / d + lam * abs(w),
                              bounds=(-5, 5), method="bounded", options={"xatol": 1e-12})
        assert m.w[j] == pytest.approx(res.x, abs=1e-6)


@pytest.mark.parametrize("frac", [0.01, 0.1, 0.5])
def test_lasso_subgradient_certificate(frac):
    data, _ = _random_problem(seed=11)
    m = lasso_fit(data, frac * lambda_max(data), tol=1e-9)
    assert lasso_kkt_violation(data, m) <= 1e-9


def test_lasso_objective_non_increasing():
    data, _ = _random_problem(n=30, d=10, seed=5)
    m = lasso_fit(data, 0.05, tol=1e-10)
    h = np.array(m.objective_history)
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]))
    assert h[-1] == pytest.approx(lasso_objective(data.X, data.y, m.w, 0.05), rel=1e-12)


def test_lasso_path_l1_monotone():
    data, _ = _random_problem(n=40, d=8, seed=9)
    lams = np.linspace(0.0, lambda_max(data), 12)
    norms = [np.abs(lasso_fit(data, lam, tol=1e-8).w).sum() for lam in lams]
    assert all(a >= b - 1e-7 for a, b in zip(norms, norms[1:]))


def test_lasso_nonconvergence_carries_last_iterate():
    data, _ = _random_problem(n=30, d=10, seed=5)
    with pytest.raises(ConvergenceError) as ei:
        lasso_fit(data, 1e-3, tol=1e-14, max_iter=2)
    assert ei.value.last_iterate.w.shape == (10,)


def test_lasso_rejects_negative_lambda():
    data, _ = _random_problem()
    with pytest.raises(InvalidArgumentError):
        lasso_fit(data, -0.1)


def test_lasso_against_sklearn():
    sk = pytest.importorskip("sklearn.linear_model")
    data, _ = _random_problem(n=80, d=6, seed=2)
    lam = 0.1
    # sklearn minimizes (1/2N)||y - Xw||^2 + a ||w||_1, so a = lambda / 2
    ref = sk.Lasso(alpha=lam / 2, fit_intercept=False, tol=1e-12, max_iter=100_000).fit(data.X, data.y)
    np.testing.assert_allclose(lasso_fit(data, lam, tol=1e-12).w, ref.coef_, atol=1e-7)
