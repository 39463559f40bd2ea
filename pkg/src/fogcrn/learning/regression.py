"""Least squares and LASSO regression.

LASSO objective: (1/N) ||y - X w||^2 + lambda ||w||_1, solved by cyclic
coordinate descent with exact soft-threshold updates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, InvalidArgumentError, RankDeficientError

# cond(X) above this means cond(X^T X) ~ 1e16: normal equations meaningless
MAX_CONDITION = 1e8


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidArgumentError("X must be a non-empty N x d matrix")
        if y.size != X.shape[0]:
            raise InvalidArgumentError(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidArgumentError("dataset entries must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class RegressionModel:
    w: np.ndarray
    lambda_: float = 0.0
    intercept: float = 0.0
    n_iter: int = 0
    objective_history: tuple = field(default=(), repr=False)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self.w + self.intercept


def _design(data: Dataset, fit_intercept: bool) -> np.ndarray:
    if fit_intercept:
        return np.column_stack([data.X, np.ones(data.n)])
    return np.asarray(data.X)


def ols_fit(data: Dataset, fit_intercept: bool = False) -> RegressionModel:
    """Ordinary least squares, w = (X^T X)^-1 X^T y.

    Solved through a QR factorization. Raises ``RankDeficientError`` rather
    than falling back to a pseudo-inverse.
    """
    A = _design(data, fit_intercept)
    if A.shape[0] < A.shape[1]:
        raise RankDeficientError(f"{A.shape[0]} samples cannot determine {A.shape[1]} weights")
    cond = np.linalg.cond(A)
    if not cond <= MAX_CONDITION:
        raise RankDeficientError(f"design matrix condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
    Q, R = np.linalg.qr(A)
    coef = np.linalg.solve(R, Q.T @ data.y)
    if fit_intercept:
        return RegressionModel(coef[:-1], 0.0, float(coef[-1]))
    return RegressionModel(coef, 0.0, 0.0)


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_objective(X, y, w, lambda_, intercept=0.0) -> float:
    r = y - X @ w - intercept
    return float(r @ r / y.size + lambda_ * np.sum(np.abs(w)))


def lasso_fit(data: Dataset, lambda_: float, tol: float = 1e-8, max_iter: int = 10_000,
              fit_intercept: bool = False, w0=None) -> RegressionModel:
    """Cyclic coordinate descent for the LASSO.

    Stops when the largest coordinate change in a sweep is below ``tol`` and
    the subgradient optimality certificate holds to ``tol``. The intercept,
    if fitted, is unpenalized and updated once per sweep.
    """
    if not lambda_ >= 0.0:
        raise InvalidArgumentError("lambda must be >= 0")
    X, y = np.asarray(data.X), np.asarray(data.y)
    n, d = X.shape
    col_sq = np.einsum("ij,ij->j", X, X)
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=float)
    b = 0.0
    r = y - X @ w
    half = n * lambda_ / 2.0
    history = [lasso_objective(X, y, w, lambda_)]
    # w = 0 is optimal once lambda >= lambda_max; answer exactly instead of
    # trusting the rounding of n * lambda / 2 at the boundary
    yc = y - y.mean() if fit_intercept else y
    if w0 is None and n > 0 and 2.0 / n * np.max(np.abs(X.T @ yc), initial=0.0) <= lambda_:
        b = float(y.mean()) if fit_intercept else 0.0
        r = yc
        history.append(float(r @ r / n))
        return RegressionModel(w, float(lambda_), b, 0, tuple(history))
    for sweep in range(1, max_iter + 1):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = w[j]
            rho_j = X[:, j] @ r + col_sq[j] * old
            new = float(soft_threshold(rho_j, half)) / col_sq[j]
            if new != old:
                r -= X[:, j] * (new - old)
                w[j] = new
                max_delta = max(max_delta, abs(new - old))
        if fit_intercept:
            shift = r.mean()
            b += shift
            r -= shift
            max_delta = max(max_delta, abs(shift))
        history.append(float(r @ r / n + lambda_ * np.sum(np.abs(w))))
        if max_delta < tol:
            model = RegressionModel(w.copy(), float(lambda_), float(b), sweep, tuple(history))
            if lasso_kkt_violation(data, model) <= tol:
                return model
    raise ConvergenceError(f"lasso did not converge in {max_iter} sweeps",
                           RegressionModel(w, float(lambda_), float(b), max_iter, tuple(history)))


def lasso_kkt_violation(data: Dataset, model: RegressionModel) -> float:
    """Largest violation of the LASSO subgradient optimality conditions.

    With g = (2/N) X^T (X w - y): |g_j| <= lambda where w_j = 0, and
    g_j = -lambda sign(w_j) elsewhere.
    """
    X, y = np.asarray(data.X), np.asarray(data.y)
    g = 2.0 / y.size * X.T @ (X @ model.w + model.intercept - y)
    lam = model.lambda_
    zero = model.w == 0.0
    v_zero = np.maximum(np.abs(g[zero]) - lam, 0.0)
    v_nz = np.abs(g[~zero] + lam * np.sign(model.w[~zero]))
    return float(max(v_zero.max(initial=0.0), v_nz.max(initial=0.0)))


def lambda_max(data: Dataset) -> float:
    """Smallest lambda for which w = 0 is optimal: (2/N) ||X^T y||_inf."""
    return float(2.0 / data.n * np.max(np.abs(data.X.T @ data.y)))
