"""Soft-margin kernel SVM trained on the dual by sequential minimal optimization.

Dual problem::

    min_a  1/2 a^T H a - 1^T a    s.t.  y^T a = 0,  0 <= a_i <= C

with H[i, j] = y_i y_j K(x_i, x_j). Each SMO step picks the maximal
violating pair and solves the two-variable subproblem analytically.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, InvalidArgumentError
from .kernels import Kernel, gram_matrix, kernel_matrix
from .regression import Dataset

_TAU = 1e-12  # curvature floor for non-PSD (sigmoid) subproblems


@dataclass(frozen=True, eq=False)
class SvmModel:
    alphas: np.ndarray
    b: float
    C: float
    kernel: Kernel
    support_indices: np.ndarray
    sv_x: np.ndarray
    sv_y: np.ndarray
    n_iter: int = 0
    kkt_gap: float = 0.0

    @property
    def sv_alpha(self) -> np.ndarray:
        return self.alphas[self.support_indices]

    @property
    def n_features(self) -> int:
        return self.sv_x.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise InvalidArgumentError(
                f"expected {self.n_features} features, got {X.shape[1]}")
        if self.sv_x.shape[0] == 0:
            return np.full(X.shape[0], self.b)
        K = kernel_matrix(self.kernel, self.sv_x, X)
        return (self.sv_alpha * self.sv_y) @ K + self.b


def dual_objective(H: np.ndarray, alphas) -> float:
    a = np.asarray(alphas, dtype=float)
    return float(0.5 * a @ H @ a - a.sum())


def _check_labels(y: np.ndarray):
    if not np.all(np.abs(y) == 1.0):
        raise InvalidArgumentError("SVM labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise InvalidArgumentError("SVM training needs samples from both classes")


def svm_train(data: Dataset, C: float = 1.0, kernel: Kernel = Kernel(), tol: float = 1e-3,
              max_passes: int = 1_000_000) -> SvmModel:
    """Train with SMO; ``max_passes`` caps the number of pair updates.

    On return the maximal KKT violation, max_{I_up} -y_i G_i minus
    min_{I_low} -y_i G_i, is at most ``tol``.
    """
    if not C > 0.0:
        raise InvalidArgumentError("C must be > 0")
    if not tol >= 0.0:
        raise InvalidArgumentError("tol must be >= 0")
    y = np.asarray(data.y, dtype=float)
    _check_labels(y)
    Q = gram_matrix(data, kernel)
    n = y.size
    a = np.zeros(n)
    G = -np.ones(n)
    pos = y > 0
    diag = np.diag(Q).copy()
    it = 0
    gap = np.inf
    while True:
        v = -y * G
        up = np.where(pos, a < C, a > 0)
        low = np.where(pos, a > 0, a < C)
        vi = np.where(up, v, -np.inf)
        vj = np.where(low, v, np.inf)
        i = int(np.argmax(vi))
        j = int(np.argmin(vj))
        gap = vi[i] - vj[j]
        if gap <= tol:
            break
        if it >= max_passes:
            model = _finish(data, kernel, C, a, G, it, gap)
            raise ConvergenceError(f"SMO did not reach tol={tol} in {max_passes} updates "
                                   f"(gap {gap:.3g})", model)
        it += 1
        ai, aj = a[i], a[j]
        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * Q[i, j], _TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * Q[i, j], _TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        G += Q[:, i] * (ni - ai) + Q[:, j] * (nj - aj)
        a[i], a[j] = ni, nj
    return _finish(data, kernel, C, a, G, it, max(gap, 0.0))


def _finish(data, kernel, C, a, G, it, gap) -> SvmModel:
    y = np.asarray(data.y, dtype=float)
    v = -y * G
    free = (a > 0) & (a < C)
    if np.any(free):
        b = float(np.mean(v[free]))
    else:
        pos = y > 0
        up = np.where(pos, a < C, a > 0)
        low = np.where(pos, a > 0, a < C)
        hi = v[up].max(initial=-np.inf)
        lo = v[low].min(initial=np.inf)
        b = float((hi + lo) / 2.0) if np.isfinite(hi) and np.isfinite(lo) else 0.0
    sv = np.flatnonzero(a > 0)
    return SvmModel(a, b, float(C), kernel, sv, np.asarray(data.X)[sv].copy(), y[sv].copy(),
                    it, float(gap))


def svm_predict(model: SvmModel, x) -> tuple[int, float]:
    """(label, margin) with margin = sum a_i y_i K(x_i, x) + b; margin 0 -> +1."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != model.n_features:
        raise InvalidArgumentError(f"expected {model.n_features} features, got {x.size}")
    margin = float(model.decision_function(x[None, :])[0])
    return (1 if margin >= 0.0 else -1), margin


def kkt_violations(model: SvmModel, data: Dataset) -> np.ndarray:
    """Per-sample violation of the soft-margin KKT conditions on y f(x)."""
    y = np.asarray(data.y, dtype=float)
    u = y * model.decision_function(data.X)
    a, C = model.alphas, model.C
    viol = np.where(a <= 0.0, np.maximum(1.0 - u, 0.0),
                    np.where(a >= C, np.maximum(u - 1.0, 0.0), np.abs(u - 1.0)))
    return viol
