"""Locally linear embedding plus the toy manifolds used to exercise it."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ..errors import InvalidArgumentError
from ..rng import make_rng


@dataclass(frozen=True, eq=False)
class Embedding:
    points: np.ndarray          # N x r, column-wise zero mean
    eigenvalues: np.ndarray     # r smallest non-trivial eigenvalues of M
    eigenvectors: np.ndarray    # N x r unit eigenvectors of M
    neighbors: np.ndarray       # N x k neighbor indices
    weights: np.ndarray         # N x k reconstruction weights, rows sum to 1
    k_neighbors: int
    reg: float
    ambient_dim: int

    @property
    def intrinsic_dim(self) -> int:
        return self.points.shape[1]

    def weight_matrix(self) -> np.ndarray:
        n = self.neighbors.shape[0]
        W = np.zeros((n, n))
        np.put_along_axis(W, self.neighbors, self.weights, axis=1)
        return W

    def cost_matrix(self) -> np.ndarray:
        """M = (I - W)^T (I - W)."""
        A = np.eye(self.neighbors.shape[0]) - self.weight_matrix()
        return A.T @ A


def reconstruction_weights(X: np.ndarray, neighbors: np.ndarray, reg: float) -> np.ndarray:
    """Weights minimizing ||x_i - sum_j W_ij x_j||^2 subject to sum_j W_ij = 1.

    The local Gram matrix is regularized by reg * trace (or reg itself when
    the trace is zero, i.e. all neighbors coincide with x_i).
    """
    n, k = neighbors.shape
    W = np.empty((n, k))
    ones = np.ones(k)
    for i in range(n):
        Z = X[neighbors[i]] - X[i]
        G = Z @ Z.T
        tr = np.trace(G)
        G[np.diag_indices(k)] += reg * tr if tr > 0 else reg
        w = linalg.solve(G, ones, assume_a="pos")
        W[i] = w / w.sum()
    return W


def lle_embed(points, k: int = 10, r: int = 2, reg: float = 1e-3) -> Embedding:
    """Embed N x d ``points`` into r dimensions by locally linear embedding.

    1. k nearest Euclidean neighbors per point;
    2. affine reconstruction weights from each neighborhood;
    3. bottom eigenvectors of M = (I - W)^T (I - W), skipping the constant one.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise InvalidArgumentError("points must be an N x d matrix")
    n, d = X.shape
    if not 1 <= k < n:
        raise InvalidArgumentError(f"need 1 <= k < N (k={k}, N={n})")
    if not 1 <= r < d:
        raise InvalidArgumentError(f"need 1 <= r < d (r={r}, d={d})")
    if r >= n - 1:
        raise InvalidArgumentError("too few points for the requested dimension")
    _, nbrs = cKDTree(X).query(X, k + 1)
    nbrs = _drop_self(nbrs, n)
    W = reconstruction_weights(X, nbrs, reg)
    A = np.eye(n)
    np.put_along_axis(A, nbrs, -W, axis=1)
    M = A.T @ A
    # M 1 = 0 since weight rows sum to 1; lift the constant vector out of the
    # bottom of the spectrum instead of relying on eigensolver ordering.
    shift = np.trace(M) + 1.0
    vals, vecs = linalg.eigh(M + shift / n, subset_by_index=[0, r - 1])
    pts = vecs - vecs.mean(axis=0)
    return Embedding(pts, vals, vecs, nbrs, W, int(k), float(reg), d)


def _drop_self(nbrs: np.ndarray, n: int) -> np.ndarray:
    # with duplicate points the query may not return i first; remove i wherever it is
    out = np.empty((n, nbrs.shape[1] - 1), dtype=np.int64)
    for i in range(n):
        row = nbrs[i]
        hit = np.flatnonzero(row == i)
        out[i] = np.delete(row, hit[0] if hit.size else row.size - 1)
    return out


class ManifoldKind(enum.Enum):
    LINEAR_SUBSPACE = "linear_subspace"
    S_CURVE = "s_curve"
    SWISS_ROLL = "swiss_roll"


# plane z = a u + b v + c used by the linear-subspace manifold
PLANE = (0.5, -0.3, 0.2)


def swiss_roll_arclength(t):
    """Arc length of the spiral (t cos t, t sin t) from t = 0."""
    t = np.asarray(t, dtype=float)
    return 0.5 * (t * np.sqrt(1.0 + t * t) + np.arcsinh(t))


def gen_manifold(kind, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Sample a 2-D surface in 3-D; returns (points N x 3, intrinsic N x 2).

    * linear_subspace: (u, v, a u + b v + c), intrinsic (u, v)
    * s_curve: t in [-3pi/2, 3pi/2], (sin t, h, sign(t)(cos t - 1)), intrinsic (t, h)
    * swiss_roll: t in [3pi/2, 9pi/2], (t cos t, h, t sin t), intrinsic
      (arc length of t, h)
    """
    kind = ManifoldKind(kind)
    if n < 10:
        raise InvalidArgumentError("n must be >= 10")
    rng = make_rng(seed)
    u = rng.uniform(size=n)
    h = rng.uniform(size=n)
    if kind is ManifoldKind.LINEAR_SUBSPACE:
        a, b, c = PLANE
        pts = np.column_stack([u, h, a * u + b * h + c])
        return pts, np.column_stack([u, h])
    if kind is ManifoldKind.S_CURVE:
        t = 3.0 * np.pi * (u - 0.5)
        hh = 2.0 * h
        pts = np.column_stack([np.sin(t), hh, np.sign(t) * (np.cos(t) - 1.0)])
        return pts, np.column_stack([t, hh])
    t = 1.5 * np.pi * (1.0 + 2.0 * u)
    hh = 21.0 * h
    pts = np.column_stack([t * np.cos(t), hh, t * np.sin(t)])
    return pts, np.column_stack([swiss_roll_arclength(t), hh])


def trustworthiness(original, embedded, k: int = 5) -> float:
    """Venna-Kaski trustworthiness: penalizes embedding neighbors that are far
    apart in the original space, weighted by their original-space rank."""
    X = np.asarray(original, dtype=float)
    Y = np.asarray(embedded, dtype=float)
    n = X.shape[0]
    if not 1 <= k < n / 2:
        raise InvalidArgumentError("k must satisfy 1 <= k < N/2")
    dx = cdist(X, X)
    np.fill_diagonal(dx, np.inf)
    order = np.argsort(dx, axis=1, kind="stable")
    ranks = np.empty_like(order)
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(1, n + 1)[None, :]
    dy = cdist(Y, Y)
    np.fill_diagonal(dy, np.inf)
    nn_y = np.argsort(dy, axis=1, kind="stable")[:, :k]
    penalty = np.maximum(ranks[rows, nn_y] - k, 0).sum()
    return float(1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty)


def procrustes_residual(embedded, reference) -> float:
    """Relative residual of the best affine map from ``embedded`` to ``reference``."""
    E = np.asarray(embedded, dtype=float)
    U = np.asarray(reference, dtype=float)
    A = np.column_stack([E, np.ones(E.shape[0])])
    coef, *_ = np.linalg.lstsq(A, U, rcond=None)
    return float(np.linalg.norm(A @ coef - U) / np.linalg.norm(U - U.mean(axis=0)))
