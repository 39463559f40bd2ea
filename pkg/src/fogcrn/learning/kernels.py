"""Kernel functions K(a, b) = phi(a)^T phi(b) and Gram matrices."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import InvalidArgumentError


class KernelKind(enum.Enum):
    LINEAR = "linear"
    POLYNOMIAL = "polynomial"
    SIGMOID = "sigmoid"
    RBF = "rbf"


@dataclass(frozen=True)
class Kernel:
    """``gamma`` scales the inner product (or squared distance for rbf);
    ``coef0`` is the additive offset of polynomial and sigmoid kernels."""

    kind: KernelKind = KernelKind.LINEAR
    gamma: float = 1.0
    coef0: float = 0.0
    degree: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind is KernelKind.RBF and not self.gamma > 0.0:
            raise InvalidArgumentError("rbf gamma must be > 0")
        if self.kind is KernelKind.POLYNOMIAL and int(self.degree) < 1:
            raise InvalidArgumentError("polynomial degree must be >= 1")

    @property
    def is_psd(self) -> bool:
        return self.kind in (KernelKind.LINEAR, KernelKind.RBF)


def kernel_eval(kernel: Kernel, a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size != b.size:
        raise InvalidArgumentError(f"dimension mismatch: {a.size} vs {b.size}")
    kind = kernel.kind
    if kind is KernelKind.RBF:
        diff = a - b
        return float(np.exp(-kernel.gamma * (diff @ diff)))
    dot = float(a @ b)
    if kind is KernelKind.LINEAR:
        return dot
    if kind is KernelKind.POLYNOMIAL:
        return float((kernel.gamma * dot + kernel.coef0) ** int(kernel.degree))
    return float(np.tanh(kernel.gamma * dot + kernel.coef0))


def kernel_matrix(kernel: Kernel, A, B) -> np.ndarray:
    """K[i, j] = K(A[i], B[j])."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise InvalidArgumentError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    kind = kernel.kind
    if kind is KernelKind.RBF:
        return np.exp(-kernel.gamma * cdist(A, B, "sqeuclidean"))
    dot = A @ B.T
    if kind is KernelKind.LINEAR:
        return dot
    if kind is KernelKind.POLYNOMIAL:
        return (kernel.gamma * dot + kernel.coef0) ** int(kernel.degree)
    return np.tanh(kernel.gamma * dot + kernel.coef0)


def gram_matrix(data, kernel: Kernel) -> np.ndarray:
    """H[i, j] = y_i y_j K(x_i, x_j), exactly symmetric."""
    y = np.asarray(data.y, dtype=float)
    if not np.all(np.abs(y) == 1.0):
        raise InvalidArgumentError("labels must be +1 or -1")
    K = kernel_matrix(kernel, data.X, data.X)
    K = np.triu(K) + np.triu(K, 1).T
    return np.outer(y, y) * K
