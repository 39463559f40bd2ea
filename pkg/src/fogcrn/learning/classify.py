"""Occupancy classifiers over feature vectors, one per capability tier."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from ..sensing import FEATURE_SCHEMA_VERSION, FeatureVector, Hypothesis, check_schema
from .kernels import Kernel
from .regression import Dataset, RegressionModel, lasso_fit, ols_fit
from .svm import SvmModel, svm_predict, svm_train

REGRESSION_CUTOFF = 0.5


class Engine(enum.Enum):
    THRESHOLD_ONLY = "threshold_only"
    REGRESSION = "regression"
    SVM = "svm"


@dataclass(frozen=True)
class ThresholdModel:
    """Threshold on the normalized-energy feature (energy metric / N)."""

    rho: float


def engine_score(engine, model, feature: FeatureVector,
                 schema_version: int = FEATURE_SCHEMA_VERSION) -> tuple[float, float]:
    """(score, cutoff) for ``feature``; H1 is declared when score beats cutoff."""
    engine = Engine(engine)
    check_schema(feature, schema_version)
    x = feature.values
    if engine is Engine.THRESHOLD_ONLY:
        rho = model.rho if isinstance(model, ThresholdModel) else float(model)
        return float(x[0]), rho
    if engine is Engine.REGRESSION:
        if not isinstance(model, RegressionModel):
            raise InvalidArgumentError("regression engine needs a RegressionModel")
        if model.w.size != x.size:
            raise InvalidArgumentError(f"model expects {model.w.size} features, got {x.size}")
        return float(x @ model.w + model.intercept), REGRESSION_CUTOFF
    if not isinstance(model, SvmModel):
        raise InvalidArgumentError("svm engine needs an SvmModel")
    return svm_predict(model, x)[1], 0.0


def classify(engine, model, feature: FeatureVector,
             schema_version: int = FEATURE_SCHEMA_VERSION) -> Hypothesis:
    """Decide H0/H1 for one feature vector.

    threshold_only: normalized energy > rho; regression: x.w + b > 0.5;
    svm: label +1 (margin >= 0) means H1.
    """
    score, cutoff = engine_score(engine, model, feature, schema_version)
    if Engine(engine) is Engine.SVM:
        return Hypothesis.H1 if score >= cutoff else Hypothesis.H0
    return Hypothesis.H1 if score > cutoff else Hypothesis.H0


def _stack(features) -> np.ndarray:
    rows = [f.values if isinstance(f, FeatureVector) else np.asarray(f, dtype=float)
            for f in features]
    return np.vstack(rows)


def train_regression_classifier(features, occupied, mask=None, lambda_: float = 0.0,
                                tol: float = 1e-8) -> RegressionModel:
    """Least squares (lambda = 0) or LASSO fit of {0, 1} occupancy targets.

    Only columns selected by ``mask`` are used; the returned weight vector
    is full length with zeros elsewhere. An intercept column is appended.
    """
    X = _stack(features)
    y = np.asarray(occupied, dtype=float)
    mask = np.ones(X.shape[1], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    data = Dataset(X[:, mask], y)
    if lambda_ == 0.0:
        fit = ols_fit(data, fit_intercept=True)
    else:
        fit = lasso_fit(data, lambda_, tol=tol, fit_intercept=True)
    w = np.zeros(X.shape[1])
    w[mask] = fit.w
    return RegressionModel(w, fit.lambda_, fit.intercept, fit.n_iter)


def train_svm_classifier(features, occupied, C: float = 1.0, kernel: Kernel = Kernel(),
                         tol: float = 1e-3) -> SvmModel:
    X = _stack(features)
    y = np.where(np.asarray(occupied, dtype=bool), 1.0, -1.0)
    return svm_train(Dataset(X, y), C, kernel, tol)
