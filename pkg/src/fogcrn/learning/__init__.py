"""Regression, kernel SVM and manifold learners behind occupancy classifiers."""
from .classify import (Engine, ThresholdModel, classify, engine_score,
                       train_regression_classifier, train_svm_classifier)
from .kernels import Kernel, KernelKind, gram_matrix, kernel_eval, kernel_matrix
from .manifold import (Embedding, ManifoldKind, gen_manifold, lle_embed,
                       procrustes_residual, trustworthiness)
from .regression import (Dataset, RegressionModel, lambda_max, lasso_fit,
                         lasso_kkt_violation, lasso_objective, ols_fit, soft_threshold)
from .serialize import dumps_model, load_model, loads_model, save_model
from .svm import SvmModel, dual_objective, kkt_violations, svm_predict, svm_train
