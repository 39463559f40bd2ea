"""Learning an occupancy classifier from sensing features.

T2 nodes extract a six-dimensional feature vector per frame. We train a
least-squares classifier, a sparse LASSO classifier and an RBF SVM on
synthetic labeled frames at -5 dB and compare held-out accuracy.
Run: ``python demos/04_learning.py``.
"""
import numpy as np

from fogcrn.dataset import labeled_features
from fogcrn.learning import (Engine, Kernel, KernelKind, classify, train_regression_classifier,
                             train_svm_classifier)
from fogcrn.sensing import FEATURE_NAMES, FeatureVector, Hypothesis

Xtr, ytr = labeled_features(400, -5.0, 128, seed=1)
Xte, yte = labeled_features(400, -5.0, 128, seed=2)
# the SVM and the LASSO penalty both care about column scale
mu, sd = Xtr.mean(0), Xtr.std(0) + 1e-12
Ztr, Zte = (Xtr - mu) / sd, (Xte - mu) / sd


def accuracy(engine, model, Z):
    pred = [classify(engine, model, FeatureVector(z)) is Hypothesis.H1 for z in Z]
    return float(np.mean(np.array(pred) == yte.astype(bool)))


ols = train_regression_classifier(Ztr, ytr)
lasso = train_regression_classifier(Ztr, ytr, lambda_=0.05)
svm = train_svm_classifier(Ztr, ytr, C=1.0, kernel=Kernel(KernelKind.RBF, 0.5))

print(f"{'feature':>18} {'OLS w':>9} {'LASSO w':>9}")
for name, a, b in zip(FEATURE_NAMES, ols.w, lasso.w):
    print(f"{name:>18} {a:>9.4f} {b:>9.4f}")
print(f"\nheld-out accuracy  OLS {accuracy(Engine.REGRESSION, ols, Zte):.3f}  "
      f"LASSO {accuracy(Engine.REGRESSION, lasso, Zte):.3f}  "
      f"SVM {accuracy(Engine.SVM, svm, Zte):.3f}")
print(f"SVM keeps {int(np.sum(svm.alphas > 0))} of {len(ytr)} training points as support vectors")

# %% The LASSO zeroes the features that add little beyond the matched-filter
# correlation, which is what a node with a tight compute budget wants.
