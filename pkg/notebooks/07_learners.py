"""
In-repo learners
================

Logistic regression with L2 penalty and a random forest of CART trees, both
with balanced class weights, plus stratified folds and imbalance-aware
metrics.
"""

import numpy as np

from migrantcdr.learn import (evaluate, predict_labels, predict_scores, random_guess,
                              stratified_kfold, train_forest, train_logreg)

rng = np.random.default_rng(0)
n = 2000
X = rng.normal(size=(n, 5))
# rare positives driven by an interaction that a linear model cannot see
y = ((X[:, 0] * X[:, 1] > 1.2) | (X[:, 2] > 2.2)).astype(int)
print("prevalence", y.mean())

folds = stratified_kfold(y, 5, seed=0)
print("positives per fold", [int(y[te].sum()) for _, te in folds])

for name, fit in [("logreg", lambda a, b: train_logreg(a, b)),
                  ("forest", lambda a, b: train_forest(a, b, n_trees=60, min_leaf=5, seed=1))]:
    f1 = []
    for tr, te in folds:
        m = fit(X[tr], y[tr])
        f1.append(evaluate(predict_labels(m, X[te]), y[te]).f1)
    print(f"{name:7s} F1 {np.mean(f1):.3f}")
print(f"random  F1 {random_guess(y.mean()).f1:.3f}")

# Gini importances sum to one; the three informative columns dominate
m = train_forest(X, y, n_trees=60, min_leaf=5, seed=1)
print("importances", np.round(m.gini_importance(), 3))
print("scores of first rows", np.round(predict_scores(m, X[:4]), 3))
