"""Learners, folds, metrics and model persistence."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cv import stratified_kfold
from .data import Dataset, Transform, class_weights, fit_transform, impute_and_standardize
from .forest import ForestModel, Tree, train_forest
from .linear import LogisticModel, LogisticObjective, train_logreg
from .metrics import Metrics, evaluate, mean_metrics, random_guess, threshold_sweep

MODEL_FORMAT = "migrantcdr-model"
MODEL_VERSION = 1


def predict_scores(model, X) -> np.ndarray:
    """Positive-class probability per row."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} columns, got {X.shape[-1]}")
    return model.predict_proba(X)


def predict_labels(model, X, threshold: float = 0.5) -> np.ndarray:
    return (predict_scores(model, X) >= threshold).astype(np.int64)


def gini_importance(model: ForestModel, names: list[str]) -> list[tuple[str, float]]:
    """Normalized importances, largest first; ties keep column order."""
    imp = model.gini_importance()
    order = sorted(range(len(names)), key=lambda i: (-imp[i], i))
    return [(names[i], float(imp[i])) for i in order]


def dump_model(path, model, transform: Transform | None = None) -> None:
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "model": model.to_dict(),
           "transform": None if transform is None else transform.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_model(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a model file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    m = doc["model"]
    model = ForestModel.from_dict(m) if m["kind"] == "forest" else LogisticModel.from_dict(m)
    tr = None if doc["transform"] is None else Transform.from_dict(doc["transform"])
    return model, tr


__all__ = [
    "Dataset", "Transform", "fit_transform", "impute_and_standardize", "class_weights",
    "stratified_kfold", "train_logreg", "LogisticModel", "LogisticObjective", "train_forest",
    "ForestModel", "Tree", "Metrics", "evaluate", "mean_metrics", "random_guess",
    "threshold_sweep", "predict_scores", "predict_labels", "gini_importance", "dump_model", "load_model",
]
