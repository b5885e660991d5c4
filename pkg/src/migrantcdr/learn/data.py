from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    """Feature matrix with binary labels; ``nan`` cells are missing."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    groups: list[str] | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise ValueError("X rows must match len(y)")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("X columns must match feature_names")
        if self.groups is not None and len(self.groups) != len(self.feature_names):
            raise ValueError("one group tag per column")

    def __len__(self) -> int:
        return self.y.size

    def rows(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], list(self.feature_names), self.groups,
                       None if self.ids is None else self.ids[idx])

    def columns(self, names: list[str]) -> "Dataset":
        pos = [self.feature_names.index(n) for n in names]
        groups = None if self.groups is None else [self.groups[p] for p in pos]
        return Dataset(self.X[:, pos], self.y, list(names), groups, self.ids)

    def group_columns(self, group: str) -> list[str]:
        if self.groups is None:
            return []
        return [n for n, g in zip(self.feature_names, self.groups) if g == group]


@dataclass
class Transform:
    """Column means/scales fitted on a training matrix."""

    feature_names: list[str]
    kept: list[int]
    mean: np.ndarray
    scale: np.ndarray
    dropped: list[str] = field(default_factory=list)

    @property
    def output_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.kept]

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != len(self.feature_names):
            raise ValueError(f"expected {len(self.feature_names)} columns, got {X.shape[1]}")
        Z = X[:, self.kept]
        Z = np.where(np.isnan(Z), self.mean, Z)
        return (Z - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"feature_names": self.feature_names, "kept": self.kept,
                "mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "dropped": self.dropped}

    @classmethod
    def from_dict(cls, d: dict) -> "Transform":
        return cls(list(d["feature_names"]), list(d["kept"]), np.array(d["mean"], dtype=float),
                   np.array(d["scale"], dtype=float), list(d.get("dropped", [])))


def fit_transform(X: np.ndarray, names: list[str]) -> Transform:
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    present = ~np.isnan(X)
    kept = [j for j in range(X.shape[1]) if present[:, j].any()]
    dropped = [names[j] for j in range(X.shape[1]) if j not in kept]
    if dropped:
        log.warning("dropping all-missing columns: %s", ", ".join(dropped))
    Z = X[:, kept]
    mean = np.nanmean(Z, axis=0) if kept else np.zeros(0)
    filled = np.where(np.isnan(Z), mean, Z)
    std = filled.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return Transform(list(names), kept, mean, scale, dropped)


def impute_and_standardize(train: Dataset, apply_to: Dataset) -> tuple[Dataset, Dataset, Transform]:
    """Mean-impute and z-score both sets using training statistics only."""
    tr = fit_transform(train.X, train.feature_names)
    names = tr.output_names
    groups = None if train.groups is None else [train.groups[j] for j in tr.kept]
    a = Dataset(tr.apply(train.X), train.y, names, groups, train.ids)
    b = Dataset(tr.apply(apply_to.X), apply_to.y, names, groups, apply_to.ids)
    return a, b, tr


def class_weights(y: np.ndarray, mode: str) -> np.ndarray:
    """Per-sample weights; ``balanced`` gives each class equal total weight."""
    y = np.asarray(y)
    if mode == "none":
        return np.ones(y.size)
    if mode != "balanced":
        raise ValueError(f"unknown class weighting {mode!r}")
    counts = np.bincount(y, minlength=2).astype(float)
    w = y.size / (2.0 * counts)
    return w[y]
