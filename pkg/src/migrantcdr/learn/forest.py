"""CART trees on weighted Gini impurity and a bootstrap random forest."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import class_weights


@dataclass
class Tree:
    """Flat node arrays; leaves have ``feature == -1``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importance: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            r, n = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "importance")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        ints = ("feature", "left", "right")
        return cls(**{k: np.array(v, dtype=np.int64 if k in ints else float) for k, v in d.items()})


def _gini(pos, tot):
    p = pos / tot
    return 2.0 * p * (1.0 - p)


def _best_split(x: np.ndarray, y: np.ndarray, w: np.ndarray, min_leaf: int):
    """Best split over the columns of ``x`` (rows x candidate features).

    Returns ``(decrease, threshold, column)`` or ``None`` when no column has
    a valid cut. Ties go to the earliest column, then the lowest cut.
    """
    n, k = x.shape
    if n < 2 * min_leaf:
        return None
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    ws = w[order]
    cw = np.cumsum(ws, axis=0)
    cp = np.cumsum(ws * y[order], axis=0)
    lo, hi = min_leaf - 1, n - min_leaf
    wl, pl = cw[lo:hi], cp[lo:hi]
    wr, pr = cw[-1] - wl, cp[-1] - pl
    child = wl * _gini(pl, wl) + wr * _gini(pr, wr)
    child[xs[lo:hi] >= xs[lo + 1:hi + 1]] = np.inf
    best_pos = np.argmin(child, axis=0)
    best_val = child[best_pos, np.arange(k)]
    j = int(np.argmin(best_val))
    if not np.isfinite(best_val[j]):
        return None
    parent = cw[-1, j] * _gini(cp[-1, j], cw[-1, j])
    i = lo + best_pos[j]
    a, b = xs[i, j], xs[i + 1, j]
    thr = 0.5 * (a + b)
    if not thr < b:
        thr = a
    return parent - best_val[j], thr, j


def grow_tree(X: np.ndarray, y: np.ndarray, w: np.ndarray, *, max_depth: int | None,
              min_leaf: int, max_features: int, rng: np.random.Generator) -> Tree:
    """Grow one tree on rows with positive weight ``w``."""
    n_feat = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []
    imp = np.zeros(n_feat)
    rows0 = np.flatnonzero(w > 0)
    stack = [(rows0, 0, -1, False)]
    while stack:
        rows, depth, parent, is_right = stack.pop()
        node = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = node
        ww, yy = w[rows], y[rows]
        wt, wp = ww.sum(), ww @ yy
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(wp / wt)
        if not yy.any() or yy.all() or (max_depth is not None and depth >= max_depth) \
                or rows.size < 2 * min_leaf:
            continue
        best = None
        perm = rng.permutation(n_feat)
        # draw past max_features only while no candidate column is splittable
        for lo in range(0, n_feat, max_features):
            cand = perm[lo:lo + max_features]
            got = _best_split(X[np.ix_(rows, cand)], yy, ww, min_leaf)
            if got is not None:
                best = (got[0], got[1], int(cand[got[2]]))
                break
        if best is None:
            continue
        dec, thr, f = best
        feature[node], threshold[node] = int(f), float(thr)
        imp[f] += max(dec, 0.0)
        go_left = X[rows, f] <= thr
        stack.append((rows[~go_left], depth + 1, node, True))
        stack.append((rows[go_left], depth + 1, node, False))
    total_w = w.sum()
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                np.array(right, dtype=np.int64), np.array(value), imp / total_w)


@dataclass
class ForestModel:
    trees: list[Tree]
    n_features: int

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def gini_importance(self) -> np.ndarray:
        acc = np.zeros(self.n_features)
        for t in self.trees:
            s = t.importance.sum()
            if s > 0:
                acc += t.importance / s
        total = acc.sum()
        return acc / total if total > 0 else acc

    def to_dict(self) -> dict:
        return {"kind": "forest", "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls([Tree.from_dict(t) for t in d["trees"]], int(d["n_features"]))


def resolve_max_features(spec, n_features: int) -> int:
    if spec in (None, "sqrt"):
        return max(1, int(math.sqrt(n_features)))
    if spec == "all":
        return n_features
    if isinstance(spec, float):
        return max(1, int(spec * n_features))
    return max(1, min(int(spec), n_features))


def train_forest(X, y, n_trees: int = 100, max_depth: int | None = None, min_leaf: int = 1,
                 features_per_split="sqrt", class_weighting: str = "balanced", seed: int = 0,
                 bootstrap: bool = True, workers: int = 1) -> ForestModel:
    """Random forest; each tree draws from its own child seed, so the result
    does not depend on ``workers``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if np.unique(y).size < 2:
        raise ValueError("single class")
    if np.isnan(X).any():
        raise ValueError("forest input contains missing values; impute first")
    base_w = class_weights(y, class_weighting)
    mtry = resolve_max_features(features_per_split, X.shape[1])
    seeds = np.random.SeedSequence(seed).spawn(n_trees)

    def one(ss: np.random.SeedSequence) -> Tree:
        rng = np.random.default_rng(ss)
        if bootstrap:
            mult = np.bincount(rng.integers(0, y.size, y.size), minlength=y.size)
        else:
            mult = np.ones(y.size)
        return grow_tree(X, y, base_w * mult, max_depth=max_depth, min_leaf=min_leaf,
                         max_features=mtry, rng=rng)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            trees = list(ex.map(one, seeds))
    else:
        trees = [one(s) for s in seeds]
    return ForestModel(trees, X.shape[1])
