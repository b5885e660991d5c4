from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import class_weights

log = logging.getLogger(__name__)


def _sigmoid(z):
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class LogisticObjective:
    """Weighted mean log-loss plus ``l2/2 * |w|^2`` (bias unpenalized).

    Parameters are packed as ``theta = [w..., b]``.
    """

    def __init__(self, X, y, sample_weight, l2: float):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.s = np.asarray(sample_weight, dtype=float)
        self.W = self.s.sum()
        self.l2 = l2

    def loss(self, theta: np.ndarray) -> float:
        z = self.X @ theta[:-1] + theta[-1]
        ll = np.logaddexp(0.0, z) - self.y * z
        return float(self.s @ ll / self.W + 0.5 * self.l2 * theta[:-1] @ theta[:-1])

    def grad(self, theta: np.ndarray) -> np.ndarray:
        z = self.X @ theta[:-1] + theta[-1]
        r = self.s * (_sigmoid(z) - self.y) / self.W
        g = np.empty_like(theta)
        g[:-1] = self.X.T @ r + self.l2 * theta[:-1]
        g[-1] = r.sum()
        return g

    def lipschitz(self) -> float:
        Xb = np.column_stack([self.X, np.ones(len(self.y))])
        return 0.25 * np.linalg.norm(Xb, 2) ** 2 * self.s.max() / self.W + self.l2


@dataclass
class LogisticModel:
    coef: np.ndarray
    intercept: float
    n_iter: int = 0
    grad_norm: float = 0.0
    loss_history: list[float] = field(default_factory=list, repr=False)

    @property
    def n_features(self) -> int:
        return self.coef.size

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.coef + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision(X))

    def to_dict(self) -> dict:
        return {"kind": "logreg", "coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(np.array(d["coef"], dtype=float), float(d["intercept"]))


def train_logreg(X, y, l2: float = 0.01, class_weighting: str = "balanced", seed: int = 0,
                 tol: float = 1e-6, max_iter: int = 5000) -> LogisticModel:
    """Full-batch gradient descent with Armijo backtracking.

    The first trial step is ``1/L``; afterwards each iteration tries twice the
    last accepted step before backtracking. Starts from zero, so ``seed`` does
    not change the result; it is accepted for a uniform learner interface.
    """
    y = np.asarray(y)
    if np.unique(y).size < 2:
        raise ValueError("single class")
    obj = LogisticObjective(X, y, class_weights(y, class_weighting), l2)
    theta = np.zeros(obj.X.shape[1] + 1)
    step = 1.0 / obj.lipschitz()
    f = obj.loss(theta)
    history = [f]
    g = obj.grad(theta)
    gn = float(np.linalg.norm(g))
    it = 0
    while gn > tol and it < max_iter:
        t = 2.0 * step if it else step
        while True:
            cand = theta - t * g
            fc = obj.loss(cand)
            if fc <= f - 0.5 * t * gn * gn or t < 1e-12:
                break
            t *= 0.5
        if fc > f:
            break
        theta, f, step = cand, fc, t
        history.append(f)
        g = obj.grad(theta)
        gn = float(np.linalg.norm(g))
        it += 1
    if gn > tol:
        log.warning("logistic regression stopped after %d iterations, |grad|=%.3g", it, gn)
    return LogisticModel(theta[:-1].copy(), float(theta[-1]), it, gn, history)
