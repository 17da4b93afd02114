"""One-vs-rest linear scorers: logistic regression (full-batch gradient
descent) and per-sample subgradient learners for hinge / logistic loss."""
from __future__ import annotations

import numpy as np
from numba import njit

from .._random import rng_for


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _ovr_targets(y_pos, n_classes):
    Y = np.zeros((len(y_pos), n_classes))
    Y[np.arange(len(y_pos)), y_pos] = 1.0
    return Y


class LogisticOvR:
    """Per-class logistic regression fitted jointly by full-batch gradient
    descent on mean log-loss plus ``l2/2 * ||w||^2`` (bias unpenalised)."""

    def __init__(self, l2_strength, learning_rate, epochs):
        self.l2 = l2_strength
        self.lr = learning_rate
        self.epochs = epochs
        self.W = None
        self.b = None

    def fit(self, X, y_pos, n_classes, seed=0):
        n, d = X.shape
        Y = _ovr_targets(y_pos, n_classes)
        W = np.zeros((d, n_classes))
        b = np.zeros(n_classes)
        for _ in range(self.epochs):
            R = _sigmoid(X @ W + b) - Y
            W -= self.lr * (X.T @ R / n + self.l2 * W)
            b -= self.lr * R.mean(axis=0)
        self.W, self.b = W, b
        return self

    def decision(self, X):
        return X @ self.W + self.b

    def scores(self, X):
        p = _sigmoid(self.decision(X))
        return p / p.sum(axis=1, keepdims=True)

    def coef_abs_mean(self):
        return np.abs(self.W).mean(axis=1)

    def get_state(self):
        return {"W": self.W.tolist(), "b": self.b.tolist()}

    def set_state(self, state):
        self.W = np.asarray(state["W"], dtype=np.float64)
        self.b = np.asarray(state["b"], dtype=np.float64)
        return self


@njit(cache=True)
def _subgradient_pass(X, Ysign, W, b, order, hinge, lam, eta0, radius):
    n_classes, d = W.shape
    for t in range(order.shape[0]):
        i = order[t]
        eta = eta0 / (1.0 + eta0 * lam * t)
        shrink = 1.0 - eta * lam
        for c in range(n_classes):
            m = b[c]
            for j in range(d):
                m += W[c, j] * X[i, j]
            yc = Ysign[i, c]
            m *= yc
            if hinge:
                g = -yc if m < 1.0 else 0.0
            else:
                if m > 0:
                    e = np.exp(-m)
                    g = -yc * e / (1.0 + e)
                else:
                    g = -yc / (1.0 + np.exp(m))
            for j in range(d):
                W[c, j] = shrink * W[c, j] - eta * g * X[i, j]
            b[c] -= eta * g
            if radius > 0.0:
                norm = 0.0
                for j in range(d):
                    norm += W[c, j] * W[c, j]
                norm = np.sqrt(norm)
                if norm > radius:
                    s = radius / norm
                    for j in range(d):
                        W[c, j] *= s


class SubgradientOvR:
    """Per-sample subgradient descent with step ``eta0 / (1 + eta0*l2*t)``.

    ``project=True`` keeps each weight vector inside the ball of radius
    ``1/sqrt(l2)`` (the linear SVM variant).
    """

    def __init__(self, loss, l2_strength, epochs, learning_rate, project=False):
        self.loss = loss
        self.l2 = l2_strength
        self.epochs = epochs
        self.eta0 = learning_rate
        self.project = project
        self.W = None
        self.b = None

    def fit(self, X, y_pos, n_classes, seed=0):
        n, d = X.shape
        Ysign = 2.0 * _ovr_targets(y_pos, n_classes) - 1.0
        rng = rng_for(seed, "sgd-order")
        order = np.concatenate([rng.permutation(n) for _ in range(self.epochs)]).astype(np.int64)
        W = np.zeros((n_classes, d))
        b = np.zeros(n_classes)
        radius = 1.0 / np.sqrt(self.l2) if self.project else 0.0
        _subgradient_pass(np.ascontiguousarray(X, dtype=np.float64), Ysign, W, b, order,
                          self.loss == "hinge", float(self.l2), float(self.eta0), float(radius))
        self.W, self.b = W, b
        return self

    def decision(self, X):
        return X @ self.W.T + self.b

    def scores(self, X):
        z = self.decision(X)
        if self.loss == "hinge":
            return z
        p = _sigmoid(z)
        return p / p.sum(axis=1, keepdims=True)

    def coef_abs_mean(self):
        return np.abs(self.W).mean(axis=0)

    def get_state(self):
        return {"W": self.W.tolist(), "b": self.b.tolist()}

    def set_state(self, state):
        self.W = np.asarray(state["W"], dtype=np.float64)
        self.b = np.asarray(state["b"], dtype=np.float64)
        return self
