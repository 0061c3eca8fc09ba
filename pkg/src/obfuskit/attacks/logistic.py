"""Binary logistic regression trained by mini-batch SGD on standardized inputs."""

from dataclasses import dataclass

import numpy as np

from obfuskit.errors import ValidationError
from obfuskit.seeding import make_rng


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LogisticModel:
    """``p(1 | x) = sigmoid(((x - mean) / scale) @ weights + bias)``."""

    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray

    def decision(self, X):
        Xs = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return Xs @ self.weights + self.bias

    def predict_proba(self, X):
        return sigmoid(self.decision(X))

    def predict(self, X):
        return self.decision(X) >= 0.0

    def folded(self):
        """Equivalent ``(w, b)`` acting on raw, unstandardized inputs."""
        w = self.weights / self.scale
        return w, float(self.bias - self.mean @ w)


def fit_logistic(X, y, seed, epochs=200, lr=0.1, batch_size=32, l2=1e-4):
    """Fit on ``X`` (n x k), ``y`` in {0, 1}. Standardization uses ``X`` only.

    Constant columns get unit scale; if every column is constant the
    problem is degenerate and a ValidationError is raised.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValidationError(f"bad training matrix shape {X.shape}", "X")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    if np.all(std == 0):
        raise ValidationError("all features are identical across samples", "X")
    scale = np.where(std > 0, std, 1.0)
    Xs = (X - mean) / scale
    n, k = Xs.shape
    w = np.zeros(k)
    b = 0.0
    for epoch in range(epochs):
        order = make_rng(seed, "logistic", epoch).permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            err = sigmoid(Xs[idx] @ w + b) - y[idx]
            w -= lr * (Xs[idx].T @ err / idx.size + l2 * w)
            b -= lr * float(err.mean())
    return LogisticModel(w, b, mean, scale)
