"""Per-sample convex losses and their subgradients.

Supported kinds:
  logistic    -- binary negative log-likelihood, labels in {0, 1}
  hinge_svm   -- max{0, 1 - y b'x} + lam * ||b||^2, labels in {-1, +1}
                 (class indices {0, 1} are mapped to {-1, +1})
  lasso       -- 0.5 (y - b'x)^2 + lam * ||b||_1, real labels
  multinomial -- softmax cross-entropy, parameter is a (d[+1], C) matrix
                 (optional bias row appended when bias=True)

Subgradient tie-breaks: the hinge margin exactly at 1 is treated as active
(subgradient -y*x + 2*lam*b); the l1 term contributes 0 at b_j = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("logistic", "hinge_svm", "lasso", "multinomial")


class LossError(ValueError):
    """Dimension mismatch, bad label, or unknown loss kind."""


@dataclass(frozen=True)
class Sample:
    """One data point: feature vector x and label y (real or class index)."""

    x: np.ndarray
    y: float


@dataclass(frozen=True)
class LossModel:
    kind: str
    d: int
    n_classes: int = 1
    lam: float = 0.0
    bias: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LossError(f"unknown loss kind {self.kind!r}")
        if self.d < 1:
            raise LossError(f"feature dimension must be positive, got {self.d}")
        if self.lam < 0:
            raise LossError(f"regularization weight must be >= 0, got {self.lam}")
        if self.kind == "multinomial":
            if self.n_classes < 2:
                raise LossError("multinomial needs n_classes >= 2")
        if self.bias and self.kind != "multinomial":
            raise LossError("bias row only supported for multinomial")

    @property
    def param_shape(self) -> tuple:
        if self.kind == "multinomial":
            return (self.d + (1 if self.bias else 0), self.n_classes)
        return (self.d,)

    def init_params(self) -> np.ndarray:
        return np.zeros(self.param_shape)


def _check_dims(model: LossModel, beta: np.ndarray, x: np.ndarray):
    if beta.shape != model.param_shape:
        raise LossError(
            f"parameter shape {beta.shape} does not match model {model.param_shape}"
        )
    if x.shape != (model.d,):
        raise LossError(f"feature shape {x.shape} does not match d={model.d}")


def _binary_label(y, lo, hi) -> float:
    # accepts class indices {0,1} or the already-mapped pair {lo, hi}
    if y in (lo, hi):
        return float(y)
    if y == 0:
        return float(lo)
    if y == 1:
        return float(hi)
    raise LossError(f"binary label {y!r} not in {{0, 1}} or {{{lo}, {hi}}}")


def _class_index(model: LossModel, y) -> int:
    c = int(y)
    if c != y or not 0 <= c < model.n_classes:
        raise LossError(f"class label {y!r} out of range [0, {model.n_classes})")
    return c


def _augment(model: LossModel, x: np.ndarray) -> np.ndarray:
    return np.append(x, 1.0) if model.bias else x


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss(model: LossModel, beta: np.ndarray, v: Sample) -> float:
    """Per-sample loss value."""
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(v.x, dtype=float)
    _check_dims(model, beta, x)
    if model.kind == "logistic":
        y = _binary_label(v.y, 0, 1)
        z = float(beta @ x)
        # -[y log s(z) + (1-y) log(1-s(z))] = log(1 + e^z) - y z, stably
        return float(np.logaddexp(0.0, z) - y * z)
    if model.kind == "hinge_svm":
        y = _binary_label(v.y, -1, 1)
        margin = 1.0 - y * float(beta @ x)
        return max(0.0, margin) + model.lam * float(beta @ beta)
    if model.kind == "lasso":
        r = float(v.y) - float(beta @ x)
        return 0.5 * r * r + model.lam * float(np.abs(beta).sum())
    c = _class_index(model, v.y)
    scores = _augment(model, x) @ beta
    logz = np.logaddexp.reduce(scores)
    return float(logz - scores[c])


def subgradient(model: LossModel, beta: np.ndarray, v: Sample) -> np.ndarray:
    """A valid subgradient of loss(., v) at beta, same shape as beta."""
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(v.x, dtype=float)
    _check_dims(model, beta, x)
    if model.kind == "logistic":
        y = _binary_label(v.y, 0, 1)
        z = float(beta @ x)
        p = 1.0 / (1.0 + np.exp(-z))
        return (p - y) * x
    if model.kind == "hinge_svm":
        y = _binary_label(v.y, -1, 1)
        g = 2.0 * model.lam * beta
        if 1.0 - y * float(beta @ x) >= 0.0:  # margin == 1 counts as active
            g = g - y * x
        return g
    if model.kind == "lasso":
        r = float(v.y) - float(beta @ x)
        return -r * x + model.lam * np.sign(beta)
    c = _class_index(model, v.y)
    phi = _augment(model, x)
    p = _softmax(phi @ beta)
    p[c] -= 1.0
    return np.outer(phi, p)


def _kink_mask(model: LossModel, beta: np.ndarray, v: Sample, eps: float) -> np.ndarray:
    """True where a coordinate perturbation of +-eps may cross a kink."""
    mask = np.zeros(beta.shape, dtype=bool)
    x = np.asarray(v.x, dtype=float)
    if model.kind == "hinge_svm":
        y = _binary_label(v.y, -1, 1)
        margin = 1.0 - y * float(beta @ x)
        mask |= np.abs(margin) <= 10.0 * eps * (1.0 + np.abs(x))
    elif model.kind == "lasso" and model.lam > 0:
        mask |= np.abs(beta) <= 10.0 * eps
    return mask


def finite_difference_check(
    model: LossModel, beta: np.ndarray, v: Sample, epsilon: float = 1e-6
) -> float:
    """Max relative error between central differences and the subgradient.

    Coordinates within epsilon of a nondifferentiability are skipped.
    """
    beta = np.asarray(beta, dtype=float)
    g = subgradient(model, beta, v)
    skip = _kink_mask(model, beta, v, epsilon)
    worst = 0.0
    it = np.ndindex(*beta.shape)
    for idx in it:
        if skip[idx]:
            continue
        bp = beta.copy()
        bm = beta.copy()
        bp[idx] += epsilon
        bm[idx] -= epsilon
        fd = (loss(model, bp, v) - loss(model, bm, v)) / (2.0 * epsilon)
        worst = max(worst, abs(fd - g[idx]) / (1.0 + abs(g[idx])))
    return worst


# ---------------------------------------------------------------------------
# Vectorized batch operations (metrics, reference solver, prediction error)

def _batch_labels(model: LossModel, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if model.kind == "logistic":
        return (y > 0).astype(float)
    if model.kind == "hinge_svm":
        return np.where(y <= 0, -1.0, 1.0)
    if model.kind == "lasso":
        return y
    c = y.astype(int)
    if np.any(c != y) or c.min() < 0 or c.max() >= model.n_classes:
        raise LossError("class label out of range")
    return c


def _batch_features(model: LossModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise LossError(f"feature matrix shape {X.shape} does not match d={model.d}")
    if model.bias:
        return np.hstack([X, np.ones((X.shape[0], 1))])
    return X


def batch_loss(model: LossModel, beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Mean per-sample loss over a batch."""
    yy = _batch_labels(model, y)
    if model.kind == "logistic":
        z = X @ beta
        return float(np.mean(np.logaddexp(0.0, z) - yy * z))
    if model.kind == "hinge_svm":
        m = 1.0 - yy * (X @ beta)
        return float(np.mean(np.maximum(0.0, m)) + model.lam * beta @ beta)
    if model.kind == "lasso":
        r = yy - X @ beta
        return float(0.5 * np.mean(r * r) + model.lam * np.abs(beta).sum())
    phi = _batch_features(model, X)
    scores = phi @ beta
    logz = np.logaddexp.reduce(scores, axis=1)
    return float(np.mean(logz - scores[np.arange(len(yy)), yy]))


def batch_grad(model: LossModel, beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient (mean subgradient) of batch_loss at beta."""
    yy = _batch_labels(model, y)
    m = len(yy)
    if model.kind == "logistic":
        p = 1.0 / (1.0 + np.exp(-(X @ beta)))
        return X.T @ (p - yy) / m
    if model.kind == "hinge_svm":
        active = (1.0 - yy * (X @ beta)) >= 0.0
        return -(X.T @ (yy * active)) / m + 2.0 * model.lam * beta
    if model.kind == "lasso":
        r = yy - X @ beta
        return -(X.T @ r) / m + model.lam * np.sign(beta)
    phi = _batch_features(model, X)
    p = _softmax(phi @ beta)
    p[np.arange(m), yy] -= 1.0
    return phi.T @ p / m


def predict(model: LossModel, beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Predicted labels for a batch (classification kinds only)."""
    if model.kind == "multinomial":
        return np.argmax(_batch_features(model, X) @ beta, axis=1)
    if model.kind == "logistic":
        return (X @ beta > 0).astype(int)
    if model.kind == "hinge_svm":
        return np.where(X @ beta >= 0, 1.0, -1.0)
    raise LossError("prediction error undefined for regression losses")


def prediction_error(model: LossModel, beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Misclassification rate at beta."""
    yy = _batch_labels(model, y)
    return float(np.mean(predict(model, beta, X) != yy))
