"""Frozen-embedding evaluation: linear probe and KNN accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


@dataclass
class LinearProbe:
    """Multinomial logistic classifier: logits = E @ weight + bias."""

    weight: np.ndarray
    bias: np.ndarray

    def logits(self, embeddings) -> np.ndarray:
        return np.asarray(embeddings, dtype=np.float64) @ self.weight + self.bias

    def predict(self, embeddings) -> np.ndarray:
        # argmax ties resolve to the lowest class index
        return np.argmax(self.logits(embeddings), axis=1)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def fit_linear_probe(
    embeddings,
    labels,
    iterations: int = 500,
    learning_rate: float = 0.1,
    seed: int = 0,
    n_classes: int | None = None,
) -> LinearProbe:
    """Full-batch gradient descent on the softmax cross-entropy.

    Deterministic given the seed (used only for the weight init). The
    embeddings are treated as frozen inputs; no regularization is applied.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if e.ndim != 2 or y.shape != (e.shape[0],):
        raise ValueError("need (N, e) embeddings and length-N labels")
    classes = int(y.max()) + 1 if n_classes is None else n_classes
    if np.unique(y).size < 2:
        raise ValueError("linear probe needs at least 2 classes present")
    n = e.shape[0]
    rng = np.random.default_rng(seed)
    weight = rng.normal(0.0, 0.01, size=(e.shape[1], classes))
    bias = np.zeros(classes)
    onehot = np.zeros((n, classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(iterations):
        probs = _softmax(e @ weight + bias)
        delta = (probs - onehot) / n
        weight -= learning_rate * (e.T @ delta)
        bias -= learning_rate * delta.sum(axis=0)
    return LinearProbe(weight=weight, bias=bias)


def probe_accuracy(probe: LinearProbe, embeddings, labels) -> float:
    """Fraction of argmax-correct predictions."""
    y = np.asarray(labels, dtype=np.int64)
    pred = probe.predict(embeddings)
    if pred.shape != y.shape:
        raise ValueError("labels do not match the embedding count")
    return float(np.mean(pred == y))


def knn_accuracy(train_embeddings, train_labels, test_embeddings, test_labels,
                 k: int = 1) -> float:
    """K-nearest-neighbour accuracy in embedding space (Euclidean).

    Neighbours are ordered by distance with exact ties resolved toward the
    lower training index; for k > 1 a tied majority vote goes to the tied
    class seen earliest in that ordering.
    """
    e_train = np.asarray(train_embeddings, dtype=np.float64)
    e_test = np.asarray(test_embeddings, dtype=np.float64)
    y_train = np.asarray(train_labels, dtype=np.int64)
    y_test = np.asarray(test_labels, dtype=np.int64)
    if e_train.shape[0] == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= e_train.shape[0]:
        raise ValueError("k must lie in [1, N_train]")
    dists = cdist(e_test, e_train)
    if k == 1:
        # argmin keeps the first (lowest-index) minimiser
        pred = y_train[np.argmin(dists, axis=1)]
    else:
        order = np.argsort(dists, axis=1, kind="stable")[:, :k]
        pred = np.empty(e_test.shape[0], dtype=np.int64)
        for i, neigh in enumerate(order):
            votes = np.bincount(y_train[neigh])
            best = votes.max()
            tied = set(np.flatnonzero(votes == best))
            pred[i] = next(int(y_train[j]) for j in neigh if int(y_train[j]) in tied)
    return float(np.mean(pred == y_test))
