"""Contrastive loss family over pairwise distances and similarities.

All losses report a scalar value, the N x N matrix of per-pair terms, and
the analytic gradient with respect to the embeddings (chained through the
mu-normalization when the distance matrix carries it). Diagonal pairs are
included in every double sum; they contribute zero terms but do count
toward the N^2 averaging.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .diffcore import lse_mean
from .geometry import DistanceMatrix, distance_gradient_to_embeddings


@dataclass
class MarginSpec:
    """Margin and temperature hyperparameters of the loss family."""

    delta: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass
class LossOutput:
    """Scalar loss, per-pair components, and d(loss)/d(embeddings).

    ``grad_embeddings`` is None when the distance matrix was built without
    embedding provenance. ``components`` is None for losses that have no
    per-pair decomposition (feature decoding).
    """

    value: float
    components: Optional[np.ndarray]
    grad_embeddings: Optional[np.ndarray]


@dataclass
class LinearMap:
    """Affine decoder ``z -> z @ weight.T + bias`` from R^e to R^d."""

    weight: np.ndarray
    bias: np.ndarray

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return z @ self.weight.T + self.bias


def _check_pair_inputs(dm: DistanceMatrix, similarity: np.ndarray) -> np.ndarray:
    s = np.asarray(similarity, dtype=np.float64)
    if s.shape != dm.values.shape:
        raise ValueError(f"similarity shape {s.shape} does not match distances {dm.values.shape}")
    return s


def pair_loss(dm: DistanceMatrix, similarity: np.ndarray, delta: float) -> LossOutput:
    """Margin pair loss: sim pulls pairs together, the hinge pushes apart.

    Per pair: ``s * D^2 + max(0, (1-s)^2 * delta^2 - D^2)``, averaged over
    all N^2 ordered pairs. The hinge makes the derivative jump at
    ``D = delta * (1 - s)``; exactly at the kink the push branch is treated
    as inactive.
    """
    s = _check_pair_inputs(dm, similarity)
    d = dm.values
    n = dm.n
    hinge = (1.0 - s) ** 2 * delta**2 - d**2
    components = s * d**2 + np.maximum(0.0, hinge)
    value = float(components.mean())
    grad_d = np.where(d >= delta * (1.0 - s), 2.0 * s * d, -2.0 * d * (1.0 - s)) / n**2
    return LossOutput(value, components, distance_gradient_to_embeddings(dm, grad_d))


def quad_loss(dm: DistanceMatrix, similarity: np.ndarray, delta: float) -> LossOutput:
    """Quadratic contrastive loss ``mean(((1-s) * delta - D)^2)``.

    Same minimum as the pair loss but with a derivative that is continuous
    in D: ``-2 * ((1-s) * delta - D)`` per pair.
    """
    s = _check_pair_inputs(dm, similarity)
    residual = (1.0 - s) * delta - dm.values
    components = residual**2
    value = float(components.mean())
    grad_d = -2.0 * residual / dm.n**2
    return LossOutput(value, components, distance_gradient_to_embeddings(dm, grad_d))


def expclr_loss(dm: DistanceMatrix, similarity: np.ndarray, spec: MarginSpec) -> LossOutput:
    """Quadratic per-pair terms folded through a temperature-tau log-mean-exp.

    Small tau concentrates the objective (and its gradient weights) on the
    highest-loss pairs; large tau recovers the plain quadratic loss.
    """
    s = _check_pair_inputs(dm, similarity)
    residual = (1.0 - s) * spec.delta - dm.values
    components = residual**2
    value = lse_mean(components, spec.tau)
    weights = softmax_weights(components, spec.tau)
    grad_d = weights * (-2.0 * residual)
    return LossOutput(value, components, distance_gradient_to_embeddings(dm, grad_d))


def softmax_weights(components: np.ndarray, tau: float) -> np.ndarray:
    """Per-pair gradient weights ``exp(L_ij / tau) / sum exp(L_kl / tau)``.

    Max-shift stabilized; entries are nonnegative and sum to one, and the
    weights are invariant to adding a constant to all components.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    c = np.asarray(components, dtype=np.float64)
    w = np.exp((c - c.max()) / tau)
    return w / w.sum()


def mse_decode_loss(
    embeddings: np.ndarray, features: np.ndarray, decoder: LinearMap
) -> Tuple[LossOutput, LinearMap]:
    """Feature-decoding baseline: ``mean_i ||decoder(E_i) - f_i||^2``.

    Returns the loss (with gradient w.r.t. the embeddings) and the gradient
    w.r.t. the decoder, packed as a LinearMap of the same shapes.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    f = np.asarray(features, dtype=np.float64)
    if e.ndim != 2 or f.ndim != 2 or e.shape[0] != f.shape[0]:
        raise ValueError("embeddings and features must be 2-D with equal row counts")
    if decoder.weight.shape != (f.shape[1], e.shape[1]):
        raise ValueError(
            f"decoder weight shape {decoder.weight.shape} does not map "
            f"e={e.shape[1]} to d={f.shape[1]}"
        )
    n = e.shape[0]
    residual = decoder(e) - f
    value = float(np.sum(residual**2) / n)
    grad_e = (2.0 / n) * residual @ decoder.weight
    grad_w = (2.0 / n) * residual.T @ e
    grad_b = (2.0 / n) * residual.sum(axis=0)
    return LossOutput(value, None, grad_e), LinearMap(weight=grad_w, bias=grad_b)


def bin_pseudo_labels(features: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bin index of each row's first principal coordinate.

    Features are centered and projected onto their leading principal axis
    (sign fixed so the largest-magnitude loading is positive); the projected
    scores are cut into ``bins`` equal-width intervals. Zero-variance
    features collapse into a single bin.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ValueError("features must be 2-D")
    centered = f - f.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    pivot = np.argmax(np.abs(axis))
    if axis[pivot] < 0:
        axis = -axis
    scores = centered @ axis
    span = float(scores.max() - scores.min())
    if span <= 1e-12:
        return np.zeros(f.shape[0], dtype=np.int64)
    width = span / bins
    idx = np.floor((scores - scores.min()) / width).astype(np.int64)
    return np.minimum(idx, bins - 1)


def binned_pair_loss(
    dm: DistanceMatrix, features: np.ndarray, bins: int, delta: float
) -> LossOutput:
    """Pseudo-label baseline: bin the features, then run the pair loss with
    the resulting 0/1 same-bin similarity."""
    labels = bin_pseudo_labels(features, bins)
    if labels.shape[0] != dm.n:
        raise ValueError("features row count does not match the distance matrix")
    sim = (labels[:, None] == labels[None, :]).astype(np.float64)
    return pair_loss(dm, sim, delta)
