"""Pairwise distance and similarity machinery.

Embedding-space distances (optionally normalized by the per-row mean
distance mu_i) and the three expert-feature similarity measures: linear,
quadratic (the square of linear), and Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

# Rows whose mean distance falls below this are considered collapsed.
MU_CLAMP = 1e-12

SIMILARITY_KINDS = ("linear", "quadratic", "gaussian")
SIMILARITY_SCOPES = ("batch", "global")


@dataclass
class SimilaritySpec:
    """Choice of similarity measure and of the scope of its max-distance.

    ``global_max`` is the precomputed maximum pairwise feature distance of
    the full dataset; it is required (and only allowed) for global scope,
    where it makes batch similarities independent of the batching. ``sigma``
    is the Gaussian bandwidth, only meaningful for the gaussian kind.
    """

    kind: str = "quadratic"
    sigma: Optional[float] = None
    scope: str = "batch"
    global_max: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SIMILARITY_KINDS:
            raise ValueError(f"unknown similarity kind '{self.kind}'")
        if self.scope not in SIMILARITY_SCOPES:
            raise ValueError(f"unknown similarity scope '{self.scope}'")
        if self.kind == "gaussian":
            if self.sigma is None:
                self.sigma = 1.0
            if self.sigma <= 0:
                raise ValueError("sigma must be positive")
        elif self.sigma is not None:
            raise ValueError(f"sigma is only valid for the gaussian kind, not '{self.kind}'")
        if self.scope == "global":
            if self.global_max is None:
                raise ValueError("global scope requires a precomputed global_max")
            if self.global_max < 0:
                raise ValueError("global_max must be nonnegative")
        elif self.global_max is not None:
            raise ValueError("global_max is only valid for global scope")


@dataclass
class DistanceMatrix:
    """N x N embedding distances, plus the provenance needed for backprop.

    ``values`` is what the losses consume. When ``normalized`` is true,
    ``values[i, j] = raw[i, j] / mu[i]`` (possibly asymmetric). ``raw``,
    ``mu`` and ``embeddings`` are retained so loss gradients can be chained
    back to the embeddings; they are None for hand-built matrices.
    """

    values: np.ndarray
    normalized: bool
    raw: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    embeddings: Optional[np.ndarray] = None

    @classmethod
    def from_values(cls, values, normalized: bool = False) -> "DistanceMatrix":
        """Wrap a plain matrix (no embedding provenance, no gradients)."""
        return cls(values=np.asarray(values, dtype=np.float64), normalized=normalized)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _check_embeddings(embeddings) -> np.ndarray:
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2:
        raise ValueError("embeddings must be a 2-D (N x e) array")
    if e.shape[0] < 2:
        raise ValueError("at least 2 embeddings are required")
    return e


def row_mean_norms(embeddings) -> np.ndarray:
    """Per-row mean Euclidean distance mu_i = (1/N) sum_j ||E_i - E_j||.

    The self-distance (zero) is included in the mean. Entries below 1e-12
    are clamped to 1e-12 so collapsed embeddings cannot produce division by
    zero downstream.
    """
    e = _check_embeddings(embeddings)
    raw = cdist(e, e)
    return np.maximum(raw.mean(axis=1), MU_CLAMP)


def pairwise_distances(embeddings, normalize: bool = False) -> DistanceMatrix:
    """Euclidean distance matrix, optionally mu-normalized per row."""
    e = _check_embeddings(embeddings)
    raw = cdist(e, e)
    if not normalize:
        return DistanceMatrix(values=raw, normalized=False, raw=raw, embeddings=e)
    mu = np.maximum(raw.mean(axis=1), MU_CLAMP)
    return DistanceMatrix(values=raw / mu[:, None], normalized=True, raw=raw, mu=mu, embeddings=e)


def similarity_matrix(features, spec: SimilaritySpec) -> np.ndarray:
    """Pairwise [0, 1] similarity of expert-feature rows.

    linear:    s = 1 - ||f_i - f_j|| / max_dist
    quadratic: the square of the linear similarity
    gaussian:  s = exp(-||f_i - f_j||^2 / sigma)

    ``max_dist`` is the batch maximum, or ``spec.global_max`` for global
    scope. If the governing max distance is zero (all features identical)
    every similarity is defined as 1.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ValueError("features must be an N x d array with N >= 2")
    dist = cdist(f, f)
    if spec.kind == "gaussian":
        return np.exp(-(dist**2) / spec.sigma)
    max_dist = spec.global_max if spec.scope == "global" else float(dist.max())
    if max_dist <= 0.0:
        return np.ones_like(dist)
    sim = 1.0 - dist / max_dist
    if spec.kind == "quadratic":
        sim = sim**2
    return np.clip(sim, 0.0, 1.0)


def distance_gradient_to_embeddings(dm: DistanceMatrix, grad_distances: np.ndarray) -> Optional[np.ndarray]:
    """Chain d(loss)/d(values) back to d(loss)/d(embeddings).

    Handles the mu-normalization coupling: every raw distance in row i moves
    mu_i, which rescales the whole row of normalized distances. Rows whose
    mu was clamped are treated as constants of the raw distances. Returns
    None when the matrix carries no embedding provenance.
    """
    if dm.embeddings is None or dm.raw is None:
        return None
    g = np.asarray(grad_distances, dtype=np.float64)
    if g.shape != dm.values.shape:
        raise ValueError("grad_distances shape mismatch")
    if dm.normalized:
        n = dm.n
        mu = dm.mu
        clamped = dm.raw.mean(axis=1) < MU_CLAMP
        row_dot = np.sum(g * dm.values, axis=1)
        row_dot[clamped] = 0.0
        t = (g - row_dot[:, None] / n) / mu[:, None]
    else:
        t = g
    u = t + t.T
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(dm.raw > MU_CLAMP, u / dm.raw, 0.0)
    e = dm.embeddings
    return w.sum(axis=1)[:, None] * e - w @ e
