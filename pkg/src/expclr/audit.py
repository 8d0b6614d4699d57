"""Certification of learned representations.

Pair-Lipschitz statistics and bilipschitz bounds, the rescaling
counterexample showing that perfect feature decoding pins down nothing
about those bounds, PAC bounds on the pair-Lipschitz constant of unseen
pairs, and temperature-limit diagnostics for the log-mean-exp loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .diffcore import lse_mean
from .encoder import EncoderParams, encode
from .geometry import SimilaritySpec, pairwise_distances, similarity_matrix
from .losses import LinearMap, quad_loss

ZERO_TOL = 1e-12


@dataclass
class BilipschitzReport:
    """Pair-Lipschitz matrix Z and the induced bilipschitz interval.

    ``z[i, j] = ||f_i - f_j|| / ||E_i - E_j||`` for pairs with distinct
    embeddings (NaN where undefined: the diagonal and fully degenerate
    pairs). ``unbounded`` flags pairs with distinct features but collapsed
    embeddings; those push l_max to +inf instead of raising.
    """

    z: np.ndarray
    l_min: float
    l_max: float
    target: float
    spread: float
    unbounded: bool
    n_pairs: int
    n_excluded: int

    def to_dict(self) -> dict:
        return {
            "l_min": self.l_min, "l_max": self.l_max, "target": self.target,
            "spread": self.spread, "unbounded": self.unbounded,
            "n_pairs": self.n_pairs, "n_excluded": self.n_excluded,
        }


@dataclass
class PacReport:
    approach: str
    n_val: int
    delta: float
    interval: Tuple[float, float]
    bound: float
    p_val: Optional[float] = None

    @property
    def vacuous(self) -> bool:
        return self.bound > 1.0

    def to_dict(self) -> dict:
        return {
            "approach": self.approach, "n_val": self.n_val, "delta": self.delta,
            "interval": list(self.interval), "bound": self.bound,
            "p_val": self.p_val, "vacuous": self.vacuous,
        }


def pair_lipschitz(embeddings, features, delta: float = 1.0) -> BilipschitzReport:
    """Pair-Lipschitz constants over all i<j pairs with distinct embeddings.

    Pairs where embeddings and features both collapse are excluded; pairs
    with distinct features but collapsed embeddings set the unbounded flag
    (l_max = +inf). ``target`` is max feature distance / delta, the value
    both bounds approach at the quadratic-loss minimum.
    """
    e = np.asarray(embeddings, dtype=np.float64)
    f = np.asarray(features, dtype=np.float64)
    if e.shape[0] != f.shape[0] or e.shape[0] < 2:
        raise ValueError("need matching embeddings/features with N >= 2")
    de = cdist(e, e)
    df = cdist(f, f)
    upper = np.triu_indices(e.shape[0], k=1)
    defined = de[upper] > ZERO_TOL
    degenerate = ~defined & (df[upper] <= ZERO_TOL)
    unbounded = bool(np.any(~defined & ~degenerate))

    z = np.full_like(de, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(de > ZERO_TOL, df / de, np.nan)
    np.fill_diagonal(ratios, np.nan)
    z[:] = ratios

    finite = ratios[upper][defined]
    if finite.size == 0 and not unbounded:
        raise ValueError("no pair with distinct embeddings")
    l_min = float(finite.min()) if finite.size else math.inf
    l_max = math.inf if unbounded else float(finite.max())
    target = float(df.max()) / delta
    return BilipschitzReport(
        z=z, l_min=l_min, l_max=l_max, target=target, spread=l_max - l_min,
        unbounded=unbounded, n_pairs=int(defined.sum()), n_excluded=int(degenerate.sum()),
    )


def optimize_free_embeddings(
    features,
    delta: float = 1.0,
    embedding_dim: Optional[int] = None,
    seed: int = 0,
    restarts: int = 5,
    max_iter: int = 2000,
    target_loss: float = 1e-12,
) -> Tuple[np.ndarray, float]:
    """Minimize the quadratic contrastive loss over free embedding vectors.

    Uses raw (unnormalized) distances with the linear similarity, for which
    the loss minimum of exactly zero is attainable whenever the embedding
    dimension is at least the feature dimension. L-BFGS from seeded random
    starts; returns the best (embeddings, loss).
    """
    f = np.asarray(features, dtype=np.float64)
    n, d = f.shape
    e_dim = d if embedding_dim is None else embedding_dim
    sim = similarity_matrix(f, SimilaritySpec(kind="linear"))
    rng = np.random.default_rng(seed)

    def objective(flat):
        emb = flat.reshape(n, e_dim)
        out = quad_loss(pairwise_distances(emb, normalize=False), sim, delta)
        return out.value, out.grad_embeddings.ravel()

    best_emb, best_loss = None, math.inf
    for _ in range(max(1, restarts)):
        start = rng.normal(0.0, 1.0, size=n * e_dim)
        res = minimize(objective, start, jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "ftol": 1e-18, "gtol": 1e-14})
        if res.fun < best_loss:
            best_loss = float(res.fun)
            best_emb = res.x.reshape(n, e_dim)
        if best_loss < target_loss:
            break
    return best_emb, best_loss


@dataclass
class RescalingReport:
    scale: float
    mse_before: float
    mse_after: float
    l_min_before: float
    l_min_after: float
    l_max_before: float
    l_max_after: float


def rescaling_counterexample(
    params: EncoderParams, decoder: LinearMap, scale: float, x, features
) -> RescalingReport:
    """Shrink the encoder's final affine layer by ``scale`` and grow the
    decoder matrix by the same factor: the decoding MSE is unchanged while
    both bilipschitz bounds move by the factor, so a perfect decoder
    certifies nothing about them."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if "head.fc2.weight" not in params.values or "head.fc2.bias" not in params.values:
        raise ValueError("encoder has no recognizable final affine layer")
    f = np.asarray(features, dtype=np.float64)

    def evaluate(p: EncoderParams, dec: LinearMap):
        emb = encode(p, x)
        mse = float(np.sum((dec(emb) - f) ** 2) / emb.shape[0])
        report = pair_lipschitz(emb, f)
        return mse, report

    mse0, rep0 = evaluate(params, decoder)
    scaled_values = dict(params.values)
    scaled_values["head.fc2.weight"] = params.values["head.fc2.weight"] / scale
    scaled_values["head.fc2.bias"] = params.values["head.fc2.bias"] / scale
    scaled_params = EncoderParams(config=params.config, values=scaled_values)
    scaled_decoder = LinearMap(weight=decoder.weight * scale, bias=decoder.bias)
    mse1, rep1 = evaluate(scaled_params, scaled_decoder)
    return RescalingReport(
        scale=scale, mse_before=mse0, mse_after=mse1,
        l_min_before=rep0.l_min, l_min_after=rep1.l_min,
        l_max_before=rep0.l_max, l_max_after=rep1.l_max,
    )


def fit_linear_decoder(embeddings, features) -> LinearMap:
    """Least-squares affine decoder from embeddings to features."""
    e = np.asarray(embeddings, dtype=np.float64)
    f = np.asarray(features, dtype=np.float64)
    design = np.hstack([e, np.ones((e.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(design, f, rcond=None)
    return LinearMap(weight=coef[:-1].T, bias=coef[-1])


# -- PAC bounds on the pair-Lipschitz constant of unseen pairs ---------------

def _check_pac_args(n_val: int, delta: float) -> None:
    if n_val < 1:
        raise ValueError("n_val must be a positive integer")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")


def pac_bound_validation_interval(n_val: int, delta: float) -> float:
    """Two-sided bound for the interval estimated on held-out pairs:
    sqrt(8 * ln(2 * n * (2n - 1) * 4 / delta) / n)."""
    _check_pac_args(n_val, delta)
    return math.sqrt(8.0 * math.log(2.0 * n_val * (2.0 * n_val - 1.0) * 4.0 / delta) / n_val)


def pac_bound_training_interval(p_val: float, n_val: int, delta: float) -> float:
    """Bound for the training-set interval: the observed validation
    violation rate plus sqrt(ln(2 / delta) / n)."""
    _check_pac_args(n_val, delta)
    if not 0.0 <= p_val <= 1.0:
        raise ValueError("p_val must lie in [0, 1]")
    return p_val + math.sqrt(math.log(2.0 / delta) / n_val)


def pac_bound_one_sided(n_val: int, delta: float) -> float:
    """One-sided variant of the validation-interval bound:
    sqrt(8 * ln(8 * n / delta) / n)."""
    _check_pac_args(n_val, delta)
    return math.sqrt(8.0 * math.log(8.0 * n_val / delta) / n_val)


PAC_APPROACHES = ("validation_interval", "training_interval", "one_sided")


def pac_report(
    approach: str,
    n_val: int,
    delta: float,
    p_val: Optional[float] = None,
    interval: Tuple[float, float] = (-math.inf, math.inf),
) -> PacReport:
    """Bundle one bound approach into a PacReport (vacuous bounds > 1 are
    reported as-is and flagged, never clipped)."""
    if approach == "validation_interval":
        bound = pac_bound_validation_interval(n_val, delta)
    elif approach == "training_interval":
        if p_val is None:
            raise ValueError("training_interval needs the observed violation rate p_val")
        bound = pac_bound_training_interval(p_val, n_val, delta)
    elif approach == "one_sided":
        bound = pac_bound_one_sided(n_val, delta)
    else:
        raise ValueError(f"unknown approach '{approach}', expected one of {PAC_APPROACHES}")
    return PacReport(approach=approach, n_val=n_val, delta=delta,
                     interval=interval, bound=bound, p_val=p_val)


def empirical_violation_rate(z_values, lo: float, hi: float) -> float:
    """Fraction of pair-Lipschitz values falling outside [lo, hi]."""
    z = np.asarray(z_values, dtype=np.float64)
    if z.size == 0:
        raise ValueError("no pair-Lipschitz values supplied")
    return float(np.mean((z < lo) | (z > hi)))


def sample_disjoint_pairs(indices, seed: int) -> np.ndarray:
    """Seeded shuffle-and-chunk into disjoint index pairs (each sample is
    used at most once; an odd leftover index is dropped)."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size < 2:
        raise ValueError("need at least 2 indices to form a pair")
    perm = np.random.default_rng(seed).permutation(idx)
    n_pairs = idx.size // 2
    return perm[: 2 * n_pairs].reshape(n_pairs, 2)


def pairwise_z(embeddings, features, pairs) -> np.ndarray:
    """Z values for an explicit list of index pairs (inf where collapsed)."""
    e = np.asarray(embeddings, dtype=np.float64)
    f = np.asarray(features, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64)
    num = np.linalg.norm(f[pairs[:, 0]] - f[pairs[:, 1]], axis=1)
    den = np.linalg.norm(e[pairs[:, 0]] - e[pairs[:, 1]], axis=1)
    with np.errstate(divide="ignore"):
        return np.where(den > ZERO_TOL, num / den, np.inf)


@dataclass
class PacCurve:
    rows: List[Tuple[int, float, float]]
    crossover_n: Optional[int]

    def winners(self) -> List[str]:
        return ["validation_interval" if b1 < b2 else "training_interval"
                for _, b1, b2 in self.rows]


def pac_curve(n_val_grid: Sequence[int], delta: float, p_val: float) -> PacCurve:
    """Both bounds across a grid of validation-pair counts.

    ``crossover_n`` is the first grid point from which the validation-
    interval bound stays below the training-interval one (None when the
    grid never reaches it)."""
    rows = [(int(n), pac_bound_validation_interval(int(n), delta),
             pac_bound_training_interval(p_val, int(n), delta))
            for n in n_val_grid]
    if not rows:
        raise ValueError("empty n_val grid")
    crossover = None
    for i, (n, b1, b2) in enumerate(rows):
        if b1 < b2 and all(r[1] < r[2] for r in rows[i:]):
            crossover = n
            break
    return PacCurve(rows=rows, crossover_n=crossover)


@dataclass
class TauLimitRow:
    tau: float
    value: float
    dev_from_max: float
    dev_from_mean: float


def tau_limit_probe(components, tau_grid: Sequence[float]) -> List[TauLimitRow]:
    """Log-mean-exp of the components on a temperature grid.

    Checks the two limit directions on the supplied grid: the deviation
    from the max component must not decrease, and the deviation from the
    mean must not increase, as tau grows. Violations raise."""
    c = np.asarray(components, dtype=np.float64).reshape(-1)
    taus = sorted(float(t) for t in tau_grid)
    if not taus or taus[0] <= 0:
        raise ValueError("tau grid must be nonempty and positive")
    top, mean = float(c.max()), float(c.mean())
    rows = [TauLimitRow(tau=t, value=(v := lse_mean(c, t)),
                        dev_from_max=abs(v - top), dev_from_mean=abs(v - mean))
            for t in taus]
    for prev, cur in zip(rows, rows[1:]):
        if cur.dev_from_max < prev.dev_from_max - 1e-12:
            raise ValueError(f"max-limit deviation not monotone at tau={cur.tau}")
        if cur.dev_from_mean > prev.dev_from_mean + 1e-12:
            raise ValueError(f"mean-limit deviation not monotone at tau={cur.tau}")
    return rows
