"""Training loops for the three modes: unsupervised on expert features,
supervised on one-hot labels, and semi-supervised pretrain-then-fine-tune.

Batching, shuffling and label subsampling are all seeded, so a (config,
dataset, seed) triple fully determines the final parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from . import data as data_mod
from .diffcore import ParamDict, adam_step, init_adam_state
from .encoder import EncoderConfig, EncoderParams, encode, encode_backward, init_encoder
from .geometry import SimilaritySpec, pairwise_distances, similarity_matrix
from .losses import (LinearMap, LossOutput, MarginSpec, binned_pair_loss,
                     expclr_loss, mse_decode_loss, pair_loss, quad_loss)

MODES = ("U", "S", "SS")
LOSS_KINDS = ("pair", "quad", "expclr", "mse_decode", "binned")


@dataclass
class TrainConfig:
    mode: str = "U"
    loss_kind: str = "expclr"
    similarity: SimilaritySpec = field(default_factory=SimilaritySpec)
    margin: MarginSpec = field(default_factory=MarginSpec)
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-2
    decay: float = 0.99
    label_fraction: float = 1.0
    seed: int = 0
    bins: int = 8  # pseudo-label bin count, binned loss only

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode '{self.mode}'")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind '{self.loss_kind}'")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (pairwise losses)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if not 0.0 < self.label_fraction <= 1.0:
            raise ValueError("label_fraction must lie in (0, 1]")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    lr: float
    seconds: float


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.records]


def _resolve_global_scope(spec: SimilaritySpec, targets: np.ndarray) -> SimilaritySpec:
    if spec.scope == "global" and spec.global_max is None:
        return replace(spec, global_max=float(cdist(targets, targets).max()))
    return spec


def _supervised_subset(config: TrainConfig, ds: data_mod.Dataset) -> Tuple[np.ndarray, np.ndarray]:
    if ds.labels is None:
        raise ValueError("supervised training needs a labelled dataset")
    idx = data_mod.subsample_labels(ds, config.label_fraction, config.seed)
    return ds.x[idx], data_mod.one_hot(ds.labels[idx], ds.n_classes)


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        chunk = perm[start : start + batch_size]
        if chunk.size >= 2:
            yield chunk


class _LossDriver:
    """Per-batch loss evaluation plus any auxiliary trainable parameters."""

    def __init__(self, config: TrainConfig, embedding_dim: int, target_dim: int):
        self.config = config
        self.decoder: Optional[LinearMap] = None
        if config.loss_kind == "mse_decode":
            rng = np.random.default_rng(config.seed + 1)
            bound = 1.0 / np.sqrt(embedding_dim)
            self.decoder = LinearMap(
                weight=rng.uniform(-bound, bound, size=(target_dim, embedding_dim)),
                bias=np.zeros(target_dim),
            )

    def aux_params(self) -> ParamDict:
        if self.decoder is None:
            return {}
        return {"decoder.weight": self.decoder.weight, "decoder.bias": self.decoder.bias}

    def set_aux(self, params: ParamDict) -> None:
        if self.decoder is not None:
            self.decoder = LinearMap(weight=params["decoder.weight"], bias=params["decoder.bias"])

    def evaluate(self, embeddings: np.ndarray, targets: np.ndarray
                 ) -> Tuple[LossOutput, ParamDict]:
        cfg = self.config
        if cfg.loss_kind == "mse_decode":
            out, dec_grad = mse_decode_loss(embeddings, targets, self.decoder)
            return out, {"decoder.weight": dec_grad.weight, "decoder.bias": dec_grad.bias}
        dm = pairwise_distances(embeddings, normalize=True)
        if cfg.loss_kind == "binned":
            return binned_pair_loss(dm, targets, cfg.bins, cfg.margin.delta), {}
        sim = similarity_matrix(targets, cfg.similarity)
        if cfg.loss_kind == "pair":
            return pair_loss(dm, sim, cfg.margin.delta), {}
        if cfg.loss_kind == "quad":
            return quad_loss(dm, sim, cfg.margin.delta), {}
        return expclr_loss(dm, sim, cfg.margin), {}


def _run_loop(
    config: TrainConfig,
    xs: np.ndarray,
    targets: np.ndarray,
    params: EncoderParams,
) -> Tuple[EncoderParams, TrainHistory]:
    config = replace(config, similarity=_resolve_global_scope(config.similarity, targets))
    driver = _LossDriver(config, params.config.embedding_dim, targets.shape[1])
    values: ParamDict = dict(params.values)
    values.update(driver.aux_params())
    state = init_adam_state(values, config.learning_rate, decay=config.decay)
    rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    encoder_keys = list(params.values)

    for epoch in range(config.epochs):
        tic = time.perf_counter()
        state.epoch = epoch
        batch_losses = []
        for b, batch_idx in enumerate(_batches(xs.shape[0], config.batch_size, rng)):
            xb = xs[batch_idx]
            enc = EncoderParams(config=params.config,
                                values={k: values[k] for k in encoder_keys})
            emb = encode(enc, xb)
            out, aux_grads = driver.evaluate(emb, targets[batch_idx])
            if not np.isfinite(out.value):
                raise RuntimeError(f"non-finite loss at epoch {epoch}, batch {b}")
            grads = encode_backward(enc, xb, out.grad_embeddings)
            grads.update(aux_grads)
            values, state = adam_step(values, grads, state)
            driver.set_aux(values)
            batch_losses.append(out.value)
        history.records.append(EpochRecord(
            epoch=epoch, loss=float(np.mean(batch_losses)) if batch_losses else float("nan"),
            lr=state.effective_lr(), seconds=time.perf_counter() - tic,
        ))
    final = EncoderParams(config=params.config,
                          values={k: values[k] for k in encoder_keys})
    return final, history


def train(
    config: TrainConfig,
    dataset: data_mod.Dataset,
    encoder_config: EncoderConfig,
    init_params: Optional[EncoderParams] = None,
) -> Tuple[EncoderParams, TrainHistory]:
    """Train an encoder from scratch in mode U (expert features) or S
    (one-hot labels on the stratified labelled subset)."""
    if config.mode == "SS":
        raise ValueError("mode SS is a two-step protocol: train(mode=U) then fine_tune")
    if encoder_config.in_channels != dataset.channels or encoder_config.length != dataset.length:
        raise ValueError("encoder config does not match the dataset geometry")
    params = init_params if init_params is not None else init_encoder(encoder_config)
    if config.mode == "U":
        xs, targets = dataset.x, dataset.features
    else:
        xs, targets = _supervised_subset(config, dataset)
    return _run_loop(config, xs, targets, params)


def fine_tune(
    params: EncoderParams,
    config: TrainConfig,
    dataset: data_mod.Dataset,
) -> Tuple[EncoderParams, TrainHistory]:
    """Supervised fine-tuning step of the semi-supervised mode.

    Runs the log-mean-exp contrastive loss with one-hot labels on the
    stratified labelled subset, starting from the pretrained parameters
    with a fresh optimizer state."""
    if config.mode != "SS":
        raise ValueError("fine_tune is the second step of mode SS")
    xs, targets = _supervised_subset(config, dataset)
    if xs.shape[0] < 2:
        raise ValueError("labelled subset too small to form a pair")
    loop_cfg = replace(config, loss_kind="expclr")
    return _run_loop(loop_cfg, xs, targets, params)


def train_cross_entropy(
    config: TrainConfig,
    dataset: data_mod.Dataset,
    encoder_config: EncoderConfig,
    init_params: Optional[EncoderParams] = None,
) -> Tuple[EncoderParams, LinearMap, TrainHistory]:
    """Supervised baseline: encoder plus a linear class head trained
    jointly under softmax cross-entropy on the labelled subset."""
    if dataset.labels is None:
        raise ValueError("cross-entropy training needs a labelled dataset")
    idx = data_mod.subsample_labels(dataset, config.label_fraction, config.seed)
    xs = dataset.x[idx]
    onehot = data_mod.one_hot(dataset.labels[idx], dataset.n_classes)

    params = init_params if init_params is not None else init_encoder(encoder_config)
    rng = np.random.default_rng(config.seed + 1)
    e_dim, classes = encoder_config.embedding_dim, dataset.n_classes
    bound = 1.0 / np.sqrt(e_dim)
    values: ParamDict = dict(params.values)
    values["classifier.weight"] = rng.uniform(-bound, bound, size=(classes, e_dim))
    values["classifier.bias"] = np.zeros(classes)
    state = init_adam_state(values, config.learning_rate, decay=config.decay)
    shuffle_rng = np.random.default_rng(config.seed)
    history = TrainHistory()
    encoder_keys = list(params.values)

    for epoch in range(config.epochs):
        tic = time.perf_counter()
        state.epoch = epoch
        batch_losses = []
        for b, batch_idx in enumerate(_batches(xs.shape[0], config.batch_size, shuffle_rng)):
            xb = xs[batch_idx]
            yb = onehot[batch_idx]
            enc = EncoderParams(config=params.config,
                                values={k: values[k] for k in encoder_keys})
            emb = encode(enc, xb)
            logits = emb @ values["classifier.weight"].T + values["classifier.bias"]
            shifted = logits - logits.max(axis=1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
            loss = float(-np.sum(yb * log_probs) / xb.shape[0])
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss at epoch {epoch}, batch {b}")
            dlogits = (np.exp(log_probs) - yb) / xb.shape[0]
            grads = encode_backward(enc, xb, dlogits @ values["classifier.weight"])
            grads["classifier.weight"] = dlogits.T @ emb
            grads["classifier.bias"] = dlogits.sum(axis=0)
            values, state = adam_step(values, grads, state)
            batch_losses.append(loss)
        history.records.append(EpochRecord(
            epoch=epoch, loss=float(np.mean(batch_losses)) if batch_losses else float("nan"),
            lr=state.effective_lr(), seconds=time.perf_counter() - tic,
        ))
    final = EncoderParams(config=params.config,
                          values={k: values[k] for k in encoder_keys})
    head = LinearMap(weight=values["classifier.weight"], bias=values["classifier.bias"])
    return final, head, history
