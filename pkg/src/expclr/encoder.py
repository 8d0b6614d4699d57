"""Temporal-convolutional residual encoder with analytic backpropagation.

A stack of residual conv blocks (conv -> ReLU -> conv -> residual add ->
ReLU, with a strided 1x1 projection on the skip path whenever shapes
change), followed by temporal mean-pooling and a two-layer affine head.
Forward and reverse passes are hand-written over numpy so gradients are
exact and bitwise reproducible.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .diffcore import ParamDict, as_array

CHECKPOINT_MAGIC = b"XCLRP"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    in_channels: int
    length: int
    blocks: int = 4
    hidden_channels: int = 16
    kernel_size: int = 3
    strides: Optional[Tuple[int, ...]] = None
    head_hidden: int = 32
    embedding_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.strides is None:
            object.__setattr__(self, "strides", (1,) * self.blocks)
        else:
            object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))
        for name in ("in_channels", "length", "blocks", "hidden_channels",
                     "kernel_size", "head_hidden", "embedding_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd (symmetric padding)")
        if len(self.strides) != self.blocks:
            raise ValueError("strides must list one stride per block")
        if any(s < 1 for s in self.strides):
            raise ValueError("strides must be positive")

    def output_length(self) -> int:
        t = self.length
        for s in self.strides:
            t = (t - 1) // s + 1
        return t

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels, "length": self.length,
            "blocks": self.blocks, "hidden_channels": self.hidden_channels,
            "kernel_size": self.kernel_size, "strides": list(self.strides),
            "head_hidden": self.head_hidden, "embedding_dim": self.embedding_dim,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        d = dict(d)
        if d.get("strides") is not None:
            d["strides"] = tuple(d["strides"])
        return cls(**d)


@dataclass
class EncoderParams:
    config: EncoderConfig
    values: ParamDict


def _block_layers(config: EncoderConfig) -> List[Tuple[str, int, int, int, bool]]:
    """(prefix, in_channels, out_channels, stride, has_projection) per block."""
    layers = []
    c_in = config.in_channels
    for b, stride in enumerate(config.strides):
        has_proj = c_in != config.hidden_channels or stride != 1
        layers.append((f"block{b}", c_in, config.hidden_channels, stride, has_proj))
        c_in = config.hidden_channels
    return layers


def init_encoder(config: EncoderConfig) -> EncoderParams:
    """Seeded fan-in-scaled uniform initialization of all layers.

    The draw order is fixed (blocks in order: conv1, conv2, projection;
    then the head), so identical configs give bitwise-identical parameters.
    """
    rng = np.random.default_rng(config.seed)

    def uniform(shape, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    k = config.kernel_size
    values: ParamDict = {}
    for prefix, c_in, c_out, _, has_proj in _block_layers(config):
        values[f"{prefix}.conv1.weight"] = uniform((c_out, c_in, k), c_in * k)
        values[f"{prefix}.conv1.bias"] = uniform((c_out,), c_in * k)
        values[f"{prefix}.conv2.weight"] = uniform((c_out, c_out, k), c_out * k)
        values[f"{prefix}.conv2.bias"] = uniform((c_out,), c_out * k)
        if has_proj:
            values[f"{prefix}.proj.weight"] = uniform((c_out, c_in, 1), c_in)
            values[f"{prefix}.proj.bias"] = uniform((c_out,), c_in)
    hid, hh, e = config.hidden_channels, config.head_hidden, config.embedding_dim
    values["head.fc1.weight"] = uniform((hh, hid), hid)
    values["head.fc1.bias"] = uniform((hh,), hid)
    values["head.fc2.weight"] = uniform((e, hh), hh)
    values["head.fc2.bias"] = uniform((e,), hh)
    return EncoderParams(config=config, values=values)


def parameter_count(params: EncoderParams) -> int:
    return sum(v.size for v in params.values.values())


def _conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    n, _, t = x.shape
    c_out, _, k = w.shape
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad))) if pad else x
    t_out = (t - 1) // stride + 1
    y = np.broadcast_to(b[None, :, None], (n, c_out, t_out)).copy()
    for kk in range(k):
        seg = xp[:, :, kk : kk + stride * (t_out - 1) + 1 : stride]
        y += np.einsum("oc,nct->not", w[:, :, kk], seg)
    return y


def _conv1d_backward(
    x: np.ndarray, w: np.ndarray, stride: int, dy: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, _, t = x.shape
    _, _, k = w.shape
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad))) if pad else x
    t_out = dy.shape[2]
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for kk in range(k):
        sl = slice(kk, kk + stride * (t_out - 1) + 1, stride)
        dw[:, :, kk] = np.einsum("not,nct->oc", dy, xp[:, :, sl])
        dxp[:, :, sl] += np.einsum("oc,not->nct", w[:, :, kk], dy)
    db = dy.sum(axis=(0, 2))
    dx = dxp[:, :, pad : pad + t] if pad else dxp
    return dx, dw, db


def _check_batch(config: EncoderConfig, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 3 or x.shape[1] != config.in_channels or x.shape[2] != config.length:
        raise ValueError(
            f"batch shape {x.shape} does not match (N, {config.in_channels}, {config.length})"
        )
    return x


def _forward(params: EncoderParams, x: np.ndarray) -> Tuple[np.ndarray, dict]:
    p = params.values
    cache: Dict[str, np.ndarray] = {}
    out = x
    for prefix, _, _, stride, has_proj in _block_layers(params.config):
        x_in = out
        pre1 = _conv1d_forward(x_in, p[f"{prefix}.conv1.weight"], p[f"{prefix}.conv1.bias"], stride)
        h = np.maximum(pre1, 0.0)
        pre2 = _conv1d_forward(h, p[f"{prefix}.conv2.weight"], p[f"{prefix}.conv2.bias"], 1)
        if has_proj:
            skip = _conv1d_forward(x_in, p[f"{prefix}.proj.weight"], p[f"{prefix}.proj.bias"], stride)
        else:
            skip = x_in
        z = pre2 + skip
        out = np.maximum(z, 0.0)
        cache[f"{prefix}.x"] = x_in
        cache[f"{prefix}.pre1"] = pre1
        cache[f"{prefix}.h"] = h
        cache[f"{prefix}.z"] = z
    pooled = out.mean(axis=2)
    a1 = pooled @ p["head.fc1.weight"].T + p["head.fc1.bias"]
    r1 = np.maximum(a1, 0.0)
    emb = r1 @ p["head.fc2.weight"].T + p["head.fc2.bias"]
    cache["pooled"] = pooled
    cache["a1"] = a1
    cache["r1"] = r1
    cache["t_final"] = out.shape[2]
    return emb, cache


def encode(params: EncoderParams, batch) -> np.ndarray:
    """Map an (N, c, T) batch to (N, e) embeddings."""
    x = _check_batch(params.config, batch)
    emb, _ = _forward(params, x)
    return emb


def encode_backward(params: EncoderParams, batch, grad_embeddings) -> ParamDict:
    """Exact gradients of <grad_embeddings, encode(params, batch)> w.r.t. params."""
    x = _check_batch(params.config, batch)
    g = np.asarray(grad_embeddings, dtype=np.float64)
    emb, cache = _forward(params, x)
    if g.shape != emb.shape:
        raise ValueError(f"grad_embeddings shape {g.shape} does not match embeddings {emb.shape}")
    p = params.values
    grads: ParamDict = {name: np.zeros_like(arr) for name, arr in p.items()}

    grads["head.fc2.weight"] = g.T @ cache["r1"]
    grads["head.fc2.bias"] = g.sum(axis=0)
    dr1 = g @ p["head.fc2.weight"]
    da1 = dr1 * (cache["a1"] > 0)
    grads["head.fc1.weight"] = da1.T @ cache["pooled"]
    grads["head.fc1.bias"] = da1.sum(axis=0)
    dpooled = da1 @ p["head.fc1.weight"]
    t_final = cache["t_final"]
    dout = np.repeat(dpooled[:, :, None], t_final, axis=2) / t_final

    for prefix, _, _, stride, has_proj in reversed(_block_layers(params.config)):
        dz = dout * (cache[f"{prefix}.z"] > 0)
        dh, dw2, db2 = _conv1d_backward(cache[f"{prefix}.h"], p[f"{prefix}.conv2.weight"], 1, dz)
        grads[f"{prefix}.conv2.weight"] = dw2
        grads[f"{prefix}.conv2.bias"] = db2
        dpre1 = dh * (cache[f"{prefix}.pre1"] > 0)
        dx_main, dw1, db1 = _conv1d_backward(
            cache[f"{prefix}.x"], p[f"{prefix}.conv1.weight"], stride, dpre1
        )
        grads[f"{prefix}.conv1.weight"] = dw1
        grads[f"{prefix}.conv1.bias"] = db1
        if has_proj:
            dx_skip, dwp, dbp = _conv1d_backward(
                cache[f"{prefix}.x"], p[f"{prefix}.proj.weight"], stride, dz
            )
            grads[f"{prefix}.proj.weight"] = dwp
            grads[f"{prefix}.proj.bias"] = dbp
        else:
            dx_skip = dz
        dout = dx_main + dx_skip
    return grads


def save_params(params: EncoderParams, path) -> None:
    """Write a checkpoint: magic, version, config echo (length-prefixed
    JSON), then each named array as (name, rank, extents, float64 LE values)."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    cfg = json.dumps(params.config.to_dict(), sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(cfg)))
    buf.write(cfg)
    for name, arr in params.values.items():
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<I", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_params(path) -> EncoderParams:
    with open(path, "rb") as fh:
        data = fh.read()
    view = io.BytesIO(data)

    def take(n: int, what: str) -> bytes:
        chunk = view.read(n)
        if len(chunk) != n:
            raise ValueError(f"truncated checkpoint while reading {what}")
        return chunk

    if take(5, "magic") != CHECKPOINT_MAGIC:
        raise ValueError("not an encoder checkpoint (bad magic)")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (cfg_len,) = struct.unpack("<I", take(4, "config"))
    config = EncoderConfig.from_dict(json.loads(take(cfg_len, "config")))
    values: ParamDict = {}
    while view.tell() < len(data):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, "rank"))
        shape = struct.unpack(f"<{rank}I", take(4 * rank, "extents"))
        count = int(np.prod(shape)) if rank else 1
        raw = take(8 * count, f"values of '{name}'")
        values[name] = as_array(np.frombuffer(raw, dtype="<f8").reshape(shape), name)
    return EncoderParams(config=config, values=values)
