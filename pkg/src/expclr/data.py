"""Datasets: container type, synthetic generators, persistence, splits.

The synthetic families are built so the expert features are an exact,
recomputable function of the raw series (per-channel mean, standard
deviation, zero-crossing count, peak amplitude), which lets tests verify
the feature pipeline bitwise.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

DATASET_MAGIC = b"XCLRD"
DATASET_VERSION = 1

FAMILIES = ("sine_mixture", "amplitude_classes")

# Reference instance used throughout the verification suite.
REFERENCE_SPEC_FIELDS = dict(n=600, channels=1, length=64, classes=3,
                             noise_std=0.1, seed=7, family="sine_mixture")


class DatasetIOError(Exception):
    """Base class for dataset persistence failures."""


class MagicMismatchError(DatasetIOError):
    pass


class VersionMismatchError(DatasetIOError):
    pass


class TruncatedFileError(DatasetIOError):
    pass


class InconsistencyError(DatasetIOError):
    pass


@dataclass
class Dataset:
    """Time-series X (N, c, T), expert features F (N, d), optional labels Y."""

    x: np.ndarray
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    n_classes: int = 0
    name: str = "dataset"
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        if self.x.ndim != 3:
            raise ValueError("x must have shape (N, channels, length)")
        if self.features.ndim != 2 or self.features.shape[0] != self.x.shape[0]:
            raise ValueError("features must be (N, d) with the same N as x")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.x.shape[0],):
                raise ValueError("labels must be a length-N vector")
            if self.n_classes < 2:
                raise ValueError("labelled datasets must declare n_classes >= 2")
            if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
                raise ValueError("labels must lie in [0, n_classes)")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def channels(self) -> int:
        return self.x.shape[1]

    @property
    def length(self) -> int:
        return self.x.shape[2]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            x=self.x[idx], features=self.features[idx],
            labels=None if self.labels is None else self.labels[idx],
            n_classes=self.n_classes, name=self.name, metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a generated dataset; the feature dimension is 4 per channel."""

    n: int
    channels: int = 1
    length: int = 64
    classes: int = 2
    noise_std: float = 0.0
    seed: int = 0
    family: str = "sine_mixture"

    def __post_init__(self):
        if self.n < 2 or self.channels < 1 or self.length < 2:
            raise ValueError("need n >= 2, channels >= 1, length >= 2")
        if self.classes < 2:
            raise ValueError("classes must be >= 2")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family '{self.family}'")

    @property
    def feature_dim(self) -> int:
        return 4 * self.channels


def reference_spec() -> SyntheticSpec:
    return SyntheticSpec(**REFERENCE_SPEC_FIELDS)


def expert_feature_map(x: np.ndarray) -> np.ndarray:
    """Raw expert features of an (N, c, T) batch: per channel the mean,
    standard deviation, zero-crossing count, and peak amplitude (d = 4c)."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=2)
    std = x.std(axis=2)
    crossings = np.sum(x[:, :, 1:] * x[:, :, :-1] < 0, axis=2).astype(np.float64)
    peak = np.abs(x).max(axis=2)
    return np.stack([mean, std, crossings, peak], axis=2).reshape(x.shape[0], -1)


def standardize_features(raw: np.ndarray) -> np.ndarray:
    """Per-dimension zero mean, unit variance; near-constant dims are only
    centered (guards the division, keeps the map deterministic)."""
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    return (raw - mean) / np.where(std < 1e-12, 1.0, std)


def _class_frequency_band(label: int) -> Tuple[float, float]:
    # Disjoint bands (cycles per window) so the zero-crossing feature
    # separates classes even under moderate noise.
    return 2.0 + 4.0 * label, 4.0 + 4.0 * label


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Deterministic synthetic dataset with a known expert-feature map.

    sine_mixture: each sample sums two sinusoids whose frequencies fall in
    a class-specific band. amplitude_classes: a fixed base frequency whose
    amplitude level encodes the class. Labels cycle through the classes;
    stored features are the standardized output of expert_feature_map on
    the (noisy) series.
    """
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.length) / spec.length
    x = np.empty((spec.n, spec.channels, spec.length))
    labels = np.arange(spec.n, dtype=np.int64) % spec.classes
    for i in range(spec.n):
        lab = int(labels[i])
        for ch in range(spec.channels):
            if spec.family == "sine_mixture":
                lo, hi = _class_frequency_band(lab)
                freqs = rng.uniform(lo, hi, size=2)
                amps = rng.uniform(0.5, 1.0, size=2)
                phases = rng.uniform(0.0, 2.0 * np.pi, size=2)
                wave = sum(a * np.sin(2.0 * np.pi * f * t + p)
                           for a, f, p in zip(amps, freqs, phases))
            else:
                amp = (lab + 1.0) * rng.uniform(0.9, 1.1)
                phase = rng.uniform(0.0, 2.0 * np.pi)
                wave = amp * np.sin(2.0 * np.pi * 4.0 * t + phase)
            if spec.noise_std > 0:
                wave = wave + rng.normal(0.0, spec.noise_std, size=spec.length)
            x[i, ch] = wave
    features = standardize_features(expert_feature_map(x))
    return Dataset(
        x=x, features=features, labels=labels, n_classes=spec.classes,
        name=f"{spec.family}-n{spec.n}-seed{spec.seed}",
        metadata={"family": spec.family, "seed": str(spec.seed),
                  "noise_std": repr(spec.noise_std)},
    )


def reference_dataset() -> Dataset:
    return generate_synthetic(reference_spec())


def split(ds: Dataset, fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Seeded shuffle-then-partition into (first, rest); disjoint, exhaustive."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie strictly between 0 and 1")
    n_first = int(round(fraction * ds.n))
    if n_first == 0 or n_first == ds.n:
        raise ValueError("split would leave an empty part")
    perm = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(np.sort(perm[:n_first])), ds.subset(np.sort(perm[n_first:]))


def subsample_labels(ds: Dataset, fraction: float, seed: int) -> np.ndarray:
    """Stratified labelled-index subset: per class, a seeded draw of
    ceil(fraction * class size) indices (so every class keeps >= 1)."""
    if ds.labels is None:
        raise ValueError("dataset has no labels to subsample")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    chosen = []
    for cls in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == cls)
        if members.size == 0:
            continue
        take = int(np.ceil(fraction * members.size))
        chosen.append(rng.permutation(members)[:take])
    return np.sort(np.concatenate(chosen))


def one_hot(labels, n_classes: int) -> np.ndarray:
    """(N, C) one-hot rows; out-of-range labels are rejected."""
    y = np.asarray(labels, dtype=np.int64)
    if y.ndim != 1:
        raise ValueError("labels must be a 1-D sequence")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError("label out of range for the declared class count")
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y] = 1.0
    return out


# -- persistence -------------------------------------------------------------

def save_dataset(ds: Dataset, path) -> None:
    """Write the binary format (single file) or the CSV directory layout.

    Suffix-less paths (or existing directories) use the CSV directory
    layout; anything else gets the single-file binary format.
    """
    path = Path(path)
    if path.suffix == "" or path.is_dir():
        _save_csv_dir(ds, path)
    else:
        _save_binary(ds, path)


def load_dataset(path) -> Dataset:
    path = Path(path)
    if path.is_dir():
        return _load_csv_dir(path)
    return _load_binary(path)


def _save_binary(ds: Dataset, path: Path) -> None:
    has_labels = ds.labels is not None
    buf = io.BytesIO()
    buf.write(DATASET_MAGIC)
    buf.write(struct.pack("<IIIII", DATASET_VERSION, ds.n, ds.channels, ds.length,
                          ds.feature_dim))
    buf.write(struct.pack("<BI", int(has_labels), ds.n_classes if has_labels else 0))
    buf.write(np.ascontiguousarray(ds.x, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(ds.features, dtype="<f8").tobytes())
    if has_labels:
        buf.write(np.ascontiguousarray(ds.labels, dtype="<u4").tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(buf.getvalue())


def _load_binary(path: Path) -> Dataset:
    data = Path(path).read_bytes()
    view = io.BytesIO(data)

    def take(count: int, what: str) -> bytes:
        chunk = view.read(count)
        if len(chunk) != count:
            raise TruncatedFileError(f"{path}: truncated while reading {what}")
        return chunk

    if take(5, "magic") != DATASET_MAGIC:
        raise MagicMismatchError(f"{path}: not a dataset file (bad magic)")
    version, n, c, t, d = struct.unpack("<IIIII", take(20, "header"))
    if version != DATASET_VERSION:
        raise VersionMismatchError(f"{path}: unsupported version {version}")
    has_labels, n_classes = struct.unpack("<BI", take(5, "label header"))
    x = np.frombuffer(take(8 * n * c * t, "series"), dtype="<f8").reshape(n, c, t)
    f = np.frombuffer(take(8 * n * d, "features"), dtype="<f8").reshape(n, d)
    labels = None
    if has_labels:
        labels = np.frombuffer(take(4 * n, "labels"), dtype="<u4").astype(np.int64)
    if view.tell() != len(data):
        raise InconsistencyError(f"{path}: {len(data) - view.tell()} trailing bytes")
    try:
        return Dataset(x=x.copy(), features=f.copy(), labels=labels,
                       n_classes=n_classes, name=Path(path).stem)
    except ValueError as exc:
        raise InconsistencyError(f"{path}: {exc}") from exc


def _save_csv_dir(ds: Dataset, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "n": ds.n, "channels": ds.channels, "length": ds.length,
        "feature_dim": ds.feature_dim, "has_labels": ds.labels is not None,
        "n_classes": ds.n_classes, "name": ds.name, "metadata": ds.metadata,
    }
    (directory / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    x_cols = [f"x_c{c}_t{t}" for c in range(ds.channels) for t in range(ds.length)]
    _write_csv(directory / "X.csv", x_cols, ds.x.reshape(ds.n, -1))
    _write_csv(directory / "F.csv", [f"f{j}" for j in range(ds.feature_dim)], ds.features)
    if ds.labels is not None:
        _write_csv(directory / "Y.csv", ["y"], ds.labels.reshape(-1, 1))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in np.asarray(rows):
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row.tolist()])


def _read_csv(path: Path, expected_cols: int) -> np.ndarray:
    if not path.exists():
        raise TruncatedFileError(f"{path}: missing file")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise TruncatedFileError(f"{path}: empty file")
        if len(header) != expected_cols:
            raise InconsistencyError(
                f"{path}: header declares {len(header)} columns, expected {expected_cols}"
            )
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != expected_cols:
                raise InconsistencyError(f"{path}: row {line_no} has {len(row)} columns")
            rows.append([float(v) for v in row])
    return np.asarray(rows, dtype=np.float64)


def _load_csv_dir(directory: Path) -> Dataset:
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise TruncatedFileError(f"{meta_path}: missing file")
    meta = json.loads(meta_path.read_text())
    n, c, t, d = (int(meta[k]) for k in ("n", "channels", "length", "feature_dim"))
    x = _read_csv(directory / "X.csv", c * t)
    f = _read_csv(directory / "F.csv", d)
    if x.shape[0] != n or f.shape[0] != n:
        raise InconsistencyError(
            f"{directory}: meta declares N={n} but X has {x.shape[0]} and F has {f.shape[0]} rows"
        )
    labels = None
    if meta.get("has_labels"):
        y = _read_csv(directory / "Y.csv", 1)
        if y.shape[0] != n:
            raise InconsistencyError(f"{directory / 'Y.csv'}: {y.shape[0]} rows, expected {n}")
        labels = y[:, 0].astype(np.int64)
    return Dataset(x=x.reshape(n, c, t), features=f, labels=labels,
                   n_classes=int(meta.get("n_classes", 0)), name=meta.get("name", directory.name),
                   metadata=dict(meta.get("metadata", {})))
