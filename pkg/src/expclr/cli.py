"""Command-line entry point wiring datasets, training, evaluation,
ablations and audits into reproducible experiments.

Experiments are described by a JSON config (see ``default_config``); every
scalar field can be overridden by a flag. Independent trials run under a
thread pool capped by the ``XCLR_THREADS`` environment variable. Exit
codes: 0 success, 2 config schema violation (message names the field
path), 3 numeric failure during training, 1 other errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import audit as audit_mod
from . import data as data_mod
from .encoder import EncoderConfig, EncoderParams, encode, load_params, save_params
from .evaluation import fit_linear_probe, knn_accuracy, probe_accuracy
from .geometry import SimilaritySpec
from .losses import MarginSpec
from .trainer import TrainConfig, TrainHistory, fine_tune, train


class ConfigError(Exception):
    """Schema violation; ``path`` names the offending config field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"config error at {path}: {message}")
        self.path = path


def worker_cap() -> int:
    raw = os.environ.get("XCLR_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError("XCLR_THREADS", f"not an integer: {raw!r}")
    if cap < 1:
        raise ConfigError("XCLR_THREADS", "must be >= 1")
    return cap


def default_config() -> dict:
    return {
        "dataset": {"synthetic": dict(data_mod.REFERENCE_SPEC_FIELDS)},
        "encoder": {"blocks": 4, "hidden_channels": 16, "kernel_size": 3,
                    "strides": None, "head_hidden": 32, "embedding_dim": 16},
        "train": {"mode": "U", "loss": "expclr",
                  "similarity": {"kind": "quadratic", "scope": "batch",
                                 "sigma": None, "global_max": None},
                  "tau": 1.0, "delta_margin": 1.0, "epochs": 30,
                  "batch_size": 64, "learning_rate": 1e-2, "decay": 0.99,
                  "label_fraction": 1.0, "bins": 8},
        "evaluation": {"linear": True, "knn": True, "split_fraction": 0.8,
                       "split_seed": 0, "probe_iterations": 500,
                       "probe_learning_rate": 0.1, "probe_seed": 0},
        "audit": {"bilipschitz": True, "pac": False, "delta": 0.05,
                  "nval": 1000, "pair_seed": 0, "pval": None},
        "out_dir": "runs/out",
        "trials": 1,
        "seeds": [0],
    }


# -- schema validation --------------------------------------------------------

def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, val in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(here, "unknown field")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = val
    return out


def _require(cfg: dict, path: str, kind, allow_none: bool = False):
    parts = path.split(".")
    node = cfg
    for part in parts:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(path, "missing field")
        node = node[part]
    if node is None:
        if allow_none:
            return None
        raise ConfigError(path, "must not be null")
    if kind is float and isinstance(node, int) and not isinstance(node, bool):
        node = float(node)
    if kind is not None and not isinstance(node, kind):
        raise ConfigError(path, f"expected {getattr(kind, '__name__', kind)}, got {type(node).__name__}")
    return node


def _positive(cfg: dict, path: str, kind=int):
    val = _require(cfg, path, kind)
    if val <= 0:
        raise ConfigError(path, "must be positive")
    return val


def validate_config(cfg: dict) -> dict:
    """Full structural check; raises ConfigError naming the field path."""
    cfg = _merge(default_config(), cfg)
    ds = _require(cfg, "dataset", dict)
    if ("path" in ds) == ("synthetic" in ds):
        raise ConfigError("dataset", "exactly one of 'path' or 'synthetic' is required")
    if "synthetic" in ds:
        syn = ds["synthetic"]
        for key in ("n", "channels", "length", "classes"):
            _positive(cfg, f"dataset.synthetic.{key}")
        if syn["classes"] < 2:
            raise ConfigError("dataset.synthetic.classes", "must be >= 2")
        noise = _require(cfg, "dataset.synthetic.noise_std", float)
        if noise < 0:
            raise ConfigError("dataset.synthetic.noise_std", "must be nonnegative")
        _require(cfg, "dataset.synthetic.seed", int)
        if syn["family"] not in data_mod.FAMILIES:
            raise ConfigError("dataset.synthetic.family", f"must be one of {data_mod.FAMILIES}")
    else:
        _require(cfg, "dataset.path", str)
    for key in ("blocks", "hidden_channels", "kernel_size", "head_hidden", "embedding_dim"):
        _positive(cfg, f"encoder.{key}")
    if cfg["encoder"]["kernel_size"] % 2 == 0:
        raise ConfigError("encoder.kernel_size", "must be odd")
    strides = cfg["encoder"]["strides"]
    if strides is not None:
        if not isinstance(strides, list) or len(strides) != cfg["encoder"]["blocks"] \
                or any(not isinstance(s, int) or s < 1 for s in strides):
            raise ConfigError("encoder.strides", "must list one positive stride per block")
    tr = cfg["train"]
    if tr["mode"] not in ("U", "S", "SS"):
        raise ConfigError("train.mode", "must be one of U, S, SS")
    if tr["loss"] not in ("pair", "quad", "expclr", "mse", "binned"):
        raise ConfigError("train.loss", "must be one of pair, quad, expclr, mse, binned")
    if tr["similarity"]["kind"] not in ("linear", "quadratic", "gaussian"):
        raise ConfigError("train.similarity.kind", "must be one of linear, quadratic, gaussian")
    if tr["similarity"]["scope"] not in ("batch", "global"):
        raise ConfigError("train.similarity.scope", "must be 'batch' or 'global'")
    _positive(cfg, "train.tau", float)
    _positive(cfg, "train.delta_margin", float)
    if _require(cfg, "train.epochs", int) < 0:
        raise ConfigError("train.epochs", "must be nonnegative")
    if _require(cfg, "train.batch_size", int) < 2:
        raise ConfigError("train.batch_size", "must be >= 2")
    _positive(cfg, "train.learning_rate", float)
    decay = _positive(cfg, "train.decay", float)
    if decay > 1:
        raise ConfigError("train.decay", "must lie in (0, 1]")
    frac = _positive(cfg, "train.label_fraction", float)
    if frac > 1:
        raise ConfigError("train.label_fraction", "must lie in (0, 1]")
    if _require(cfg, "train.bins", int) < 2:
        raise ConfigError("train.bins", "must be >= 2")
    _require(cfg, "evaluation.linear", bool)
    _require(cfg, "evaluation.knn", bool)
    sf = _positive(cfg, "evaluation.split_fraction", float)
    if sf >= 1:
        raise ConfigError("evaluation.split_fraction", "must lie in (0, 1)")
    _positive(cfg, "evaluation.probe_iterations")
    _positive(cfg, "evaluation.probe_learning_rate", float)
    delta = _positive(cfg, "audit.delta", float)
    if delta >= 1:
        raise ConfigError("audit.delta", "must lie in (0, 1)")
    _positive(cfg, "audit.nval")
    pval = _require(cfg, "audit.pval", float, allow_none=True)
    if pval is not None and not 0 <= pval <= 1:
        raise ConfigError("audit.pval", "must lie in [0, 1]")
    trials = _positive(cfg, "trials")
    seeds = _require(cfg, "seeds", list)
    if len(seeds) != trials or any(not isinstance(s, int) for s in seeds):
        raise ConfigError("seeds", f"must list exactly {trials} integer seeds")
    return cfg


def config_hash(cfg: dict) -> str:
    """Short digest of the experimental configuration (the output location
    is storage, not configuration, and is excluded)."""
    meaningful = {k: v for k, v in cfg.items() if k != "out_dir"}
    blob = json.dumps(meaningful, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# -- typed views over the validated config ------------------------------------

def _similarity_spec(cfg: dict) -> SimilaritySpec:
    sim = cfg["train"]["similarity"]
    return SimilaritySpec(kind=sim["kind"], sigma=sim["sigma"], scope=sim["scope"],
                          global_max=sim["global_max"])


def _train_config(cfg: dict, seed: int) -> TrainConfig:
    tr = cfg["train"]
    loss = {"mse": "mse_decode"}.get(tr["loss"], tr["loss"])
    return TrainConfig(
        mode="U" if tr["mode"] == "SS" else tr["mode"], loss_kind=loss,
        similarity=_similarity_spec(cfg),
        margin=MarginSpec(delta=tr["delta_margin"], tau=tr["tau"]),
        epochs=tr["epochs"], batch_size=tr["batch_size"],
        learning_rate=tr["learning_rate"], decay=tr["decay"],
        label_fraction=tr["label_fraction"], seed=seed, bins=tr["bins"],
    )


def _encoder_config(cfg: dict, ds: data_mod.Dataset, seed: int) -> EncoderConfig:
    enc = cfg["encoder"]
    strides = None if enc["strides"] is None else tuple(enc["strides"])
    return EncoderConfig(in_channels=ds.channels, length=ds.length,
                         blocks=enc["blocks"], hidden_channels=enc["hidden_channels"],
                         kernel_size=enc["kernel_size"], strides=strides,
                         head_hidden=enc["head_hidden"],
                         embedding_dim=enc["embedding_dim"], seed=seed)


def _load_dataset(cfg: dict) -> data_mod.Dataset:
    ds = cfg["dataset"]
    if "synthetic" in ds:
        return data_mod.generate_synthetic(data_mod.SyntheticSpec(**ds["synthetic"]))
    return data_mod.load_dataset(ds["path"])


def _write_csv(path: Path, header: List[str], rows: List[List]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_history(path: Path, history: TrainHistory, chash: str) -> None:
    _write_csv(path, ["epoch", "loss", "lr", "seconds", "config_hash"],
               [[r.epoch, repr(r.loss), repr(r.lr), repr(r.seconds), chash]
                for r in history.records])


def _trial_dir(cfg: dict, seed: int) -> Path:
    return Path(cfg["out_dir"]) / f"trial_{seed}"


def _run_trials(seeds: Sequence[int], fn) -> Dict[int, object]:
    """Run one pure function per seed under the XCLR_THREADS cap."""
    results: Dict[int, object] = {}
    cap = worker_cap()
    if cap == 1 or len(seeds) == 1:
        for s in seeds:
            results[s] = fn(s)
        return results
    with ThreadPoolExecutor(max_workers=cap) as pool:
        futures = {s: pool.submit(fn, s) for s in seeds}
        for s, fut in futures.items():
            results[s] = fut.result()
    return results


def _split_for_eval(cfg: dict, ds: data_mod.Dataset):
    ev = cfg["evaluation"]
    return data_mod.split(ds, ev["split_fraction"], ev["split_seed"])


def _eval_embeddings(cfg: dict, params: EncoderParams, ds: data_mod.Dataset
                     ) -> Tuple[float, float]:
    """(linear accuracy, knn accuracy) on the held-out part of the split;
    NaN for disabled metrics."""
    ev = cfg["evaluation"]
    train_ds, val_ds = _split_for_eval(cfg, ds)
    e_train = encode(params, train_ds.x)
    e_val = encode(params, val_ds.x)
    lin = knn = math.nan
    if ev["linear"]:
        probe = fit_linear_probe(e_train, train_ds.labels, iterations=ev["probe_iterations"],
                                 learning_rate=ev["probe_learning_rate"], seed=ev["probe_seed"],
                                 n_classes=ds.n_classes)
        lin = probe_accuracy(probe, e_val, val_ds.labels)
    if ev["knn"]:
        knn = knn_accuracy(e_train, train_ds.labels, e_val, val_ds.labels, k=1)
    return lin, knn


def _metrics_rows(cfg: dict, method: str, per_seed: Dict[int, Tuple[float, float]]) -> List[List]:
    chash = config_hash(cfg)
    tr = cfg["train"]
    rows = []
    for seed in sorted(per_seed):
        lin, knn = per_seed[seed]
        rows.append([method, tr["mode"], repr(tr["label_fraction"]), seed,
                     repr(lin), repr(knn), "", "", chash])
    lins = np.array([per_seed[s][0] for s in sorted(per_seed)])
    knns = np.array([per_seed[s][1] for s in sorted(per_seed)])

    def stderr(vals: np.ndarray) -> float:
        if vals.size < 2:
            return 0.0
        return float(vals.std(ddof=1) / math.sqrt(vals.size))

    rows.append([method, tr["mode"], repr(tr["label_fraction"]), "aggregate",
                 repr(float(lins.mean())), repr(float(knns.mean())),
                 repr(stderr(lins)), repr(stderr(knns)), chash])
    return rows


METRICS_HEADER = ["method", "mode", "label_fraction", "seed", "lin_acc", "knn_acc",
                  "lin_stderr", "knn_stderr", "config_hash"]


# -- subcommands ---------------------------------------------------------------

def cmd_gen_data(cfg: dict, args) -> int:
    ds = cfg["dataset"]
    if "synthetic" not in ds:
        raise ConfigError("dataset.synthetic", "gen-data needs a synthetic dataset spec")
    dataset = data_mod.generate_synthetic(data_mod.SyntheticSpec(**ds["synthetic"]))
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / "dataset.xclrd"
    data_mod.save_dataset(dataset, path)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    print(f"wrote {path} (N={dataset.n}, sha256={digest})")
    return 0


def cmd_train(cfg: dict, args) -> int:
    dataset = _load_dataset(cfg)
    chash = config_hash(cfg)

    def one_trial(seed: int):
        tcfg = _train_config(cfg, seed)
        params, history = train(tcfg, dataset, _encoder_config(cfg, dataset, seed))
        return params, history

    results = _run_trials(cfg["seeds"], one_trial)
    for seed in sorted(results):
        params, history = results[seed]
        tdir = _trial_dir(cfg, seed)
        tdir.mkdir(parents=True, exist_ok=True)
        save_params(params, tdir / "encoder.xclrp")
        _write_history(tdir / "history.csv", history, chash)
        last = history.records[-1].loss if history.records else math.nan
        print(f"trial {seed}: {len(history.records)} epochs, final loss {last:.6g}")
    return 0


def cmd_finetune(cfg: dict, args) -> int:
    dataset = _load_dataset(cfg)
    chash = config_hash(cfg)

    def one_trial(seed: int):
        ckpt = Path(args.checkpoint) if args.checkpoint else _trial_dir(cfg, seed) / "encoder.xclrp"
        params = load_params(ckpt)
        tcfg = dataclasses.replace(_train_config(cfg, seed), mode="SS")
        return fine_tune(params, tcfg, dataset)

    results = _run_trials(cfg["seeds"], one_trial)
    for seed in sorted(results):
        params, history = results[seed]
        tdir = _trial_dir(cfg, seed)
        tdir.mkdir(parents=True, exist_ok=True)
        save_params(params, tdir / "finetuned.xclrp")
        _write_history(tdir / "history_finetune.csv", history, chash)
        print(f"trial {seed}: fine-tuned {len(history.records)} epochs")
    return 0


def cmd_eval(cfg: dict, args) -> int:
    dataset = _load_dataset(cfg)
    if dataset.labels is None:
        raise ConfigError("dataset", "evaluation needs a labelled dataset")
    name = "finetuned.xclrp" if args.finetuned else "encoder.xclrp"

    def one_trial(seed: int):
        ckpt = Path(args.checkpoint) if args.checkpoint else _trial_dir(cfg, seed) / name
        return _eval_embeddings(cfg, load_params(ckpt), dataset)

    per_seed = _run_trials(cfg["seeds"], one_trial)
    rows = _metrics_rows(cfg, cfg["train"]["loss"], per_seed)
    out = Path(cfg["out_dir"]) / ("metrics_finetuned.csv" if args.finetuned else "metrics.csv")
    _write_csv(out, METRICS_HEADER, rows)
    for row in rows:
        print(",".join(str(v) for v in row))
    print(f"wrote {out}")
    return 0


def cmd_audit(cfg: dict, args) -> int:
    report: dict = {"config_hash": config_hash(cfg)}
    au = cfg["audit"]
    dataset = params = None
    needs_model = au["bilipschitz"] or (au["pac"] and au["pval"] is None)
    if needs_model:
        ckpt = Path(args.checkpoint) if args.checkpoint else \
            _trial_dir(cfg, cfg["seeds"][0]) / "encoder.xclrp"
        if ckpt.exists():
            dataset = _load_dataset(cfg)
            params = load_params(ckpt)
        elif au["pac"] and au["pval"] is not None:
            # formula-only audit: the supplied violation rate stands in for
            # the empirical one, so no trained model is needed
            report["bilipschitz"] = "skipped (no checkpoint)"
        else:
            raise FileNotFoundError(f"audit needs a checkpoint, none at {ckpt}")

    if au["bilipschitz"] and params is not None:
        emb = encode(params, dataset.x)
        bilip = audit_mod.pair_lipschitz(emb, dataset.features,
                                         delta=cfg["train"]["delta_margin"])
        report["bilipschitz"] = bilip.to_dict()

    if au["pac"]:
        n_val, delta = au["nval"], au["delta"]
        p_val = au["pval"]
        interval = None
        if p_val is None:
            train_ds, val_ds = _split_for_eval(cfg, dataset)
            e_train = encode(params, train_ds.x)
            e_val = encode(params, val_ds.x)
            z_train = audit_mod.pairwise_z(
                e_train, train_ds.features,
                audit_mod.sample_disjoint_pairs(np.arange(train_ds.n), au["pair_seed"]))
            pairs_val = audit_mod.sample_disjoint_pairs(np.arange(val_ds.n), au["pair_seed"])
            z_val = audit_mod.pairwise_z(e_val, val_ds.features, pairs_val)
            interval = (float(np.min(z_train)), float(np.max(z_train)))
            p_val = audit_mod.empirical_violation_rate(z_val, *interval)
        report["pac"] = {"n_val": n_val, "delta": delta, "p_val": p_val,
                         "interval_train": interval}
        for approach in audit_mod.PAC_APPROACHES:
            rep = audit_mod.pac_report(approach, n_val, delta, p_val=p_val)
            report["pac"][f"bound_{approach}"] = rep.bound
            if rep.vacuous:
                report["pac"].setdefault("vacuous", []).append(approach)

    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "audit.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_pac_curve(cfg: dict, args) -> int:
    au = cfg["audit"]
    p_val = au["pval"] if au["pval"] is not None else 0.05
    grid = args.nvals or [100, 1000, 10000, 100000, 1000000]
    curve = audit_mod.pac_curve(grid, au["delta"], p_val)
    chash = config_hash(cfg)
    rows = [[n, repr(b1), repr(b2), chash] for n, b1, b2 in curve.rows]
    out = Path(cfg["out_dir"]) / "pac_curve.csv"
    _write_csv(out, ["n_val", "bound_validation_interval", "bound_training_interval",
                     "config_hash"], rows)
    print(f"wrote {out}; crossover at n_val={curve.crossover_n}")
    return 0


def cmd_ablate_similarity(cfg: dict, args) -> int:
    dataset = _load_dataset(cfg)
    chash = config_hash(cfg)
    rows = []
    for kind in ("linear", "quadratic", "gaussian"):
        kcfg = json.loads(json.dumps(cfg))
        kcfg["train"]["similarity"]["kind"] = kind
        kcfg["train"]["similarity"]["sigma"] = 1.0 if kind == "gaussian" else None

        def one_trial(seed: int, kcfg=kcfg):
            params, _ = train(_train_config(kcfg, seed), dataset,
                              _encoder_config(kcfg, dataset, seed))
            return _eval_embeddings(kcfg, params, dataset)

        per_seed = _run_trials(cfg["seeds"], one_trial)
        for seed in sorted(per_seed):
            lin, knn = per_seed[seed]
            rows.append([kind, seed, repr(lin), repr(knn), chash])
        rows.append([kind, "mean",
                     repr(float(np.mean([per_seed[s][0] for s in per_seed]))),
                     repr(float(np.mean([per_seed[s][1] for s in per_seed]))), chash])
    out = Path(cfg["out_dir"]) / "ablate_similarity.csv"
    _write_csv(out, ["similarity", "seed", "lin_acc", "knn_acc", "config_hash"], rows)
    print(f"wrote {out}")
    return 0


def cmd_ablate_tau(cfg: dict, args) -> int:
    dataset = _load_dataset(cfg)
    chash = config_hash(cfg)
    taus = args.taus or [0.1, 1.0, 10.0]
    rows = []

    def sweep(label: str, tcfg_json: dict):
        def one_trial(seed: int):
            params, _ = train(_train_config(tcfg_json, seed), dataset,
                              _encoder_config(tcfg_json, dataset, seed))
            return _eval_embeddings(tcfg_json, params, dataset)

        per_seed = _run_trials(cfg["seeds"], one_trial)
        for seed in sorted(per_seed):
            lin, knn = per_seed[seed]
            rows.append([label, seed, repr(lin), repr(knn), chash])

    for tau in taus:
        tcfg = json.loads(json.dumps(cfg))
        tcfg["train"]["loss"] = "expclr"
        tcfg["train"]["tau"] = float(tau)
        sweep(repr(float(tau)), tcfg)
    # no-mining baseline: the plain quadratic loss
    qcfg = json.loads(json.dumps(cfg))
    qcfg["train"]["loss"] = "quad"
    sweep("quad", qcfg)
    out = Path(cfg["out_dir"]) / "ablate_tau.csv"
    _write_csv(out, ["tau", "seed", "lin_acc", "knn_acc", "config_hash"], rows)
    print(f"wrote {out}")
    return 0


# -- argument parsing ----------------------------------------------------------

def _apply_overrides(cfg: dict, args) -> dict:
    cfg = json.loads(json.dumps(cfg))
    if args.out is not None:
        cfg["out_dir"] = args.out
    if args.seed:
        cfg["seeds"] = list(args.seed)
        cfg["trials"] = len(args.seed)
    tr = cfg.setdefault("train", {})
    if args.mode is not None:
        tr["mode"] = args.mode
    if args.loss is not None:
        tr["loss"] = args.loss
    if args.sim is not None:
        tr.setdefault("similarity", {})["kind"] = args.sim
        if args.sim == "gaussian":
            tr["similarity"]["sigma"] = tr["similarity"].get("sigma") or 1.0
        else:
            tr["similarity"]["sigma"] = None
    if args.tau is not None:
        tr["tau"] = args.tau
    if args.delta_margin is not None:
        tr["delta_margin"] = args.delta_margin
    if args.label_fraction is not None:
        tr["label_fraction"] = args.label_fraction
    if args.epochs is not None:
        tr["epochs"] = args.epochs
    au = cfg.setdefault("audit", {})
    if args.nval is not None:
        au["nval"] = args.nval
    if args.delta is not None:
        au["delta"] = args.delta
    if args.pval is not None:
        au["pval"] = args.pval
    if args.pac:
        au["pac"] = True
    return cfg


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expclr",
        description="Expert-feature contrastive representation learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "gen-data": cmd_gen_data,
        "train": cmd_train,
        "finetune": cmd_finetune,
        "eval": cmd_eval,
        "audit": cmd_audit,
        "pac-curve": cmd_pac_curve,
        "ablate-similarity": cmd_ablate_similarity,
        "ablate-tau": cmd_ablate_tau,
    }
    for name, handler in commands.items():
        p = sub.add_parser(name)
        p.set_defaults(handler=handler)
        p.add_argument("--config", metavar="PATH", help="JSON experiment config")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, action="append", metavar="N",
                       help="trial seed (repeatable)")
        p.add_argument("--mode", choices=["U", "S", "SS"])
        p.add_argument("--loss", choices=["pair", "quad", "expclr", "mse", "binned"])
        p.add_argument("--sim", choices=["linear", "quadratic", "gaussian"])
        p.add_argument("--tau", type=float)
        p.add_argument("--delta-margin", type=float, dest="delta_margin")
        p.add_argument("--label-fraction", type=float, dest="label_fraction")
        p.add_argument("--epochs", type=int)
        p.add_argument("--nval", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--pval", type=float)
        p.add_argument("--pac", action="store_true")
        p.add_argument("--checkpoint", metavar="PATH")
        p.add_argument("--finetuned", action="store_true",
                       help="evaluate the fine-tuned checkpoint")
        if name == "pac-curve":
            p.add_argument("--nvals", type=int, nargs="+", metavar="N")
        if name == "ablate-tau":
            p.add_argument("--taus", type=float, nargs="+", metavar="TAU")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one subcommand, and return the exit code."""
    args = _build_parser().parse_args(argv)
    try:
        cfg = default_config()
        if args.config:
            path = Path(args.config)
            if not path.exists():
                raise FileNotFoundError(f"config file not found: {path}")
            cfg = _merge(cfg, json.loads(path.read_text()))
        cfg = _apply_overrides(cfg, args)
        cfg = validate_config(cfg)
        return args.handler(cfg, args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, data_mod.DatasetIOError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
