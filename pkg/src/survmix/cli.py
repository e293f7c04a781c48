"""Command-line interface and checkpoint persistence.

Subcommands: simulate | train | predict | evaluate | km-export. Run
configuration is flat ``key = value`` text with a strict key whitelist;
checkpoints are a small binary container of named float64 tensors.
"""

from __future__ import annotations

import argparse
import os
import struct
import sys

import numpy as np

from . import datagen, metrics, model
from .datagen import (
    PreprocessStats,
    SurvivalDataset,
    SurvMnistConfig,
    SyntheticConfig,
    gen_survmnist,
    gen_synthetic,
    inverse_time_transform,
    load_csv,
    make_surrogate_digit_features,
    preprocess,
    save_csv,
    train_test_split,
)
from .errors import ConfigError, FormatError, ShapeError, SurvmixError
from .model import ModelParams, TrainConfig
from .nnet import DenseNet

CHECKPOINT_MAGIC = b"VDSC"
CHECKPOINT_VERSION = 1

# Whitelisted run-config keys with defaults mirroring the reference
# tabular-benchmark recipe.
CONFIG_DEFAULTS = {
    # training
    "latent_dim": "16",
    "num_clusters": "3",
    "weibull_shape": "1.0",
    "batch_size": "256",
    "learning_rate": "1e-3",
    "epochs": "1000",
    "pretrain_epochs": "0",
    "mc_samples": "1",
    "recon_loss": "mse",
    "survival_weight": "1.0",
    "gmm_prior": "true",
    "seed": "42",
    "enc_hidden": "128,128",
    "dec_hidden": "128,128",
    # data generation
    "num_samples": "60000",
    "num_features": "1000",
    "hidden_units": "32",
    "censoring_fraction": "0.3",
    "cov_mode": "full",
    "mean_survival": "365.0",
    "test_fraction": "0.3",
    "stratify_by_time": "false",
}


def parse_config(path):
    """Read ``key = value`` lines ('#' comments allowed); unknown keys are
    rejected with their line number, missing keys fall back to defaults."""
    values = dict(CONFIG_DEFAULTS)
    seen = set()
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown configuration key {key!r}")
            values[key] = value
            seen.add(key)
    for key in CONFIG_DEFAULTS:
        if key not in seen:
            print(f"notice: {key} not set, using default {CONFIG_DEFAULTS[key]}",
                  file=sys.stderr)
    return values


def _parse_bool(value, key):
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_int_tuple(value):
    return tuple(int(v) for v in value.split(",") if v.strip())


def train_config_from(values, seed_override=None):
    try:
        config = TrainConfig(
            latent_dim=int(values["latent_dim"]),
            num_clusters=int(values["num_clusters"]),
            weibull_shape=float(values["weibull_shape"]),
            batch_size=int(values["batch_size"]),
            learning_rate=float(values["learning_rate"]),
            epochs=int(values["epochs"]),
            pretrain_epochs=int(values["pretrain_epochs"]),
            mc_samples=int(values["mc_samples"]),
            recon_loss=values["recon_loss"],
            survival_weight=float(values["survival_weight"]),
            gmm_prior=_parse_bool(values["gmm_prior"], "gmm_prior"),
            seed=int(values["seed"]) if seed_override is None else seed_override,
            enc_hidden=_parse_int_tuple(values["enc_hidden"]),
            dec_hidden=_parse_int_tuple(values["dec_hidden"]),
        )
    except ValueError as exc:
        raise ConfigError(f"bad configuration value: {exc}") from None
    config.validate()
    return config


# --- checkpoint container ------------------------------------------------


def _write_str(f, s):
    data = s.encode("utf-8")
    f.write(struct.pack("<H", len(data)))
    f.write(data)


def _read_str(f, path):
    raw = f.read(2)
    if len(raw) != 2:
        raise FormatError(f"{path}: truncated string length at byte {f.tell() - len(raw)}")
    (n,) = struct.unpack("<H", raw)
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated string at byte {f.tell() - len(data)}")
    return data.decode("utf-8")


def save_checkpoint(params, stats, config_values, path):
    """Binary container: magic, version, config echo, named tensors."""
    tensors = dict(params.flat(trainable_only=False))
    tensors["surv.shape"] = np.asarray(params.shape)
    tensors["stats.max_time"] = np.asarray(stats.max_time)
    tensors["stats.feature_mean"] = stats.feature_mean
    tensors["stats.feature_std"] = stats.feature_std

    meta = dict(config_values)
    meta["arch.enc_acts"] = ",".join(params.encoder.activations)
    meta["arch.dec_acts"] = ",".join(params.decoder.activations)
    meta["arch.enc_sizes"] = ",".join(
        str(w.shape[0]) for w in params.encoder.weights
    ) + f",{params.encoder.output_dim}"
    meta["arch.dec_sizes"] = ",".join(
        str(w.shape[0]) for w in params.decoder.weights
    ) + f",{params.decoder.output_dim}"
    meta["arch.gmm_prior"] = "true" if params.gmm_prior else "false"
    meta["stats.feature_kind"] = stats.feature_kind

    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(meta)))
        for key in sorted(meta):
            _write_str(f, key)
            _write_str(f, str(meta[key]))
        f.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(np.asarray(tensors[name], dtype=float))
            _write_str(f, name)
            f.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.astype("<f8").tobytes())


def load_checkpoint(path):
    """Returns (ModelParams, PreprocessStats, config echo dict)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r} at byte 0")
        raw = f.read(4)
        if len(raw) != 4:
            raise FormatError(f"{path}: truncated version at byte 4")
        (version,) = struct.unpack("<I", raw)
        if version != CHECKPOINT_VERSION:
            raise FormatError(
                f"{path}: unsupported checkpoint version {version}, "
                f"expected {CHECKPOINT_VERSION}"
            )
        (n_meta,) = struct.unpack("<I", f.read(4))
        meta = {}
        for _ in range(n_meta):
            key = _read_str(f, path)
            meta[key] = _read_str(f, path)
        (n_tensors,) = struct.unpack("<I", f.read(4))
        tensors = {}
        for _ in range(n_tensors):
            name = _read_str(f, path)
            raw = f.read(1)
            if len(raw) != 1:
                raise FormatError(f"{path}: truncated tensor rank at byte {f.tell() - 1}")
            (rank,) = struct.unpack("<B", raw)
            shape = []
            for _ in range(rank):
                shape.append(struct.unpack("<I", f.read(4))[0])
            count = int(np.prod(shape)) if shape else 1
            payload = f.read(8 * count)
            if len(payload) != 8 * count:
                raise FormatError(
                    f"{path}: truncated tensor {name!r} at byte "
                    f"{f.tell() - len(payload)}: expected {8 * count} bytes"
                )
            arr = np.frombuffer(payload, dtype="<f8").copy()
            tensors[name] = arr.reshape(shape) if shape else arr[0]

    def build_net(prefix, acts):
        net = DenseNet()
        for i, act in enumerate(acts):
            net.weights.append(tensors[f"{prefix}.W{i}"])
            net.biases.append(tensors[f"{prefix}.b{i}"])
            net.activations.append(act)
        return net

    enc_acts = meta["arch.enc_acts"].split(",")
    dec_acts = meta["arch.dec_acts"].split(",")
    params = ModelParams(
        encoder=build_net("enc", enc_acts),
        decoder=build_net("dec", dec_acts),
        mixture_logits=tensors["mix.logits"],
        means=tensors["mix.means"],
        log_vars=tensors["mix.log_vars"],
        betas=tensors["surv.betas"],
        shape=float(np.ravel(tensors["surv.shape"])[0]),
        gmm_prior=meta["arch.gmm_prior"] == "true",
    )
    stats = PreprocessStats(
        max_time=float(np.ravel(tensors["stats.max_time"])[0]),
        feature_mean=tensors["stats.feature_mean"],
        feature_std=tensors["stats.feature_std"],
        feature_kind=meta.get("stats.feature_kind", "real"),
    )
    return params, stats, meta


# --- subcommands ---------------------------------------------------------


def cmd_simulate(kind, config_path, out_dir, seed_override=None):
    values = parse_config(config_path)
    seed = int(values["seed"]) if seed_override is None else seed_override
    os.makedirs(out_dir, exist_ok=True)
    if kind == "synthetic":
        gen_config = SyntheticConfig(
            num_clusters=int(values["num_clusters"]),
            num_samples=int(values["num_samples"]),
            latent_dim=int(values["latent_dim"]),
            num_features=int(values["num_features"]),
            weibull_shape=float(values["weibull_shape"]),
            censoring_fraction=float(values["censoring_fraction"]),
            hidden_units=int(values["hidden_units"]),
            cov_mode=values["cov_mode"],
            seed=seed,
        )
        dataset = gen_synthetic(gen_config)
    elif kind == "survmnist":
        features, digits = make_surrogate_digit_features(
            int(values["num_samples"]), seed
        )
        gen_config = SurvMnistConfig(
            num_clusters=int(values["num_clusters"]),
            censoring_fraction=float(values["censoring_fraction"]),
            mean_survival=float(values["mean_survival"]),
            seed=seed,
        )
        dataset = gen_survmnist(gen_config, features, digits)
    else:
        raise ConfigError(f"unknown dataset kind {kind!r}")
    train, test = train_test_split(
        dataset,
        float(values["test_fraction"]),
        seed,
        stratify_by_time=_parse_bool(values["stratify_by_time"], "stratify_by_time"),
    )
    save_csv(train, os.path.join(out_dir, "train.csv"))
    save_csv(test, os.path.join(out_dir, "test.csv"))
    with open(os.path.join(out_dir, "manifest"), "w") as f:
        f.write(f"kind = {kind}\nseed = {seed}\n")
        for key in sorted(values):
            f.write(f"{key} = {values[key]}\n")


def cmd_train(data_path, config_path, out_path, seed_override=None):
    values = parse_config(config_path)
    config = train_config_from(values, seed_override)
    if seed_override is not None:
        values["seed"] = str(seed_override)
    feature_kind = "binary" if config.recon_loss == "bce" else "real"
    dataset = load_csv(data_path, feature_kind=feature_kind)
    dataset, stats = preprocess(dataset)
    params, trace = model.fit(dataset, config)
    save_checkpoint(params, stats, values, out_path)
    trace_path = out_path + ".trace.csv"
    with open(trace_path, "w") as f:
        f.write("epoch,elbo\n")
        for epoch, value in enumerate(trace):
            f.write(f"{epoch},{format(value, '.17g')}\n")


def cmd_predict(checkpoint_path, data_path, out_path):
    params, stats, meta = load_checkpoint(checkpoint_path)
    dataset = load_csv(data_path, feature_kind=stats.feature_kind)
    if dataset.features.shape[1] != params.input_dim:
        raise ShapeError(
            f"data has {dataset.features.shape[1]} features, "
            f"checkpoint expects {params.input_dim}"
        )
    # Times and events are deliberately not passed: held-out prediction
    # must not peek at the outcome columns.
    features = dataset.features
    if stats.feature_kind == "real":
        features = (features - stats.feature_mean) / stats.feature_std
    pred = model.predict(params, features)
    t_hat = inverse_time_transform(pred.median_time, stats)
    k = pred.posterior.shape[1]
    j = pred.latent.shape[1]
    with open(out_path, "w") as f:
        header = (
            ["row_id", "cluster"]
            + [f"p_{c}" for c in range(k)]
            + ["pred_time"]
            + [f"latent_{d}" for d in range(j)]
        )
        f.write(",".join(header) + "\n")
        for i in range(len(dataset)):
            cells = [str(i), str(int(pred.labels[i]))]
            cells += [format(v, ".17g") for v in pred.posterior[i]]
            cells.append(format(t_hat[i], ".17g"))
            cells += [format(v, ".17g") for v in pred.latent[i]]
            f.write(",".join(cells) + "\n")


def _load_predictions(path):
    with open(path) as f:
        header = f.readline().rstrip("\n").split(",")
        rows = [line.rstrip("\n").split(",") for line in f if line.strip()]
    idx = {name: i for i, name in enumerate(header)}
    for required in ("row_id", "cluster", "pred_time"):
        if required not in idx:
            raise FormatError(f"{path}: missing column {required!r}")
    row_ids = np.array([int(r[idx["row_id"]]) for r in rows])
    clusters = np.array([int(r[idx["cluster"]]) for r in rows])
    t_hat = np.array([float(r[idx["pred_time"]]) for r in rows])
    return row_ids, clusters, t_hat


def cmd_evaluate(predictions_path, data_path, out_path):
    row_ids, clusters, t_hat = _load_predictions(predictions_path)
    dataset = load_csv(data_path)
    if len(row_ids) != len(dataset) or not np.array_equal(
        row_ids, np.arange(len(dataset))
    ):
        raise FormatError(
            f"{predictions_path}: row ids do not align with {data_path} "
            f"({len(row_ids)} predictions vs {len(dataset)} rows)"
        )
    report = metrics.evaluate_predictions(
        dataset.times,
        dataset.events,
        t_hat=t_hat,
        risk=-t_hat,
        true_labels=dataset.labels,
        pred_labels=clusters if dataset.labels is not None else None,
    )
    with open(out_path, "w") as f:
        f.write(report.to_text())


def cmd_km_export(predictions_path, data_path, out_path):
    row_ids, clusters, _ = _load_predictions(predictions_path)
    dataset = load_csv(data_path)
    if len(row_ids) != len(dataset) or not np.array_equal(
        row_ids, np.arange(len(dataset))
    ):
        raise FormatError(f"{predictions_path}: row ids do not align with {data_path}")
    with open(out_path, "w") as f:
        f.write("cluster,time,survival\n")
        for c in np.unique(clusters):
            mask = clusters == c
            times, surv = metrics.kaplan_meier(dataset.times[mask], dataset.events[mask])
            for time, s in zip(times, surv):
                f.write(f"{c},{format(time, '.17g')},{format(s, '.17g')}\n")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="survmix",
        description="Survival clustering: simulate, train, predict, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a benchmark dataset")
    p.add_argument("--kind", choices=["synthetic", "survmnist"], required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train a model on a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("predict", help="predict clusters and survival times")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score predictions against a dataset")
    p.add_argument("--predictions", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("km-export", help="per-cluster Kaplan-Meier curves")
    p.add_argument("--predictions", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            cmd_simulate(args.kind, args.config, args.out, args.seed)
        elif args.command == "train":
            cmd_train(args.data, args.config, args.out, args.seed)
        elif args.command == "predict":
            cmd_predict(args.checkpoint, args.data, args.out)
        elif args.command == "evaluate":
            cmd_evaluate(args.predictions, args.data, args.out)
        elif args.command == "km-export":
            cmd_km_export(args.predictions, args.data, args.out)
    except (SurvmixError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
