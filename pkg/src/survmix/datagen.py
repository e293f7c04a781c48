"""Benchmark generators, dataset I/O, and preprocessing.

Two generators are provided: a tabular benchmark whose latents follow a
Gaussian mixture with cluster-specific linear Weibull survival heads,
and a digits benchmark that attaches exponential survival times to MNIST
digit classes (with a surrogate-feature mode that needs no image files).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .dist import softplus
from .errors import ConfigError, FormatError, ShapeError


@dataclass
class SurvivalDataset:
    """Rows of (features x, time t, event flag, optional true cluster)."""

    features: np.ndarray  # (N, D)
    times: np.ndarray  # (N,)
    events: np.ndarray  # (N,) in {0, 1}
    labels: np.ndarray | None = None  # (N,) cluster indices
    feature_kind: str = "real"  # "real" | "binary"
    processed: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        self.events = np.asarray(self.events, dtype=int)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
        n = self.features.shape[0]
        if len(self.times) != n or len(self.events) != n:
            raise ShapeError("features, times, and events must have equal length")
        if np.any(self.times <= 0):
            raise ConfigError("times must be strictly positive")
        if not np.all(np.isin(self.events, (0, 1))):
            raise ConfigError("events must be 0 or 1")

    def __len__(self):
        return self.features.shape[0]

    def subset(self, idx):
        return SurvivalDataset(
            self.features[idx],
            self.times[idx],
            self.events[idx],
            None if self.labels is None else self.labels[idx],
            self.feature_kind,
            self.processed,
            {k: np.asarray(v)[idx] for k, v in self.diagnostics.items()
             if np.ndim(v) >= 1 and np.shape(v)[0] == len(self)},
        )


@dataclass
class SyntheticConfig:
    num_clusters: int = 3
    num_samples: int = 60000
    latent_dim: int = 16
    num_features: int = 1000
    weibull_shape: float = 1.0
    censoring_fraction: float = 0.3
    hidden_units: int = 32
    cov_mode: str = "full"  # "full" | "diag": latent covariance reading
    seed: int = 0

    def validate(self):
        if min(self.num_clusters, self.num_samples, self.latent_dim,
               self.num_features, self.hidden_units) < 1:
            raise ConfigError("all size parameters must be positive")
        if not 0.0 <= self.censoring_fraction < 1.0:
            raise ConfigError("censoring_fraction must be in [0, 1)")
        if self.cov_mode not in ("full", "diag"):
            raise ConfigError(f"unknown cov_mode {self.cov_mode!r}")


@dataclass
class SurvMnistConfig:
    num_clusters: int = 5
    censoring_fraction: float = 0.3
    mean_survival: float = 365.0
    seed: int = 0

    def validate(self):
        if not 1 <= self.num_clusters <= 10:
            raise ConfigError("num_clusters must be between 1 and 10 (ten digits)")
        if not 0.0 <= self.censoring_fraction < 1.0:
            raise ConfigError("censoring_fraction must be in [0, 1)")


def gen_spd(d, seed):
    """Random symmetric positive-definite matrix: A.T A / d + 0.1 I."""
    if d < 1:
        raise ConfigError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    return A.T @ A / d + 0.1 * np.eye(d)


def gen_low_rank(m, n, seed, mode="tail"):
    """m x n matrix of effective rank ceil(min(m, n) / 5).

    mode="tail" (default): random orthogonal factors with a bell-shaped
    singular-value profile plus a slowly decaying tail, so the matrix has
    low *effective* rank but keeps a full-rank spectrum and loses no
    information. mode="product": exact-rank factored product
    (1/sqrt(r)) A B with standard-normal factors.
    """
    if m < 1 or n < 1:
        raise ConfigError("dimensions must be >= 1")
    r = int(np.ceil(min(m, n) / 5))
    rng = np.random.default_rng(seed)
    if mode == "product":
        A = rng.standard_normal((m, r))
        B = rng.standard_normal((r, n))
        return A @ B / np.sqrt(r)
    if mode != "tail":
        raise ConfigError(f"unknown low-rank mode {mode!r}")
    p = min(m, n)
    U, _ = np.linalg.qr(rng.standard_normal((m, p)))
    V, _ = np.linalg.qr(rng.standard_normal((n, p)))
    idx = np.arange(p, dtype=float)
    tail_strength = 0.5
    s = (1.0 - tail_strength) * np.exp(-((idx / r) ** 2)) + tail_strength * np.exp(
        -0.1 * idx / r
    )
    return (U * s) @ V.T


def gen_synthetic(config):
    """Tabular benchmark: Gaussian-mixture latents pushed through a random
    3-layer relu map, with cluster-specific linear Weibull survival."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    K, N, J, D = (config.num_clusters, config.num_samples,
                  config.latent_dim, config.num_features)
    h = config.hidden_units

    c = rng.integers(0, K, size=N)
    mu = rng.uniform(-0.5, 0.5, size=(K, J))
    chols = []
    for ci in range(K):
        S = gen_spd(J, int(rng.integers(2**31)))
        if config.cov_mode == "diag":
            S = np.diag(np.diag(S))
        chols.append(np.linalg.cholesky(S))
    z = np.empty((N, J))
    std_normal = rng.standard_normal((N, J))
    for ci in range(K):
        mask = c == ci
        z[mask] = mu[ci] + std_normal[mask] @ chols[ci].T

    W0 = gen_low_rank(h, J, int(rng.integers(2**31)))
    W1 = gen_low_rank(h, h, int(rng.integers(2**31)))
    W2 = gen_low_rank(D, h, int(rng.integers(2**31)))
    b0 = rng.standard_normal(h)
    b1 = rng.standard_normal(h)
    b2 = rng.standard_normal(D)
    hidden = np.maximum(z @ W0.T + b0, 0.0)
    hidden = np.maximum(hidden @ W1.T + b1, 0.0)
    x = hidden @ W2.T + b2

    betas = rng.uniform(-10.0, 10.0, size=(K, J + 1))
    lam = softplus((z * betas[c, 1:]).sum(axis=1) + betas[c, 0])
    lam = np.maximum(lam, 1e-8)
    u = lam * rng.weibull(config.weibull_shape, size=N)
    u = np.maximum(u, 1e-300)
    events = (rng.random(N) >= config.censoring_fraction).astype(int)
    t = u.copy()
    censored = events == 0
    t[censored] = u[censored] * rng.uniform(size=censored.sum())
    t = np.maximum(t, np.finfo(float).tiny)

    return SurvivalDataset(
        x, t, events, labels=c, feature_kind="real",
        diagnostics={"latents": z, "event_times": u, "betas": betas,
                     "scales": lam, "mixture_means": mu,
                     "mixture_chols": np.stack(chols)},
    )


def make_surrogate_digit_features(n, seed, noise_std=0.1):
    """Stand-in for MNIST images: one-hot digit labels plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    digits = rng.integers(0, 10, size=n)
    features = np.eye(10)[digits] + noise_std * rng.standard_normal((n, 10))
    return features, digits


def gen_survmnist(config, features, digit_labels):
    """Digits benchmark: exponential survival times with digit-cluster
    specific rates; a single censoring time truncates the upper tail."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    K = config.num_clusters
    digit_labels = np.asarray(digit_labels, dtype=int)
    n = len(digit_labels)

    digits = rng.permutation(10)
    assignment = np.empty(10, dtype=int)
    assignment[digits[:K]] = np.arange(K)  # every cluster gets >= 1 digit
    assignment[digits[K:]] = rng.integers(0, K, size=10 - K)
    clusters = assignment[digit_labels]

    risk = rng.uniform(0.5, 15.0, size=K)
    rate = np.exp(risk) / config.mean_survival
    a = rng.uniform(size=n)
    a = np.where(a <= 0.0, np.finfo(float).tiny, a)
    u = -np.log(a) / rate[clusters]
    q_cens = np.quantile(u, 1.0 - config.censoring_fraction)
    t_cens = rng.uniform(u.min(), q_cens)
    events = (u <= t_cens).astype(int)
    t = np.where(events == 1, u, t_cens)

    return SurvivalDataset(
        np.asarray(features, dtype=float), t, events, labels=clusters,
        feature_kind="binary",
        diagnostics={"event_times": u, "risk_scores": risk, "rates": rate,
                     "digit_assignment": assignment, "censor_time": t_cens},
    )


def _read_exact(f, n, path, what):
    data = f.read(n)
    if len(data) != n:
        raise FormatError(
            f"{path}: truncated {what} at byte {f.tell() - len(data)}: "
            f"expected {n} bytes, got {len(data)}"
        )
    return data


def load_idx_images(path):
    """Big-endian IDX image file -> (N, rows*cols) floats in [0, 1]."""
    with open(path, "rb") as f:
        magic = struct.unpack(">I", _read_exact(f, 4, path, "magic"))[0]
        if magic != 0x00000803:
            raise FormatError(f"{path}: bad image magic 0x{magic:08x} at byte 0")
        n, rows, cols = struct.unpack(">III", _read_exact(f, 12, path, "header"))
        payload = _read_exact(f, n * rows * cols, path, "pixel payload")
    data = np.frombuffer(payload, dtype=np.uint8).astype(float) / 255.0
    return data.reshape(n, rows * cols)


def load_idx_labels(path):
    """Big-endian IDX label file -> (N,) integer labels."""
    with open(path, "rb") as f:
        magic = struct.unpack(">I", _read_exact(f, 4, path, "magic"))[0]
        if magic != 0x00000801:
            raise FormatError(f"{path}: bad label magic 0x{magic:08x} at byte 0")
        n = struct.unpack(">I", _read_exact(f, 4, path, "header"))[0]
        payload = _read_exact(f, n, path, "label payload")
    return np.frombuffer(payload, dtype=np.uint8).astype(int)


def save_csv(dataset, path):
    """Columns feature_0..feature_{D-1}, time, event[, cluster]; values
    rendered with 17 significant digits so the round trip is exact."""
    d = dataset.features.shape[1]
    header = [f"feature_{i}" for i in range(d)] + ["time", "event"]
    if dataset.labels is not None:
        header.append("cluster")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i in range(len(dataset)):
            row = [format(v, ".17g") for v in dataset.features[i]]
            row.append(format(dataset.times[i], ".17g"))
            row.append(str(int(dataset.events[i])))
            if dataset.labels is not None:
                row.append(str(int(dataset.labels[i])))
            writer.writerow(row)


def load_csv(path, feature_kind="real"):
    """Inverse of save_csv, with row-indexed validation errors."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, header row required") from None
        rows = list(reader)
    n_feat = sum(1 for h in header if h.startswith("feature_"))
    expected = [f"feature_{i}" for i in range(n_feat)] + ["time", "event"]
    has_labels = header[-1] == "cluster" if header else False
    if has_labels:
        expected.append("cluster")
    if header != expected:
        missing = [c for c in ("time", "event") if c not in header]
        if missing:
            raise FormatError(f"{path}: missing required columns {missing}")
        raise FormatError(f"{path}: unexpected header layout {header}")
    features = np.empty((len(rows), n_feat))
    times = np.empty(len(rows))
    events = np.empty(len(rows), dtype=int)
    labels = np.empty(len(rows), dtype=int) if has_labels else None
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise FormatError(f"{path}: row {i}: expected {len(header)} cells, got {len(row)}")
        try:
            features[i] = [float(v) for v in row[:n_feat]]
            times[i] = float(row[n_feat])
            event = float(row[n_feat + 1])
            if has_labels:
                labels[i] = int(row[n_feat + 2])
        except ValueError as exc:
            raise FormatError(f"{path}: row {i}: non-numeric cell ({exc})") from None
        if event not in (0.0, 1.0):
            raise FormatError(f"{path}: row {i}: event must be 0 or 1, got {event}")
        events[i] = int(event)
        if times[i] <= 0:
            raise FormatError(f"{path}: row {i}: time must be positive, got {times[i]}")
    return SurvivalDataset(features, times, events, labels, feature_kind)


@dataclass
class PreprocessStats:
    """Train-split statistics used to standardize any split."""

    max_time: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    feature_kind: str = "real"


TIME_OFFSET = 1e-3
STD_FLOOR = 1e-8


def preprocess(dataset, stats=None):
    """Map times affinely onto (0.001, 1.001] (train max -> 1.001) and
    standardize real-valued features with train statistics.

    Returns (processed dataset, stats). Passing a dataset already
    processed with the same stats is a no-op.
    """
    if dataset.processed:
        return dataset, stats
    if stats is None:
        stats = PreprocessStats(
            max_time=float(dataset.times.max()),
            feature_mean=dataset.features.mean(axis=0),
            feature_std=np.maximum(dataset.features.std(axis=0), STD_FLOOR),
            feature_kind=dataset.feature_kind,
        )
    times = TIME_OFFSET + dataset.times / stats.max_time
    if dataset.feature_kind == "real":
        features = (dataset.features - stats.feature_mean) / stats.feature_std
    else:
        features = dataset.features.copy()
    out = replace(dataset, features=features, times=times, processed=True)
    return out, stats


def inverse_time_transform(times, stats):
    """Undo the preprocessing time map (predicted times back to raw units)."""
    return (np.asarray(times, dtype=float) - TIME_OFFSET) * stats.max_time


def train_test_split(dataset, test_fraction, seed, stratify_by_time=False):
    """Seeded shuffle split; optional stratification by time quartiles."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must be in (0, 1)")
    n = len(dataset)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise ConfigError(f"degenerate split sizes for n={n}")
    rng = np.random.default_rng(seed)
    if stratify_by_time:
        quartiles = np.quantile(dataset.times, [0.25, 0.5, 0.75])
        bins = np.searchsorted(quartiles, dataset.times)
        test_idx = []
        for b in range(4):
            members = np.flatnonzero(bins == b)
            rng.shuffle(members)
            take = int(round(len(members) * test_fraction))
            test_idx.extend(members[:take])
        test_idx = np.sort(np.asarray(test_idx, dtype=int))
        mask = np.ones(n, dtype=bool)
        mask[test_idx] = False
        train_idx = np.flatnonzero(mask)
    else:
        order = rng.permutation(n)
        test_idx = np.sort(order[:n_test])
        train_idx = np.sort(order[n_test:])
    return dataset.subset(train_idx), dataset.subset(test_idx)
