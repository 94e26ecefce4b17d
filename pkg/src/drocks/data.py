"""UCR TSV ingestion, z-normalisation and stratified client partitioning."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidConfig, UnsupportedDataset

log = logging.getLogger(__name__)

DATA_ROOT_ENV = "DROCKS_DATA_ROOT"


@dataclass
class Dataset:
    name: str
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    label_map: dict = field(default_factory=dict)  # original label string -> encoded int

    @property
    def class_count(self) -> int:
        return len(self.label_map) if self.label_map else int(
            max(self.y_train.max(initial=-1), self.y_test.max(initial=-1)) + 1
        )

    @property
    def series_length(self) -> int:
        return self.X_train.shape[1]

    def manifest(self) -> dict:
        return {
            "name": self.name,
            "series_length": self.series_length,
            "class_count": self.class_count,
            "label_map": self.label_map,
            "n_train": int(len(self.y_train)),
            "n_test": int(len(self.y_test)),
        }


@dataclass
class ClientData:
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


def _read_tsv(path):
    labels, rows = [], []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.replace(",", "\t").split()
            if len(parts) < 2:
                raise FormatError(f"{path}:{lineno}: need a label and at least one value")
            if width is None:
                width = len(parts) - 1
            elif len(parts) - 1 != width:
                raise FormatError(
                    f"{path}:{lineno}: {len(parts) - 1} values, expected {width}"
                )
            try:
                values = [float(v) for v in parts[1:]]
            except ValueError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from None
            if not all(math.isfinite(v) for v in values):
                raise UnsupportedDataset(f"{path}:{lineno}: missing or non-finite values")
            labels.append(parts[0])
            rows.append(values)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return labels, np.array(rows)


def _label_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def load_ucr(path_train, path_test, name: str | None = None) -> Dataset:
    """Load a UCR train/test TSV pair; labels re-encoded by sorted original value."""
    tr_labels, X_train = _read_tsv(path_train)
    te_labels, X_test = _read_tsv(path_test)
    if X_test.shape[1] != X_train.shape[1]:
        raise FormatError(
            f"test length {X_test.shape[1]} != train length {X_train.shape[1]}"
        )
    classes = sorted(set(tr_labels), key=_label_key)
    label_map = {c: i for i, c in enumerate(classes)}
    unseen = set(te_labels) - set(classes)
    if unseen:
        raise FormatError(f"test labels not present in train: {sorted(unseen)}")
    if name is None:
        name = Path(path_train).stem.removesuffix("_TRAIN")
    return Dataset(
        name,
        X_train,
        np.array([label_map[c] for c in tr_labels]),
        X_test,
        np.array([label_map[c] for c in te_labels]),
        label_map,
    )


def find_ucr(name: str, root=None) -> tuple[Path, Path]:
    """Locate ``<root>/<name>/<name>_{TRAIN,TEST}.tsv``; root defaults to $DROCKS_DATA_ROOT."""
    root = root or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise FileNotFoundError(f"no dataset root given and ${DATA_ROOT_ENV} is unset")
    base = Path(root) / name
    paths = base / f"{name}_TRAIN.tsv", base / f"{name}_TEST.tsv"
    for p in paths:
        if not p.is_file():
            raise FileNotFoundError(p)
    return paths


def znormalize(x, eps: float = 1e-8) -> np.ndarray:
    """Per-series zero mean, unit population std; near-constant series map to zeros.

    Works on a single series or row-wise on a 2-D panel.
    """
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, keepdims=True)
    safe = np.where(sd < eps, 1.0, sd)
    return np.where(sd < eps, 0.0, (x - mu) / safe)


def znormalize_dataset(ds: Dataset) -> Dataset:
    return Dataset(
        ds.name, znormalize(ds.X_train), ds.y_train, znormalize(ds.X_test), ds.y_test,
        dict(ds.label_map),
    )


def _deal(y: np.ndarray, n_clients: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle each class and deal it round-robin.

    The dealing offset carries over between classes so client sizes stay
    within one sample of each other.
    """
    buckets = [[] for _ in range(n_clients)]
    offset = 0
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        for j, i in enumerate(idx):
            buckets[(offset + j) % n_clients].append(i)
        offset = (offset + len(idx)) % n_clients
    return [np.sort(np.array(b, dtype=int)) for b in buckets]


def partition_iid(ds: Dataset, n_clients: int, seed: int) -> list[ClientData]:
    """Stratified split of both train and test sets across ``n_clients``."""
    if n_clients < 1:
        raise InvalidConfig("need at least one client")
    if n_clients > len(ds.y_train):
        raise InvalidConfig(f"{n_clients} clients but only {len(ds.y_train)} train samples")
    counts = np.bincount(ds.y_train)
    if counts[counts > 0].min() < n_clients:
        log.warning("some class has fewer than %d train samples; clients may miss it", n_clients)
    rng = np.random.default_rng([seed, n_clients])
    tr = _deal(ds.y_train, n_clients, rng)
    te = _deal(ds.y_test, n_clients, rng)
    return [
        ClientData(ds.X_train[a], ds.y_train[a], ds.X_test[b], ds.y_test[b])
        for a, b in zip(tr, te)
    ]
