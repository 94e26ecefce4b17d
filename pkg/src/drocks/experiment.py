"""Experiment runner: load, partition, run a method for several seeds, write reports."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import run_fedavg, run_frocks
from .data import find_ucr, load_ucr, partition_iid, znormalize_dataset
from .errors import InvalidConfig, UnsupportedTask
from .federation import (
    Dropout,
    FederationConfig,
    evaluate_clients,
    run_drocks,
    write_round_logs,
)
from .linreg import TrainConfig
from .metrics import CommReport, mean_ranks, survival_fraction

log = logging.getLogger(__name__)

METHODS = ("drocks", "frocks", "fedavg_raw", "fedavg_rocket")
CSV_FIELDS = ("dataset", "method", "K", "seed", "accuracy", "macro_f1")


@dataclass
class ExperimentConfig:
    dataset: Optional[str] = None  # name under the data root
    train_path: Optional[str] = None
    test_path: Optional[str] = None
    data_root: Optional[str] = None
    method: str = "drocks"
    kernels: int = 100
    clients: int = 4
    rounds: int = 100
    topology: str = "ring"
    drop_round: Optional[int] = None
    drop_clients: list = field(default_factory=list)
    repeats: int = 5
    seed: int = 0
    batch_size: int = 4
    learning_rate: float = 1e-3
    local_epochs: int = 10
    evaluate_hops: bool = True
    out: str = "results"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    def validate(self) -> None:
        if self.method not in METHODS:
            raise InvalidConfig(f"method must be one of {METHODS}")
        if not self.dataset and not (self.train_path and self.test_path):
            raise InvalidConfig("give either dataset or both train_path and test_path")
        if self.repeats < 1:
            raise InvalidConfig("repeats must be >= 1")
        if bool(self.drop_round) != bool(self.drop_clients):
            raise InvalidConfig("drop_round and drop_clients go together")

    def sha256(self) -> str:
        """Hash of every field that can change results (the output directory cannot)."""
        doc = asdict(self)
        del doc["out"]
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def federation(self, seed: int) -> FederationConfig:
        dropout = Dropout(self.drop_round, frozenset(self.drop_clients)) if self.drop_round else None
        return FederationConfig(
            n_clients=self.clients,
            n_kernels=self.kernels,
            max_rounds=self.rounds,
            topology=self.topology,
            dropout=dropout,
            train=TrainConfig(
                learning_rate=self.learning_rate,
                batch_size=self.batch_size,
                local_epochs=self.local_epochs,
            ),
            master_seed=seed,
        )

    def load_dataset(self):
        if self.train_path and self.test_path:
            ds = load_ucr(self.train_path, self.test_path, name=self.dataset)
        else:
            ds = load_ucr(*find_ucr(self.dataset, self.data_root), name=self.dataset)
        return znormalize_dataset(ds)


def run_method(method: str, fed: FederationConfig, clients, class_count: int, evaluate_hops=True):
    if method == "drocks":
        return run_drocks(fed, clients, class_count, evaluate_hops=evaluate_hops)
    if method == "frocks":
        return run_frocks(fed, clients, class_count)
    if method == "fedavg_raw":
        return run_fedavg("raw", fed, clients, class_count)
    if method == "fedavg_rocket":
        return run_fedavg("rocket_shared", fed, clients, class_count)
    raise InvalidConfig(f"unknown method {method!r}")


def run_repeat(cfg: ExperimentConfig, ds, seed: int) -> tuple[dict, object]:
    """One seeded repetition: partition, train, evaluate on every client's test split."""
    fed = cfg.federation(seed)
    clients = partition_iid(ds, cfg.clients, seed)
    result = run_method(cfg.method, fed, clients, ds.class_count, cfg.evaluate_hops)
    return evaluate_clients(result, clients, ds.class_count), result


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every repeat and write ``results.csv``, ``summary.json`` and round logs to ``cfg.out``.

    Raises on the first failing repeat after leaving a ``PARTIAL`` marker
    next to whatever was already written.
    """
    cfg.validate()
    ds = cfg.load_dataset()
    if cfg.method == "frocks" and ds.class_count != 2:
        raise UnsupportedTask(f"frocks: multiclass unsupported ({ds.class_count} classes)")
    cfg.federation(cfg.seed)  # surface config errors before any output

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.sha256()
    header = f"# config_sha256={digest} master_seed={cfg.seed}"
    marker = out / "PARTIAL"
    marker.write_text(header + "\n")

    rows, repeats = [], []
    for i in range(cfg.repeats):
        seed = cfg.seed + i
        ev, result = run_repeat(cfg, ds, seed)
        write_round_logs(result.logs, out / f"rounds_{cfg.method}_K{cfg.kernels}_seed{seed}.jsonl")
        rows.append(
            {
                "dataset": ds.name,
                "method": cfg.method,
                "K": cfg.kernels,
                "seed": seed,
                "accuracy": repr(ev["accuracy"]),
                "macro_f1": repr(ev["macro_f1"]),
            }
        )
        rep = {
            "seed": seed,
            "evaluation": ev,
            "rounds_run": result.rounds_run,
            "converged_round": result.converged_round,
            "comm": CommReport.from_logs(cfg.method, result.logs).to_dict(),
        }
        if cfg.method == "drocks":
            rep["survival_vs_first"] = survival_fraction(result.logs, "first")
            rep["survival_vs_previous"] = survival_fraction(result.logs, "previous")
        repeats.append(rep)
        log.info("%s %s seed=%d macro_f1=%.4f", ds.name, cfg.method, seed, ev["macro_f1"])

    with open(out / "results.csv", "w", newline="") as fh:
        fh.write(header + "\n")
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    f1 = np.array([r["evaluation"]["macro_f1"] for r in repeats])
    acc = np.array([r["evaluation"]["accuracy"] for r in repeats])
    summary = {
        "config_sha256": digest,
        "master_seed": cfg.seed,
        "config": asdict(cfg),
        "dataset": ds.manifest(),
        "macro_f1_mean": float(f1.mean()),
        "macro_f1_std": float(f1.std()),
        "accuracy_mean": float(acc.mean()),
        "accuracy_std": float(acc.std()),
        "repeats": repeats,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    marker.unlink()
    return summary


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def compare(paths, metric: str = "f1") -> dict:
    """Mean rank per (method, K) over the datasets every input covers."""
    column = {"f1": "macro_f1", "acc": "accuracy"}.get(metric)
    if column is None:
        raise InvalidConfig("metric must be 'f1' or 'acc'")
    scores: dict[str, dict[str, list[float]]] = {}
    for path in paths:
        for row in read_results(path):
            label = f"{row['method']}(K={row['K']})"
            scores.setdefault(label, {}).setdefault(row["dataset"], []).append(float(row[column]))
    if not scores:
        raise InvalidConfig("no result rows found")
    common = set.intersection(*(set(d) for d in scores.values()))
    if not common:
        raise InvalidConfig("the inputs share no dataset")
    table = {m: {d: float(np.mean(v[d])) for d in common} for m, v in scores.items()}
    return {"metric": column, "datasets": sorted(common), "mean_ranks": mean_ranks(table)}
