"""Classification metrics, rank summaries and communication bookkeeping."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidInput


@dataclass
class MetricReport:
    accuracy: float
    macro_f1: float
    per_class_f1: list
    support: list

    def to_dict(self) -> dict:
        return asdict(self)


def confusion_matrix(y_true, y_pred, class_count: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise InvalidInput("y_true and y_pred differ in length")
    if y_true.size == 0:
        raise InvalidInput("empty label arrays")
    for arr in (y_true, y_pred):
        if arr.min() < 0 or arr.max() >= class_count:
            raise InvalidInput(f"labels must lie in 0..{class_count - 1}")
    cm = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm).astype(float)
    # 2TP / (2TP + FP + FN) equals 2PR/(P+R); 0/0 is taken as 0
    denom = cm.sum(axis=0) + cm.sum(axis=1)
    return np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def macro_f1(y_true, y_pred, class_count: int) -> float:
    """Unweighted mean of per-class F1 over all ``class_count`` classes."""
    return float(per_class_f1(confusion_matrix(y_true, y_pred, class_count)).mean())


def accuracy(y_true, y_pred) -> float:
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if y_true.size == 0:
        raise InvalidInput("empty label arrays")
    return float(np.mean(y_true == y_pred))


def evaluate(y_true, y_pred, class_count: int) -> MetricReport:
    cm = confusion_matrix(y_true, y_pred, class_count)
    f1 = per_class_f1(cm)
    return MetricReport(
        accuracy=float(np.trace(cm) / cm.sum()),
        macro_f1=float(f1.mean()),
        per_class_f1=f1.tolist(),
        support=cm.sum(axis=1).tolist(),
    )


def mean_ranks(method_scores: dict) -> dict:
    """Mean rank per method over datasets; rank 1 is the highest score.

    ``method_scores`` maps method -> {dataset: score}. Ties share the average rank.
    """
    methods = sorted(method_scores)
    if not methods:
        raise InvalidInput("no methods given")
    datasets = set(method_scores[methods[0]])
    for m in methods:
        if set(method_scores[m]) != datasets:
            raise InvalidInput(f"method {m!r} is not scored on every dataset")
    if not datasets:
        raise InvalidInput("no datasets given")
    table = np.array([[method_scores[m][d] for m in methods] for d in sorted(datasets)], dtype=float)
    ranks = rankdata(-table, axis=1, method="average")
    return dict(zip(methods, ranks.mean(axis=0).tolist()))


def survival_fraction(round_logs, baseline: str = "first") -> list[float]:
    """Share of each round's final handoff seeds already present in the reference round.

    ``baseline="first"`` compares against round 1, ``"previous"`` against the
    round before.
    """
    if baseline not in ("first", "previous"):
        raise InvalidInput("baseline must be 'first' or 'previous'")
    sets = [set(log.final_seeds) for log in round_logs]
    if not sets:
        raise InvalidInput("no rounds logged")
    out = []
    for r, cur in enumerate(sets):
        ref = sets[0] if baseline == "first" else sets[max(r - 1, 0)]
        out.append(len(cur & ref) / len(cur) if cur else 1.0)
    return out


@dataclass
class CommReport:
    method: str
    messages_per_round: list = field(default_factory=list)
    bytes_per_round: list = field(default_factory=list)

    @classmethod
    def from_logs(cls, method: str, round_logs) -> "CommReport":
        return cls(
            method,
            [log.messages_sent for log in round_logs],
            [log.bytes_sent for log in round_logs],
        )

    @property
    def total_messages(self) -> int:
        return sum(self.messages_per_round)

    @property
    def total_bytes(self) -> int:
        return sum(self.bytes_per_round)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(total_messages=self.total_messages, total_bytes=self.total_bytes)
        return d
