"""DROCKS: a single linear model travels client to client over ROCKET features.

Each visited client combines the ``p`` kernels it received with ``K - p``
fresh ones, warm-start fits the model on its local data, keeps the ``p``
kernels with the largest squared weights and hands those (seeds only) plus
their weight columns to its successor.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .data import ClientData
from .errors import InvalidConfig, InvalidInput, ProtocolError
from .linreg import LinearModel, TrainConfig, fit, predict, select_top_p
from .metrics import evaluate
from .prng import MASK64, SplitMix64, derive_seed
from .rocket import FeatureCache, Kernel, KernelSet, generate_kernels, transform

log = logging.getLogger(__name__)

# stream tags mixed into derive_seed so independent uses never share a stream
TAG_INIT, TAG_FRESH, TAG_ORDER, TAG_SHUFFLE, TAG_SHARED = 1, 2, 3, 4, 5

# convergence tolerance on consecutive handoff weights: |a - b| <= ATOL + RTOL * |b|
ATOL, RTOL = 1e-8, 1e-5

TOPOLOGIES = ("ring", "random")


@dataclass(frozen=True)
class Dropout:
    """Clients removed from the visiting order from ``round`` (1-based) onwards."""

    round: int
    clients: frozenset

    def __post_init__(self):
        if self.round < 1:
            raise InvalidConfig("dropout round must be >= 1")
        object.__setattr__(self, "clients", frozenset(int(c) for c in self.clients))


@dataclass(frozen=True)
class FederationConfig:
    n_clients: int
    n_kernels: int
    max_rounds: int = 100
    topology: str = "ring"
    dropout: Optional[Dropout] = None
    train: TrainConfig = field(default_factory=TrainConfig)
    master_seed: int = 0
    stop_on_convergence: bool = True

    def __post_init__(self):
        if self.n_clients < 1:
            raise InvalidConfig("n_clients must be >= 1")
        if self.n_kernels < self.n_clients:
            raise InvalidConfig(
                f"n_kernels={self.n_kernels} < n_clients={self.n_clients} gives p = 0"
            )
        if self.max_rounds < 1:
            raise InvalidConfig("max_rounds must be >= 1")
        if self.topology not in TOPOLOGIES:
            raise InvalidConfig(f"topology must be one of {TOPOLOGIES}")
        if self.dropout is not None:
            bad = [c for c in self.dropout.clients if not 0 <= c < self.n_clients]
            if bad:
                raise InvalidConfig(f"dropout names unknown clients {bad}")
            if len(self.dropout.clients) >= self.n_clients:
                raise InvalidConfig("dropout would remove every client")

    @property
    def p(self) -> int:
        return self.n_kernels // self.n_clients


@dataclass
class HandoffMessage:
    round: int
    sender: int
    kernel_seeds: list
    weights: np.ndarray  # (C_eff, p), column j belongs to kernel_seeds[j]
    intercepts: np.ndarray

    def __post_init__(self):
        self.kernel_seeds = [int(s) for s in self.kernel_seeds]
        self.weights = np.asarray(self.weights, dtype=float)
        self.intercepts = np.asarray(self.intercepts, dtype=float)

    def __eq__(self, other):
        if not isinstance(other, HandoffMessage):
            return NotImplemented
        return (
            self.round == other.round
            and self.sender == other.sender
            and self.kernel_seeds == other.kernel_seeds
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.intercepts, other.intercepts)
        )


def encode_handoff(msg: HandoffMessage) -> bytes:
    """Canonical compact JSON. Seeds are decimal strings so 64-bit values survive any JSON reader."""
    doc = {
        "round": int(msg.round),
        "sender": int(msg.sender),
        "kernel_seeds": [str(s) for s in msg.kernel_seeds],
        "weights": msg.weights.tolist(),
        "intercepts": msg.intercepts.tolist(),
    }
    return json.dumps(doc, separators=(",", ":")).encode()


def decode_handoff(payload: bytes) -> HandoffMessage:
    try:
        doc = json.loads(payload)
    except (ValueError, UnicodeDecodeError) as e:
        raise ProtocolError(f"malformed handoff payload: {e}") from None
    if not isinstance(doc, dict):
        raise ProtocolError("handoff payload is not a JSON object")
    missing = {"round", "sender", "kernel_seeds", "weights", "intercepts"} - set(doc)
    if missing:
        raise ProtocolError(f"handoff missing fields {sorted(missing)}")
    try:
        seeds = [int(s) for s in doc["kernel_seeds"]]
        weights = np.array(doc["weights"], dtype=float)
        intercepts = np.array(doc["intercepts"], dtype=float)
        rnd, sender = int(doc["round"]), int(doc["sender"])
    except (TypeError, ValueError) as e:
        raise ProtocolError(f"bad handoff field: {e}") from None
    if any(not 0 <= s <= MASK64 for s in seeds):
        raise ProtocolError("kernel seed outside the 64-bit range")
    if len(set(seeds)) != len(seeds):
        raise ProtocolError("duplicate kernel seeds")
    if weights.ndim != 2 or weights.shape[1] != len(seeds):
        raise ProtocolError(
            f"weights shape {weights.shape} does not match {len(seeds)} seeds"
        )
    if intercepts.shape != (weights.shape[0],):
        raise ProtocolError("intercepts do not match weight rows")
    return HandoffMessage(rnd, sender, seeds, weights, intercepts)


def converged(prev: HandoffMessage, cur: HandoffMessage) -> bool:
    """Same seed set, and every aligned weight within ``ATOL + RTOL * |cur|``."""
    if set(prev.kernel_seeds) != set(cur.kernel_seeds):
        return False
    if prev.weights.shape != cur.weights.shape:
        return False
    pos = {s: j for j, s in enumerate(prev.kernel_seeds)}
    aligned = prev.weights[:, [pos[s] for s in cur.kernel_seeds]]
    return bool(np.all(np.abs(aligned - cur.weights) <= ATOL + RTOL * np.abs(cur.weights)))


def round_order(topology: str, active, round_order_seed: int) -> list[int]:
    """Visiting order for one round: sorted ids for a ring, a seeded permutation otherwise."""
    clients = sorted(active)
    if not clients:
        raise InvalidInput("no active clients")
    if topology == "ring":
        return clients
    if topology == "random":
        rng = np.random.default_rng(round_order_seed)
        return [clients[i] for i in rng.permutation(len(clients))]
    raise InvalidInput(f"unknown topology {topology!r}")


def next_client(topology: str, round_order_seed: int, active, current: int) -> int:
    """Successor of ``current`` within the round's order, wrapping at the end.

    ``current`` need not be active itself (e.g. it was just dropped); the
    ring then continues with the next larger active id.
    """
    order = round_order(topology, active, round_order_seed)
    if current in order:
        return order[(order.index(current) + 1) % len(order)]
    if topology == "ring":
        later = [c for c in order if c > current]
        return later[0] if later else order[0]
    return order[0]


def apply_dropout(cfg: FederationConfig, round: int, active) -> set:
    active = set(active)
    if cfg.dropout is not None and round >= cfg.dropout.round:
        active -= cfg.dropout.clients
    if not active:
        raise InvalidConfig(f"no clients left at round {round}")
    return active


@dataclass
class RoundLog:
    round: int
    visiting_order: list
    selected_seeds: list = field(default_factory=list)  # one seed list per hop
    client_metrics: list = field(default_factory=list)  # one dict per hop
    messages_sent: int = 0
    bytes_sent: int = 0
    converged: bool = False

    @property
    def final_seeds(self) -> list:
        return self.selected_seeds[-1] if self.selected_seeds else []

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "visiting_order": list(self.visiting_order),
            "selected_seeds": [[str(s) for s in hop] for hop in self.selected_seeds],
            "client_metrics": self.client_metrics,
            "messages_sent": self.messages_sent,
            "bytes_sent": self.bytes_sent,
            "converged": self.converged,
        }


def write_round_logs(logs: Sequence[RoundLog], path) -> None:
    with open(path, "w") as fh:
        for entry in logs:
            fh.write(json.dumps(entry.to_dict(), separators=(",", ":")) + "\n")


@dataclass
class FederatedResult:
    model: LinearModel
    kernels: Optional[KernelSet]
    logs: list
    converged_round: Optional[int] = None
    handoff: Optional[HandoffMessage] = None
    featurize: Optional[Callable] = None

    @property
    def rounds_run(self) -> int:
        return len(self.logs)

    def predict(self, X) -> np.ndarray:
        return predict(self.featurize(X), self.model)


def validate_clients(clients: Sequence[ClientData], class_count: Optional[int] = None) -> tuple[int, int]:
    """Common series length and class count of a federation's data."""
    if not clients:
        raise InvalidInput("no client data")
    lengths = {c.X_train.shape[1] for c in clients} | {
        c.X_test.shape[1] for c in clients if len(c.X_test)
    }
    if len(lengths) != 1:
        raise InvalidInput(f"clients disagree on series length: {sorted(lengths)}")
    labels = np.concatenate([np.concatenate([c.y_train, c.y_test]) for c in clients])
    if class_count is None:
        class_count = max(int(labels.max()) + 1, 2)
    if labels.min() < 0 or labels.max() >= class_count:
        raise InvalidInput(f"labels outside 0..{class_count - 1}")
    return lengths.pop(), class_count


FreshSeedFn = Callable[[int, int, int, set], list]


def default_fresh_seeds(master_seed: int) -> FreshSeedFn:
    """Client ``c`` at round ``r`` draws from the stream ``derive_seed(master, TAG_FRESH, c, r)``."""

    def draw(client: int, round: int, count: int, exclude: set) -> list:
        return SplitMix64(derive_seed(master_seed, TAG_FRESH, client, round)).seeds(count, exclude)

    return draw


class _KernelPool:
    """Seed -> Kernel memo for one series length (the simulator's stand-in for regeneration)."""

    def __init__(self, series_len: int):
        self.series_len = series_len
        self._pool: dict[int, Kernel] = {}

    def get(self, seeds) -> KernelSet:
        seeds = list(seeds)
        missing = [s for s in seeds if s not in self._pool]
        for k in generate_kernels(missing, self.series_len):
            self._pool[k.seed] = k
        return KernelSet([self._pool[s] for s in seeds], self.series_len)


def run_drocks(
    cfg: FederationConfig,
    clients: Sequence[ClientData],
    class_count: Optional[int] = None,
    fresh_seeds: Optional[FreshSeedFn] = None,
    evaluate_hops: bool = True,
) -> FederatedResult:
    """Simulate DROCKS; the returned model is the last visited client's full-K model."""
    if len(clients) != cfg.n_clients:
        raise InvalidInput(f"config expects {cfg.n_clients} clients, got {len(clients)}")
    T, C = validate_clients(clients, class_count)
    K, p = cfg.n_kernels, cfg.p
    rows = 1 if C == 2 else C
    fresh_seeds = fresh_seeds or default_fresh_seeds(cfg.master_seed)
    pool = _KernelPool(T)
    train_cache = [FeatureCache(c.X_train) for c in clients]

    received = HandoffMessage(
        0, -1,
        SplitMix64(derive_seed(cfg.master_seed, TAG_INIT)).seeds(p),
        np.zeros((rows, p)),
        np.zeros(rows),
    )
    active = set(range(cfg.n_clients))
    logs: list[RoundLog] = []
    prev_end = None
    model = kernels = None
    converged_round = None

    for r in range(1, cfg.max_rounds + 1):
        active = apply_dropout(cfg, r, active)
        order = round_order(cfg.topology, active, derive_seed(cfg.master_seed, TAG_ORDER, r))
        entry = RoundLog(r, order)
        for c in order:
            new = fresh_seeds(c, r, K - p, set(received.kernel_seeds))
            kernels = pool.get(list(received.kernel_seeds) + list(new))
            if len(kernels) != K:
                raise InvalidInput(f"client {c} assembled {len(kernels)} kernels, expected {K}")
            start = LinearModel(
                np.hstack([received.weights, np.zeros((rows, K - p))]),
                received.intercepts.copy(),
                C,
            )
            data = clients[c]
            features = train_cache[c].transform(kernels)
            model = fit(
                features, data.y_train, start,
                cfg.train.with_seed(derive_seed(cfg.master_seed, TAG_SHUFFLE, c, r)),
            )
            sel, W, b = select_top_p(model, kernels, p)
            payload = encode_handoff(HandoffMessage(r, c, sel.seeds, W, b))
            entry.messages_sent += 1
            entry.bytes_sent += len(payload)
            received = decode_handoff(payload)
            entry.selected_seeds.append(received.kernel_seeds)
            if evaluate_hops and len(data.y_test):
                rep = evaluate(data.y_test, predict(transform(data.X_test, kernels), model), C)
                entry.client_metrics.append(
                    {"client": c, "accuracy": rep.accuracy, "macro_f1": rep.macro_f1}
                )
        logs.append(entry)
        if prev_end is not None and converged(prev_end, received):
            entry.converged = True
            converged_round = r
            log.info("DROCKS converged at round %d", r)
            if cfg.stop_on_convergence:
                break
        prev_end = received

    final_kernels = kernels
    return FederatedResult(
        model, final_kernels, logs, converged_round, received,
        featurize=lambda X: transform(X, final_kernels),
    )


def evaluate_clients(result: FederatedResult, clients: Sequence[ClientData], class_count: int) -> dict:
    """Evaluate the final model on every client's test split (dropped clients included).

    Returns per-client reports, their mean (the headline numbers) and the
    metrics on the pooled union of all test splits.
    """
    per_client, y_all, p_all = [], [], []
    for c in clients:
        if not len(c.y_test):
            continue
        pred = result.predict(c.X_test)
        per_client.append(evaluate(c.y_test, pred, class_count))
        y_all.append(c.y_test)
        p_all.append(pred)
    pooled = evaluate(np.concatenate(y_all), np.concatenate(p_all), class_count)
    return {
        "per_client": [r.to_dict() for r in per_client],
        "macro_f1": float(np.mean([r.macro_f1 for r in per_client])),
        "accuracy": float(np.mean([r.accuracy for r in per_client])),
        "pooled": pooled.to_dict(),
    }
