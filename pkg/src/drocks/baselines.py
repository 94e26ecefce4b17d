"""Server-based baselines: FROCKS and FedAvg over raw values or shared ROCKET features.

Both use the same client splits, local trainer and wire encoding as DROCKS,
so message and byte counts are directly comparable. Every server round costs
one upload and one download per active client.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import ClientData
from .errors import InvalidInput, UnsupportedTask
from .federation import (
    TAG_SHARED,
    TAG_SHUFFLE,
    FederatedResult,
    FederationConfig,
    HandoffMessage,
    RoundLog,
    _KernelPool,
    apply_dropout,
    converged,
    decode_handoff,
    encode_handoff,
    validate_clients,
)
from .linreg import LinearModel, fit, init_model, select_top_p
from .prng import SplitMix64, derive_seed
from .rocket import FeatureCache, KernelSet, transform

SERVER = -1


def frocks_initial_seeds(n_clients: int, n_kernels: int) -> list[list[int]]:
    """Consecutive seeding: client ``c`` (1-based) gets ``(c-1)K .. cK-1``."""
    if n_clients < 1 or n_kernels < 1:
        raise InvalidInput("need n_clients >= 1 and n_kernels >= 1")
    return [list(range(c * n_kernels, (c + 1) * n_kernels)) for c in range(n_clients)]


@dataclass
class FrocksServerState:
    seeds: list  # ascending
    weights: np.ndarray  # aligned with seeds
    counts: list  # contributors per seed
    intercept: float = 0.0

    def as_dict(self) -> dict:
        return {s: float(w) for s, w in zip(self.seeds, self.weights)}


def frocks_aggregate(selections, intercepts: Optional[Sequence[float]] = None) -> FrocksServerState:
    """Union of client selections; a seed sent by several clients gets the mean weight.

    ``selections`` is a sequence of ``(seeds, weights)`` pairs, one per
    client. Sums use ``math.fsum`` so the result does not depend on client
    order.
    """
    selections = list(selections)
    if not selections:
        raise InvalidInput("no client selections")
    sizes = {len(s) for s, _ in selections}
    if len(sizes) != 1:
        raise InvalidInput(f"clients selected different numbers of kernels: {sorted(sizes)}")
    acc: dict[int, list[float]] = {}
    for seeds, weights in selections:
        weights = np.asarray(weights, dtype=float).reshape(-1)
        if len(weights) != len(seeds):
            raise InvalidInput("seed and weight counts differ")
        for s, w in zip(seeds, weights):
            acc.setdefault(int(s), []).append(float(w))
    seeds = sorted(acc)
    weights = np.array([math.fsum(acc[s]) / len(acc[s]) for s in seeds])
    b = math.fsum(intercepts) / len(intercepts) if intercepts is not None and len(intercepts) else 0.0
    return FrocksServerState(seeds, weights, [len(acc[s]) for s in seeds], b)


def _client_seed(cfg: FederationConfig, client: int, r: int) -> int:
    return derive_seed(cfg.master_seed, TAG_SHUFFLE, client, r)


def _round_clients(cfg: FederationConfig, r: int, active: set) -> tuple[set, list]:
    active = apply_dropout(cfg, r, active)
    return active, sorted(active)


def run_frocks(
    cfg: FederationConfig,
    clients: Sequence[ClientData],
    class_count: Optional[int] = None,
) -> FederatedResult:
    """Simulate FROCKS (binary tasks only)."""
    if len(clients) != cfg.n_clients:
        raise InvalidInput(f"config expects {cfg.n_clients} clients, got {len(clients)}")
    T, C = validate_clients(clients, class_count)
    if C != 2:
        raise UnsupportedTask("FROCKS supports binary classification only (multiclass unsupported)")
    p = cfg.p
    pool = _KernelPool(T)
    caches = [FeatureCache(c.X_train) for c in clients]
    client_seeds = frocks_initial_seeds(cfg.n_clients, cfg.n_kernels)
    global_msg: Optional[HandoffMessage] = None
    active = set(range(cfg.n_clients))
    logs, converged_round = [], None

    for r in range(1, cfg.max_rounds + 1):
        active, order = _round_clients(cfg, r, active)
        entry = RoundLog(r, order)
        selections, intercepts = [], []
        for c in order:
            if global_msg is None:
                kernels = pool.get(client_seeds[c])
                start = init_model(len(kernels), C)
            else:
                # installed global weights; kernels outside the union are simply absent
                kernels = pool.get(global_msg.kernel_seeds)
                start = LinearModel(global_msg.weights.copy(), global_msg.intercepts.copy(), C)
            model = fit(
                caches[c].transform(kernels), clients[c].y_train, start,
                cfg.train.with_seed(_client_seed(cfg, c, r)),
            )
            sel, W, b = select_top_p(model, kernels, min(p, len(kernels)))
            payload = encode_handoff(HandoffMessage(r, c, sel.seeds, W, b))
            entry.messages_sent += 1
            entry.bytes_sent += len(payload)
            up = decode_handoff(payload)
            entry.selected_seeds.append(up.kernel_seeds)
            selections.append((up.kernel_seeds, up.weights[0]))
            intercepts.append(float(up.intercepts[0]))

        state = frocks_aggregate(selections, intercepts)
        payload = encode_handoff(
            HandoffMessage(r, SERVER, state.seeds, state.weights[None, :], [state.intercept])
        )
        entry.messages_sent += len(order)
        entry.bytes_sent += len(payload) * len(order)
        new_global = decode_handoff(payload)
        logs.append(entry)
        done = global_msg is not None and converged(global_msg, new_global)
        global_msg = new_global
        if done:
            entry.converged = True
            converged_round = r
            if cfg.stop_on_convergence:
                break

    kernels = pool.get(global_msg.kernel_seeds)
    model = LinearModel(global_msg.weights.copy(), global_msg.intercepts.copy(), C)
    return FederatedResult(
        model, kernels, logs, converged_round, global_msg,
        featurize=lambda X: transform(X, kernels),
    )


def fedavg_aggregate(models: Sequence[LinearModel], sizes: Sequence[int]) -> LinearModel:
    """Sample-count weighted mean of client parameters."""
    if not models or len(models) != len(sizes):
        raise InvalidInput("need one sample count per model")
    sizes = np.asarray(sizes, dtype=float)
    if sizes.sum() <= 0:
        raise InvalidInput("total sample count must be positive")
    shapes = {m.weights.shape for m in models}
    if len(shapes) != 1:
        raise InvalidInput("client models differ in shape")
    share = sizes / sizes.sum()
    W = sum(a * m.weights for a, m in zip(share, models))
    b = sum(a * m.intercepts for a, m in zip(share, models))
    return LinearModel(np.asarray(W, dtype=float), np.asarray(b, dtype=float), models[0].class_count)


FEDAVG_VARIANTS = ("raw", "rocket_shared")


def shared_kernels(master_seed: int, n_kernels: int, series_len: int) -> KernelSet:
    """The kernel set a FedAvg-RocketFeatures server broadcasts before training."""
    seeds = SplitMix64(derive_seed(master_seed, TAG_SHARED)).seeds(n_kernels)
    return KernelSet.from_seeds(seeds, series_len)


def run_fedavg(
    variant: str,
    cfg: FederationConfig,
    clients: Sequence[ClientData],
    class_count: Optional[int] = None,
) -> FederatedResult:
    """FedAvg for ``max_rounds`` rounds on raw values or on one shared ROCKET kernel set."""
    if variant not in FEDAVG_VARIANTS:
        raise InvalidInput(f"variant must be one of {FEDAVG_VARIANTS}")
    if len(clients) != cfg.n_clients:
        raise InvalidInput(f"config expects {cfg.n_clients} clients, got {len(clients)}")
    T, C = validate_clients(clients, class_count)

    if variant == "raw":
        kernels = None
        featurize = lambda X: np.asarray(X, dtype=float)  # noqa: E731
        features = [np.asarray(c.X_train, dtype=float) for c in clients]
    else:
        kernels = shared_kernels(cfg.master_seed, cfg.n_kernels, T)
        featurize = lambda X: transform(X, kernels)  # noqa: E731
        features = [transform(c.X_train, kernels) for c in clients]

    global_model = init_model(features[0].shape[1], C)
    active = set(range(cfg.n_clients))
    logs = []
    for r in range(1, cfg.max_rounds + 1):
        active, order = _round_clients(cfg, r, active)
        entry = RoundLog(r, order)
        local, sizes = [], []
        for c in order:
            m = fit(features[c], clients[c].y_train, global_model,
                    cfg.train.with_seed(_client_seed(cfg, c, r)))
            entry.messages_sent += 1
            entry.bytes_sent += len(m.to_json().encode())
            local.append(m)
            sizes.append(len(clients[c].y_train))
        global_model = fedavg_aggregate(local, sizes)
        entry.messages_sent += len(order)
        entry.bytes_sent += len(global_model.to_json().encode()) * len(order)
        logs.append(entry)

    return FederatedResult(global_model, kernels, logs, None, None, featurize=featurize)


__all__ = [
    "FrocksServerState",
    "frocks_initial_seeds",
    "frocks_aggregate",
    "run_frocks",
    "fedavg_aggregate",
    "shared_kernels",
    "run_fedavg",
]
