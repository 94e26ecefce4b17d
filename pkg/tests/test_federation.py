import itertools
import json
from collections import Counter

import numpy as np
import pytest

from drocks.data import ClientData, partition_iid
from drocks.errors import InvalidConfig, InvalidInput, ProtocolError
from drocks.federation import (
    Dropout,
    FederationConfig,
    HandoffMessage,
    apply_dropout,
    converged,
    decode_handoff,
    encode_handoff,
    evaluate_clients,
    next_client,
    round_order,
    run_drocks,
    write_round_logs,
)
from drocks.linreg import TrainConfig, fit, init_model, predict
from drocks.metrics import macro_f1
from drocks.prng import SplitMix64
from drocks.rocket import KernelSet, transform

from .conftest import sign_of_mean_dataset


def msg(seeds, weights, round=1, sender=0):
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    return HandoffMessage(round, sender, seeds, w, np.zeros(w.shape[0]))


# --- convergence ------------------------------------------------------------

def test_converged_examples():
    a = msg([1, 2, 3], [0.5, -1.0, 2.0])
    assert converged(a, msg([1, 2, 3], [0.5, -1.0, 2.0]))
    assert not converged(a, msg([1, 2, 3], [1.5, -1.0, 2.0]))
    assert converged(a, msg([1, 2, 3], np.array([0.5, -1.0, 2.0]) + 1e-9))


def test_converged_aligns_by_seed_and_needs_equal_sets():
    a = msg([1, 2, 3], [0.5, -1.0, 2.0])
    assert converged(a, msg([3, 1, 2], [2.0, 0.5, -1.0]))
    assert not converged(a, msg([1, 2, 4], [0.5, -1.0, 2.0]))


# --- topology and dropout ---------------------------------------------------

def test_ring_successor():
    assert next_client("ring", 0, {0, 1, 2, 3}, 3) == 0
    assert next_client("ring", 0, {0, 1, 3}, 1) == 3
    assert next_client("ring", 0, {0, 1, 3}, 2) == 3


def test_random_permutations_uniform():
    rounds = 10_000
    counts = Counter()
    for r in range(rounds):
        order = round_order("random", {0, 1, 2, 3}, r)
        assert sorted(order) == [0, 1, 2, 3]
        counts[tuple(order)] += 1
    assert len(counts) == 24
    for perm in itertools.permutations(range(4)):
        assert abs(counts[perm] / rounds - 1 / 24) <= 0.01


def test_random_next_client_follows_round_order():
    order = round_order("random", {0, 1, 2, 3}, 42)
    for i, c in enumerate(order):
        assert next_client("random", 42, {0, 1, 2, 3}, c) == order[(i + 1) % 4]


def test_apply_dropout():
    plain = FederationConfig(4, 100)
    assert all(apply_dropout(plain, r, {0, 1, 2, 3}) == {0, 1, 2, 3} for r in range(1, 20))
    cfg = FederationConfig(4, 100, dropout=Dropout(5, {3}))
    assert [len(apply_dropout(cfg, r, range(4))) for r in range(1, 8)] == [4, 4, 4, 4, 3, 3, 3]
    half = FederationConfig(4, 100, dropout=Dropout(5, {2, 3}))
    assert apply_dropout(half, 5, range(4)) == {0, 1}


def test_config_validation():
    assert FederationConfig(4, 100).p == 25
    assert FederationConfig(3, 100).p == 33
    with pytest.raises(InvalidConfig):
        FederationConfig(4, 3)
    with pytest.raises(InvalidConfig):
        FederationConfig(0, 3)
    with pytest.raises(InvalidConfig):
        FederationConfig(4, 100, max_rounds=0)
    with pytest.raises(InvalidConfig):
        FederationConfig(4, 100, topology="star")
    with pytest.raises(InvalidConfig):
        FederationConfig(2, 100, dropout=Dropout(5, {0, 1}))
    with pytest.raises(InvalidConfig):
        Dropout(0, {1})


# --- wire format ------------------------------------------------------------

def random_message(rng, p, rows):
    seeds = SplitMix64(int(rng.integers(0, 2**63))).seeds(p)
    return HandoffMessage(
        int(rng.integers(1, 100)), int(rng.integers(0, 8)), seeds,
        rng.normal(size=(rows, p)), rng.normal(size=rows),
    )


def test_handoff_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = random_message(rng, int(rng.integers(1, 40)), int(rng.choice([1, 3, 5])))
        assert decode_handoff(encode_handoff(m)) == m


def test_handoff_schema():
    doc = json.loads(encode_handoff(msg([2**64 - 1, 5], [1.0, 2.0])))
    assert set(doc) == {"round", "sender", "kernel_seeds", "weights", "intercepts"}
    assert int(doc["kernel_seeds"][0]) == 2**64 - 1


@pytest.mark.parametrize(
    "payload",
    [
        None,  # truncated, filled in below
        b"[]",
        b'{"round":1}',
        b'{"round":1,"sender":0,"kernel_seeds":["1","2"],"weights":[[1.0]],"intercepts":[0.0]}',
        b'{"round":1,"sender":0,"kernel_seeds":["1","1"],"weights":[[1.0,2.0]],"intercepts":[0.0]}',
        b'{"round":1,"sender":0,"kernel_seeds":["-1"],"weights":[[1.0]],"intercepts":[0.0]}',
    ],
)
def test_malformed_handoff(payload):
    if payload is None:
        full = encode_handoff(msg([1, 2, 3], [1.0, 2.0, 3.0]))
        payload = full[: len(full) // 2]
    with pytest.raises(ProtocolError):
        decode_handoff(payload)


def test_handoff_size_independent_of_k():
    """A p=25 binary handoff sent during a K=100 and a K=1000 run has the same shape."""
    ds = sign_of_mean_dataset(n_train=40, n_test=8)
    sizes = {}
    for K, N in ((100, 4), (1000, 40)):
        clients = partition_iid(ds, N, 0)
        res = run_drocks(FederationConfig(N, K, max_rounds=1, train=TrainConfig(local_epochs=1)),
                         clients, evaluate_hops=False)
        assert len(res.handoff.kernel_seeds) == 25
        assert res.handoff.weights.shape == (1, 25) and res.handoff.intercepts.shape == (1,)
        sizes[K] = res.logs[0].bytes_sent / res.logs[0].messages_sent
    # only digits of seeds and floats vary; nothing scales with K
    assert abs(sizes[100] - sizes[1000]) < 0.1 * sizes[100]


# --- protocol ---------------------------------------------------------------

def test_single_client_self_loop(sign_of_mean):
    clients = partition_iid(sign_of_mean, 1, 0)
    res = run_drocks(FederationConfig(1, 20, max_rounds=3), clients, evaluate_hops=False)
    for log in res.logs:
        assert log.visiting_order == [0] and log.messages_sent == 1
        assert len(log.final_seeds) == 20


def test_handoff_sizes_and_kernel_counts(sign_clients):
    seen = []

    def fresh(client, r, count, exclude):
        seen.append(count)
        return SplitMix64(client * 1000 + r).seeds(count, exclude)

    cfg = FederationConfig(4, 100, max_rounds=3, topology="random")
    res = run_drocks(cfg, sign_clients, fresh_seeds=fresh, evaluate_hops=False)
    assert seen == [75] * 12  # K - p fresh per hop, so every fit sees 25 + 75 kernels
    assert len(res.kernels) == 100
    for log in res.logs:
        assert sorted(log.visiting_order) == [0, 1, 2, 3]
        assert log.messages_sent == 4
        for seeds in log.selected_seeds:
            assert len(seeds) == 25 == len(set(seeds))


def test_sign_of_mean_centralised_oracle(sign_of_mean):
    ds = sign_of_mean
    kernels = KernelSet.from_seeds(range(100), ds.series_length)
    # same epoch budget the federation gets over 10 rounds
    model = fit(transform(ds.X_train, kernels), ds.y_train, init_model(100, 2),
                TrainConfig(local_epochs=100))
    assert macro_f1(ds.y_test, predict(transform(ds.X_test, kernels), model), 2) > 0.95


def test_sign_of_mean_federated(sign_of_mean, sign_clients):
    res = run_drocks(FederationConfig(4, 100, max_rounds=10), sign_clients, evaluate_hops=False)
    assert res.rounds_run <= 10
    ev = evaluate_clients(res, sign_clients, 2)
    assert ev["macro_f1"] > 0.95
    assert ev["pooled"]["macro_f1"] > 0.95


def test_multiclass_runs(three_class):
    clients = partition_iid(three_class, 3, 0)
    res = run_drocks(FederationConfig(3, 60, max_rounds=5), clients)
    assert res.model.weights.shape == (3, 60)
    assert res.handoff.weights.shape == (3, 20)
    assert len(res.logs[0].client_metrics) == 3


def test_inconsistent_clients_rejected(sign_clients):
    other = partition_iid(sign_of_mean_dataset(length=30), 4, 0)
    with pytest.raises(InvalidInput):
        run_drocks(FederationConfig(4, 40), sign_clients[:3] + other[:1])
    with pytest.raises(InvalidInput):
        run_drocks(FederationConfig(3, 40), sign_clients)


def test_deterministic(sign_clients, tmp_path):
    cfg = FederationConfig(4, 40, max_rounds=4, topology="random", master_seed=9)
    a, b = run_drocks(cfg, sign_clients), run_drocks(cfg, sign_clients)
    write_round_logs(a.logs, tmp_path / "a.jsonl")
    write_round_logs(b.logs, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert np.array_equal(a.model.weights, b.model.weights)
    assert a.kernels.seeds == b.kernels.seeds


def test_convergence_latch_with_frozen_state(sign_of_mean):
    X, y = sign_of_mean.X_train[:4], sign_of_mean.y_train[:4]
    clients = [ClientData(X, y, X, y) for _ in range(4)]
    cfg = FederationConfig(4, 40, max_rounds=100, train=TrainConfig(local_epochs=0))
    fixed = lambda client, r, count, exclude: [s for s in range(1000, 2000) if s not in exclude][:count]  # noqa: E731
    res = run_drocks(cfg, clients, 2, fresh_seeds=fixed, evaluate_hops=False)
    assert res.converged_round == 2 and res.rounds_run == 2
    assert res.logs[-1].converged


def test_never_exceeds_max_rounds(sign_clients):
    cfg = FederationConfig(4, 20, max_rounds=7, stop_on_convergence=False)
    assert run_drocks(cfg, sign_clients, evaluate_hops=False).rounds_run == 7


def test_dropped_clients_leave_order_but_stay_in_evaluation(sign_clients):
    cfg = FederationConfig(4, 40, max_rounds=8, topology="random", dropout=Dropout(5, {2, 3}),
                           stop_on_convergence=False)
    res = run_drocks(cfg, sign_clients, evaluate_hops=False)
    for log in res.logs:
        expected = {0, 1, 2, 3} if log.round < 5 else {0, 1}
        assert set(log.visiting_order) == expected
        assert log.messages_sent == len(expected)
    assert len(evaluate_clients(res, sign_clients, 2)["per_client"]) == 4


def test_round_log_jsonl(sign_clients, tmp_path):
    res = run_drocks(FederationConfig(4, 20, max_rounds=2), sign_clients)
    path = tmp_path / "log.jsonl"
    write_round_logs(res.logs, path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["round"] for r in rows] == [1, 2]
    assert {"visiting_order", "selected_seeds", "client_metrics", "messages_sent", "bytes_sent"} <= set(rows[0])
