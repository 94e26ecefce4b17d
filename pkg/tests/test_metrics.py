import itertools

import numpy as np
import pytest

from drocks.errors import InvalidInput
from drocks.federation import RoundLog
from drocks.metrics import CommReport, accuracy, evaluate, macro_f1, mean_ranks, survival_fraction


def oracle_macro_f1(y_true, y_pred, C):
    """Per-class precision/recall from explicit counting."""
    f1s = []
    for c in range(C):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return sum(f1s) / C


def test_macro_f1_examples():
    assert macro_f1([0, 1, 2, 1], [0, 1, 2, 1], 3) == 1.0
    assert macro_f1([0, 0, 1, 1], [0, 0, 0, 0], 2) == pytest.approx(1 / 3, abs=1e-4)
    with pytest.raises(InvalidInput):
        macro_f1([], [], 2)
    with pytest.raises(InvalidInput):
        macro_f1([0, 3], [0, 1], 3)


def test_macro_f1_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(500):
        C = int(rng.integers(2, 6))
        n = int(rng.integers(1, 40))
        t, p = rng.integers(0, C, n), rng.integers(0, C, n)
        assert macro_f1(t, p, C) == pytest.approx(oracle_macro_f1(t, p, C), abs=1e-12)
        rep = evaluate(t, p, C)
        assert 0 <= rep.macro_f1 <= 1 and 0 <= rep.accuracy <= 1
        assert rep.accuracy == accuracy(t, p)
        assert rep.macro_f1 == pytest.approx(np.mean(rep.per_class_f1))
        assert sum(rep.support) == n


def test_diagonal_confusion_gives_equal_scores():
    y = [0, 1, 2, 2, 1]
    rep = evaluate(y, y, 3)
    assert rep.macro_f1 == rep.accuracy == 1.0


def test_mean_ranks_examples():
    assert mean_ranks({"A": {"d1": 0.9, "d2": 0.8}, "B": {"d1": 0.5, "d2": 0.1}}) == {"A": 1.0, "B": 2.0}
    r = mean_ranks({"A": {"d1": 0.7}, "B": {"d1": 0.7}})
    assert r == {"A": 1.5, "B": 1.5}
    with pytest.raises(InvalidInput):
        mean_ranks({"A": {"d1": 0.1}, "B": {"d2": 0.2}})


def oracle_ranks(table):
    """Average ranks by explicit sorting and grouping of ties."""
    methods = list(table)
    datasets = list(table[methods[0]])
    total = {m: 0.0 for m in methods}
    for d in datasets:
        ordered = sorted(methods, key=lambda m: -table[m][d])
        pos = 0
        for _, grp in itertools.groupby(ordered, key=lambda m: table[m][d]):
            grp = list(grp)
            avg = sum(range(pos + 1, pos + len(grp) + 1)) / len(grp)
            for m in grp:
                total[m] += avg
            pos += len(grp)
    return {m: total[m] / len(datasets) for m in methods}


def test_mean_ranks_matches_oracle_and_conserves_rank_mass():
    rng = np.random.default_rng(1)
    for _ in range(200):
        table = {m: {f"d{i}": float(rng.integers(0, 4)) / 4 for i in range(5)} for m in "ABC"}
        got = mean_ranks(table)
        want = oracle_ranks(table)
        for m in table:
            assert got[m] == pytest.approx(want[m])
        assert sum(got.values()) == pytest.approx(3 * 4 / 2)


def _logs(seed_lists):
    return [RoundLog(r + 1, [0], [list(s)]) for r, s in enumerate(seed_lists)]


def test_survival_fraction():
    logs = _logs([[1, 2, 3, 4], [1, 2, 5, 6], [1, 7, 8, 9]])
    assert survival_fraction(logs) == [1.0, 0.5, 0.25]
    assert survival_fraction(logs, "previous") == [1.0, 0.5, 0.25]
    frozen = _logs([[1, 2]] * 5)
    assert survival_fraction(frozen) == [1.0] * 5
    replaced = _logs([[i * 2, i * 2 + 1] for i in range(5)])
    assert survival_fraction(replaced)[1:] == [0.0] * 4
    with pytest.raises(InvalidInput):
        survival_fraction([])


def test_comm_report():
    logs = [RoundLog(1, [0, 1], messages_sent=2, bytes_sent=100), RoundLog(2, [0, 1], messages_sent=2, bytes_sent=90)]
    rep = CommReport.from_logs("drocks", logs)
    assert rep.total_messages == 4 and rep.total_bytes == 190
    assert rep.to_dict()["messages_per_round"] == [2, 2]
