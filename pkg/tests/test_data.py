from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drocks.data import Dataset, find_ucr, load_ucr, partition_iid, znormalize
from drocks.errors import FormatError, InvalidConfig, UnsupportedDataset

from .conftest import DATA_DIR


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_two_line_file(tmp_path):
    tr = write(tmp_path, "A_TRAIN.tsv", "1\t0.1\t0.2\n2\t0.3\t0.4\n")
    te = write(tmp_path, "A_TEST.tsv", "2\t0.5\t0.6\n")
    ds = load_ucr(tr, te)
    assert ds.class_count == 2 and ds.series_length == 2
    assert ds.y_train.tolist() == [0, 1]
    assert ds.y_test.tolist() == [1]
    assert ds.name == "A"


def test_labels_reencoded_numerically(tmp_path):
    tr = write(tmp_path, "B_TRAIN.tsv", "1\t0\t1\n-1\t1\t0\n10\t2\t2\n")
    te = write(tmp_path, "B_TEST.tsv", "-1\t0\t0\n")
    ds = load_ucr(tr, te)
    assert ds.label_map == {"-1": 0, "1": 1, "10": 2}
    assert ds.manifest()["label_map"] == {"-1": 0, "1": 1, "10": 2}


def test_ragged_rows_rejected(tmp_path):
    tr = write(tmp_path, "C_TRAIN.tsv", "1\t1\t2\t3\t4\n2\t1\t2\t3\n")
    te = write(tmp_path, "C_TEST.tsv", "1\t1\t2\t3\t4\n")
    with pytest.raises(FormatError):
        load_ucr(tr, te)


def test_nan_rejected(tmp_path):
    tr = write(tmp_path, "D_TRAIN.tsv", "1\t1\tNaN\n2\t1\t2\n")
    te = write(tmp_path, "D_TEST.tsv", "1\t1\t2\n")
    with pytest.raises(UnsupportedDataset):
        load_ucr(tr, te)


def test_unseen_test_label_rejected(tmp_path):
    tr = write(tmp_path, "E_TRAIN.tsv", "1\t1\t2\n2\t1\t2\n")
    te = write(tmp_path, "E_TEST.tsv", "3\t1\t2\n")
    with pytest.raises(FormatError):
        load_ucr(tr, te)


def test_bundled_italy_power_demand():
    ds = load_ucr(*find_ucr("ItalyPowerDemand", DATA_DIR))
    assert (len(ds.y_train), len(ds.y_test), ds.series_length, ds.class_count) == (67, 1029, 24, 2)


def test_find_ucr_missing(tmp_path, monkeypatch):
    monkeypatch.delenv("DROCKS_DATA_ROOT", raising=False)
    with pytest.raises(FileNotFoundError):
        find_ucr("Nope")
    with pytest.raises(FileNotFoundError):
        find_ucr("Nope", tmp_path)


def test_znormalize_examples():
    np.testing.assert_allclose(znormalize([1, 2, 3]), [-1.2247, 0, 1.2247], atol=1e-4)
    assert znormalize([5, 5, 5]).tolist() == [0, 0, 0]


@settings(max_examples=200)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60))
def test_znormalize_properties(values):
    z = znormalize(values)
    assert abs(z.mean()) < 1e-10
    np.testing.assert_allclose(znormalize(z), z, atol=1e-10)


def _dataset(y_train, y_test=None, T=3):
    y_train = np.asarray(y_train)
    y_test = np.asarray(y_train if y_test is None else y_test)
    Xtr = np.arange(len(y_train) * T, dtype=float).reshape(-1, T)
    Xte = -np.arange(len(y_test) * T, dtype=float).reshape(-1, T)
    return Dataset("t", Xtr, y_train, Xte, y_test)


def test_partition_single_client_is_whole_dataset():
    ds = _dataset([0, 1, 1, 0, 1])
    (only,) = partition_iid(ds, 1, 0)
    assert sorted(only.X_train[:, 0]) == sorted(ds.X_train[:, 0])
    assert len(only.y_test) == len(ds.y_test)


def test_partition_exact_deal():
    parts = partition_iid(_dataset([0, 0, 0, 0, 1, 1, 1, 1]), 4, 3)
    for p in parts:
        assert sorted(p.y_train.tolist()) == [0, 1]


def test_partition_errors():
    with pytest.raises(InvalidConfig):
        partition_iid(_dataset([0, 1]), 3, 0)
    with pytest.raises(InvalidConfig):
        partition_iid(_dataset([0, 1]), 0, 0)


def _check_partition(ds, parts, N):
    for split in ("train", "test"):
        y = getattr(ds, f"y_{split}")
        X = getattr(ds, f"X_{split}")
        rows = np.concatenate([getattr(p, f"X_{split}") for p in parts])
        # exact multiset reconstruction
        assert sorted(map(tuple, rows)) == sorted(map(tuple, X))
        glob = Counter(y.tolist())
        for p in parts:
            local = Counter(getattr(p, f"y_{split}").tolist())
            for c, n in glob.items():
                assert abs(local.get(c, 0) - n / N) <= 1


def test_partition_stratified_random_datasets():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        N = int(rng.integers(1, 6))
        C = int(rng.integers(2, 5))
        n = int(rng.integers(N, 40))
        ds = _dataset(rng.integers(0, C, n), rng.integers(0, C, int(rng.integers(1, 30))), T=1)
        _check_partition(ds, partition_iid(ds, N, int(rng.integers(0, 1000))), N)


def test_partition_deterministic():
    ds = _dataset(np.arange(30) % 3)
    a = partition_iid(ds, 4, 7)
    b = partition_iid(ds, 4, 7)
    c = partition_iid(ds, 4, 8)
    assert all(np.array_equal(x.X_train, y.X_train) for x, y in zip(a, b))
    assert any(not np.array_equal(x.X_train, y.X_train) for x, y in zip(a, c))
