from pathlib import Path

import numpy as np
import pytest

from drocks.data import Dataset, partition_iid

DATA_DIR = Path(__file__).parent / "data"


def sign_of_mean_dataset(seed=0, n_train=80, n_test=200, length=40, name="SignOfMean"):
    """Binary task: label is the sign of the series mean (offset +-1 plus unit noise).

    Not z-normalised, otherwise the signal disappears.
    """
    rng = np.random.default_rng(seed)

    def draw(n):
        y = np.arange(n) % 2
        rng.shuffle(y)
        X = (2 * y - 1)[:, None] + rng.normal(0.0, 1.0, (n, length))
        return X, y

    Xtr, ytr = draw(n_train)
    Xte, yte = draw(n_test)
    return Dataset(name, Xtr, ytr, Xte, yte, {"-1": 0, "1": 1})


def three_class_dataset(seed=0, n_train=60, n_test=60, length=30):
    rng = np.random.default_rng(seed)

    def draw(n):
        y = np.arange(n) % 3
        rng.shuffle(y)
        t = np.linspace(0, 2 * np.pi, length)
        X = np.stack([np.sin((k + 1) * t) for k in y]) + rng.normal(0, 0.3, (n, length))
        return X, y

    Xtr, ytr = draw(n_train)
    Xte, yte = draw(n_test)
    return Dataset("ThreeWaves", Xtr, ytr, Xte, yte, {"0": 0, "1": 1, "2": 2})


@pytest.fixture
def sign_of_mean():
    return sign_of_mean_dataset()


@pytest.fixture
def sign_clients(sign_of_mean):
    return partition_iid(sign_of_mean, 4, 0)


@pytest.fixture
def three_class():
    return three_class_dataset()
