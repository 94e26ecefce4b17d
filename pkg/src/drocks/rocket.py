"""Seeded ROCKET kernels and the PPV transform.

A kernel is fully determined by ``(seed, series_len)``: its parameters are
drawn from a :class:`~drocks.prng.SplitMix64` stream seeded with
``derive_seed(seed, series_len)`` in this fixed order:

1. length, uniform over the admissible subset of ``{7, 9, 11}``
2. ``length`` standard normal weights (Box-Muller on consecutive uniform
   pairs, cosine branch), then mean-centred
3. bias, uniform on ``[-1, 1)``
4. dilation exponent ``u`` uniform on ``[0, log2((T - 1) / (length - 1)))``,
   ``dilation = floor(2 ** u)``
5. padding flag, ``uniform() < 0.5``

The i-th uniform of a stream is ``mix64(state0 + i * GAMMA) >> 11`` scaled by
``2**-53``, so a whole batch of kernels is generated with array arithmetic.

Only the PPV statistic is extracted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit, prange

from .errors import InvalidInput
from .prng import GOLDEN_GAMMA, MASK64, derive_seed

KERNEL_LENGTHS = (7, 9, 11)
MIN_SERIES_LEN = 8


@dataclass(frozen=True, eq=False)
class Kernel:
    seed: int
    length: int
    weights: np.ndarray
    bias: float
    dilation: int
    padding: bool

    @property
    def span(self) -> int:
        """Receptive field minus one, ``(length - 1) * dilation``."""
        return (self.length - 1) * self.dilation

    def same_as(self, other: "Kernel") -> bool:
        return (
            self.seed == other.seed
            and self.length == other.length
            and self.bias == other.bias
            and self.dilation == other.dilation
            and self.padding == other.padding
            and np.array_equal(self.weights, other.weights)
        )


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise InvalidInput(f"kernel seed {seed} is not a 64-bit unsigned integer")
    return seed


_U64_GAMMA = np.uint64(GOLDEN_GAMMA)
# draws consumed per kernel: length, 2 uniforms per weight, bias, dilation, padding
_N_DRAWS = 1 + 2 * max(KERNEL_LENGTHS) + 3


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(0xBF58476D1CE4E5B9)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _uniforms(seeds, series_len: int) -> np.ndarray:
    """First ``_N_DRAWS`` SplitMix64 uniforms of each kernel's stream, shape (n, _N_DRAWS)."""
    state0 = np.array([derive_seed(s, series_len) for s in seeds], dtype=np.uint64)
    steps = np.arange(1, _N_DRAWS + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        out = _mix64_array(state0[:, None] + steps[None, :] * _U64_GAMMA)
    return (out >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def generate_kernels(seeds, series_len: int) -> list[Kernel]:
    """Vectorised :func:`generate_kernel` over many seeds; same values, same order of draws."""
    seeds = [_check_seed(s) for s in seeds]
    if series_len < MIN_SERIES_LEN:
        raise InvalidInput(f"series length {series_len} < {MIN_SERIES_LEN}")
    if not seeds:
        return []
    u = _uniforms(seeds, series_len)
    n = len(seeds)
    rows = np.arange(n)
    lengths_ok = np.array([L for L in KERNEL_LENGTHS if L - 1 <= series_len - 1])
    pick = np.minimum((u[:, 0] * len(lengths_ok)).astype(np.int64), len(lengths_ok) - 1)
    lengths = lengths_ok[pick]

    u1, u2 = u[:, 1:1 + 2 * max(KERNEL_LENGTHS):2], u[:, 2:2 + 2 * max(KERNEL_LENGTHS):2]
    normals = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    mask = np.arange(normals.shape[1])[None, :] < lengths[:, None]
    normals = np.where(mask, normals, 0.0)
    normals -= np.where(mask, (normals.sum(axis=1) / lengths)[:, None], 0.0)

    bias = 2.0 * u[rows, 1 + 2 * lengths] - 1.0
    log_span = np.log2((series_len - 1) / (lengths - 1))
    max_dilation = (series_len - 1) // (lengths - 1)
    dilation = np.minimum(
        np.maximum(1, np.floor(2.0 ** (u[rows, 2 + 2 * lengths] * log_span)).astype(np.int64)),
        max_dilation,
    )
    padding = u[rows, 3 + 2 * lengths] < 0.5

    out = []
    for i, s in enumerate(seeds):
        w = normals[i, : lengths[i]].copy()
        w.flags.writeable = False
        out.append(
            Kernel(s, int(lengths[i]), w, float(bias[i]), int(dilation[i]), bool(padding[i]))
        )
    return out


def generate_kernel(seed: int, series_len: int) -> Kernel:
    return generate_kernels([seed], series_len)[0]


class KernelSet(Sequence[Kernel]):
    """Ordered kernels with pairwise-distinct seeds, all built for one series length."""

    def __init__(self, kernels: Iterable[Kernel] = (), series_len: int | None = None):
        self._kernels = list(kernels)
        seeds = [k.seed for k in self._kernels]
        if len(set(seeds)) != len(seeds):
            raise InvalidInput("kernel seeds must be pairwise distinct")
        self.series_len = series_len

    @classmethod
    def from_seeds(cls, seeds: Iterable[int], series_len: int) -> "KernelSet":
        return cls(generate_kernels(list(seeds), series_len), series_len)

    @property
    def seeds(self) -> list[int]:
        return [k.seed for k in self._kernels]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return KernelSet(self._kernels[i], self.series_len)
        return self._kernels[i]

    def __len__(self) -> int:
        return len(self._kernels)

    def __iter__(self):
        return iter(self._kernels)

    def take(self, positions: Iterable[int]) -> "KernelSet":
        return KernelSet((self._kernels[i] for i in positions), self.series_len)

    def __add__(self, other: "KernelSet") -> "KernelSet":
        return KernelSet(list(self) + list(other), self.series_len or other.series_len)

    def to_json(self) -> list[str]:
        """Seeds as decimal strings; the only external kernel representation."""
        return [str(s) for s in self.seeds]

    @classmethod
    def from_json(cls, payload: Sequence, series_len: int) -> "KernelSet":
        return cls.from_seeds((int(s) for s in payload), series_len)


def _pad(x: np.ndarray, k: Kernel) -> np.ndarray:
    if not k.padding:
        if k.span > x.shape[-1] - 1:
            raise InvalidInput(
                f"kernel span {k.span} exceeds series length {x.shape[-1]} without padding"
            )
        return x
    left = k.span // 2
    widths = [(0, 0)] * (x.ndim - 1) + [(left, k.span - left)]
    return np.pad(x, widths)


def _convolve_rows(X: np.ndarray, k: Kernel) -> np.ndarray:
    Xp = _pad(X, k)
    n_out = Xp.shape[-1] - k.span
    out = np.full(X.shape[:-1] + (n_out,), k.bias)
    # accumulate tap by tap so results match a left-to-right scalar sum exactly
    for i in range(k.length):
        start = i * k.dilation
        out += k.weights[i] * Xp[..., start:start + n_out]
    return out


def convolve(x, k: Kernel) -> np.ndarray:
    """Dilated sliding dot product of one series with one kernel, plus bias."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidInput("convolve expects a 1-D series")
    return _convolve_rows(x, k)


def ppv(feature_map) -> float:
    y = np.asarray(feature_map)
    if y.size == 0:
        raise InvalidInput("ppv of an empty sequence")
    return float(np.count_nonzero(y > 0) / y.size)


def as_panel(X) -> np.ndarray:
    """Validate a collection of equal-length univariate series as an (M, T) float array."""
    if isinstance(X, np.ndarray):
        arr = X.astype(float, copy=False)
    else:
        rows = [np.asarray(r, dtype=float) for r in X]
        if len({r.shape for r in rows}) > 1:
            raise InvalidInput("all series must have the same length")
        arr = np.array(rows, dtype=float).reshape(len(rows), -1)
    if arr.ndim != 2:
        raise InvalidInput(f"expected a 2-D panel, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("series contain NaN or Inf")
    return arr


@njit(cache=True, parallel=True)
def _ppv_panel(X, weights, lengths, biases, dilations, paddings):
    M, T = X.shape
    K = lengths.shape[0]
    out = np.empty((M, K))
    for i in prange(M):
        for k in range(K):
            L, d = lengths[k], dilations[k]
            span = (L - 1) * d
            left = span // 2 if paddings[k] else 0
            n_out = T if paddings[k] else T - span
            positive = 0
            for j in range(n_out):
                start = j - left
                # taps that land inside the series; padded taps contribute zero
                t0 = 0 if start >= 0 else (-start + d - 1) // d
                t1 = min(L, (T - 1 - start) // d + 1)
                acc = biases[k]
                for t in range(t0, t1):
                    acc += weights[k, t] * X[i, start + t * d]
                if acc > 0:
                    positive += 1
            out[i, k] = positive / n_out
    return out


def transform(X, kernels: Sequence[Kernel]) -> np.ndarray:
    """PPV feature matrix of shape (M, K); column j belongs to ``kernels[j]``."""
    X = as_panel(X)
    K = len(kernels)
    if K == 0 or X.shape[0] == 0:
        return np.zeros((X.shape[0], K))
    for k in kernels:
        if not k.padding and k.span > X.shape[1] - 1:
            raise InvalidInput(
                f"kernel {k.seed} span {k.span} exceeds series length {X.shape[1]}"
            )
    weights = np.zeros((K, max(k.length for k in kernels)))
    for j, k in enumerate(kernels):
        weights[j, : k.length] = k.weights
    return _ppv_panel(
        np.ascontiguousarray(X),
        weights,
        np.array([k.length for k in kernels], dtype=np.int64),
        np.array([k.bias for k in kernels]),
        np.array([k.dilation for k in kernels], dtype=np.int64),
        np.array([k.padding for k in kernels]),
    )


@dataclass
class FeatureCache:
    """Memoises PPV columns of one fixed panel by kernel seed.

    Received kernels are re-applied to the same local data every round, so
    caching their columns saves most of the transform cost in long runs.
    """

    X: np.ndarray
    columns: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = as_panel(self.X)

    def transform(self, kernels: Sequence[Kernel]) -> np.ndarray:
        missing = [k for k in kernels if k.seed not in self.columns]
        if missing:
            fresh = transform(self.X, missing)
            for j, k in enumerate(missing):
                self.columns[k.seed] = fresh[:, j]
        if not len(kernels):
            return np.empty((self.X.shape[0], 0))
        return np.column_stack([self.columns[k.seed] for k in kernels])
