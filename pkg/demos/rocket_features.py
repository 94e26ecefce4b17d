"""
Random kernels and PPV features
===============================

A kernel is rebuilt from a single integer, so a set of kernels travels as a
list of seeds.
"""

import numpy as np

from drocks.data import find_ucr, load_ucr, znormalize_dataset
from drocks.rocket import KernelSet, convolve, generate_kernel, ppv, transform

DATA = find_ucr("ItalyPowerDemand", "tests/data")
ds = znormalize_dataset(load_ucr(*DATA))
print(ds.name, "train", ds.X_train.shape, "test", ds.X_test.shape, "classes", ds.class_count)

# one kernel, drawn for series of this length
k = generate_kernel(42, ds.series_length)
print(f"seed 42 -> length {k.length}, dilation {k.dilation}, padding {k.padding}, bias {k.bias:+.3f}")
print("weights sum to", round(float(k.weights.sum()), 12))

# the feature is the share of positive convolution outputs
x = ds.X_train[0]
out = convolve(x, k)
print("convolution output length", len(out), "ppv", ppv(out))

# a whole set, as it would go over the wire
kernels = KernelSet.from_seeds(range(1000, 1100), ds.series_length)
wire = kernels.to_json()
again = KernelSet.from_json(wire, ds.series_length)
F = transform(ds.X_train, kernels)
assert np.array_equal(F, transform(ds.X_train, again))
print("feature matrix", F.shape, "rebuilt from", len(wire), "seeds without loss")

# PPV of the two classes differs for some kernels; that is what the classifier uses
gap = np.abs(F[ds.y_train == 0].mean(0) - F[ds.y_train == 1].mean(0))
best = np.argsort(gap)[::-1][:3]
for j in best:
    print(f"kernel {kernels.seeds[j]}: class means differ by {gap[j]:.3f}")
