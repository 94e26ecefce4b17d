"""
DROCKS against server-based training
====================================

Four clients share ItalyPowerDemand i.i.d. We train the travelling model,
FROCKS and both FedAvg variants on the same splits and look at accuracy and
traffic.
"""

import numpy as np

from drocks.baselines import run_fedavg, run_frocks
from drocks.data import find_ucr, load_ucr, partition_iid, znormalize_dataset
from drocks.federation import FederationConfig, evaluate_clients, run_drocks
from drocks.metrics import CommReport

ds = znormalize_dataset(load_ucr(*find_ucr("ItalyPowerDemand", "tests/data")))
clients = partition_iid(ds, 4, seed=0)
print("train samples per client:", [len(c.y_train) for c in clients])

cfg = FederationConfig(n_clients=4, n_kernels=200, max_rounds=30, master_seed=0)

runs = {
    "drocks": run_drocks(cfg, clients, evaluate_hops=False),
    "frocks": run_frocks(cfg, clients),
    "fedavg_rocket": run_fedavg("rocket_shared", cfg, clients),
    "fedavg_raw": run_fedavg("raw", cfg, clients),
}

print(f"\n{'method':<14} {'macro-F1':>8} {'pooled':>8} {'rounds':>6} {'msgs':>6} {'kB':>8}")
for name, res in runs.items():
    ev = evaluate_clients(res, clients, ds.class_count)
    comm = CommReport.from_logs(name, res.logs)
    print(
        f"{name:<14} {ev['macro_f1']:8.3f} {ev['pooled']['macro_f1']:8.3f} "
        f"{res.rounds_run:6d} {comm.total_messages:6d} {comm.total_bytes / 1e3:8.1f}"
    )

# the server methods pay an upload and a download per client and round
d = runs["drocks"].logs[0].messages_sent
f = runs["fedavg_rocket"].logs[0].messages_sent
print(f"\nmessages in round 1: drocks {d}, fedavg {f} (ratio {f / d:.0f})")

# one handoff is the selected seeds plus their weights
h = runs["drocks"].handoff
print("last handoff:", len(h.kernel_seeds), "seeds, weights", h.weights.shape,
      "| mean |w|", float(np.abs(h.weights).mean()).__round__(4))
