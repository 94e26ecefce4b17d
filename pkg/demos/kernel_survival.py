"""
Which kernels survive the ring
==============================

Every hop keeps the p kernels with the largest squared weights. Fresh kernels
start from zero, so they have to out-grow weights that earlier clients already
trained. We count how many of the very first handoff's kernels are still
carried later, for two values of K, and then drop half the clients.
"""

from drocks.data import find_ucr, load_ucr, partition_iid, znormalize_dataset
from drocks.federation import Dropout, FederationConfig, evaluate_clients, run_drocks
from drocks.metrics import survival_fraction

ds = znormalize_dataset(load_ucr(*find_ucr("ItalyPowerDemand", "tests/data")))
clients = partition_iid(ds, 4, seed=1)
base = dict(n_clients=4, max_rounds=40, master_seed=1, topology="random")

for K in (100, 500):
    res = run_drocks(FederationConfig(n_kernels=K, **base), clients, evaluate_hops=False)
    hops = [set(s) for log in res.logs for s in log.selected_seeds]
    kept = [len(hops[0] & h) / len(hops[0]) for h in hops]
    print(f"K={K}: share of hop-1 kernels kept after hops 2, 4, 8, last: "
          f"{kept[1]:.2f} {kept[3]:.2f} {kept[7]:.2f} {kept[-1]:.2f}")
    # per round, against the handoff that closed round 1
    print("       against the end of round 1, round 40:", survival_fraction(res.logs)[-1])

# drop clients 2 and 3 from round 5 on; they are still tested at the end
full = run_drocks(FederationConfig(n_kernels=100, **base), clients, evaluate_hops=False)
half = run_drocks(FederationConfig(n_kernels=100, dropout=Dropout(5, {2, 3}), **base),
                  clients, evaluate_hops=False)
print("\nvisiting order in round 4:", half.logs[3].visiting_order)
print("visiting order in round 5:", half.logs[4].visiting_order)
for label, res in (("4 clients", full), ("2 clients after round 5", half)):
    ev = evaluate_clients(res, clients, ds.class_count)
    per = ", ".join(f"{c['macro_f1']:.3f}" for c in ev["per_client"])
    print(f"{label:<24} mean macro-F1 {ev['macro_f1']:.3f}  per client [{per}]")
