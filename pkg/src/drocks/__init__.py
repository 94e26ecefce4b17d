"""Decentralized time series classification with ROCKET features.

DROCKS trains one logistic regression that travels through the clients of a
federation, each hop keeping only the best ROCKET kernels. FROCKS and two
FedAvg baselines are included for comparison.
"""

from .baselines import frocks_aggregate, frocks_initial_seeds, run_fedavg, run_frocks
from .data import Dataset, load_ucr, partition_iid, znormalize
from .federation import (
    Dropout,
    FederationConfig,
    HandoffMessage,
    RoundLog,
    converged,
    decode_handoff,
    encode_handoff,
    evaluate_clients,
    run_drocks,
)
from .linreg import LinearModel, TrainConfig, fit, init_model, kernel_importance, select_top_p
from .metrics import macro_f1, mean_ranks, survival_fraction
from .rocket import Kernel, KernelSet, convolve, generate_kernel, ppv, transform

__version__ = "0.1.0"
