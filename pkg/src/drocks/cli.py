"""Command line entry point.

    drocks run --config exp.json [--method M --kernels K --clients N --rounds R
                                  --topology ring|random --drop-round r
                                  --drop-clients 2,3 --seed s --out dir]
    drocks compare a.csv b.csv --metric f1|acc

Dataset names in configs resolve under ``$DROCKS_DATA_ROOT``.
Exit codes: 0 success, 2 invalid configuration, 3 dataset problem.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import FormatError, InvalidConfig, InvalidInput, UnsupportedDataset, UnsupportedTask
from .experiment import ExperimentConfig, compare, run_experiment

EXIT_CONFIG, EXIT_DATA = 2, 3

# flag -> ExperimentConfig field
OVERRIDES = {
    "method": "method",
    "kernels": "kernels",
    "clients": "clients",
    "rounds": "rounds",
    "topology": "topology",
    "drop_round": "drop_round",
    "drop_clients": "drop_clients",
    "seed": "seed",
    "out": "out",
    "repeats": "repeats",
    "dataset": "dataset",
}


def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drocks", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", help="JSON experiment config")
    run.add_argument("--dataset")
    run.add_argument("--method", choices=["drocks", "frocks", "fedavg_raw", "fedavg_rocket"])
    run.add_argument("--kernels", type=int)
    run.add_argument("--clients", type=int)
    run.add_argument("--rounds", type=int)
    run.add_argument("--topology", choices=["ring", "random"])
    run.add_argument("--drop-round", type=int)
    run.add_argument("--drop-clients", type=_int_list)
    run.add_argument("--repeats", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")

    cmp_ = sub.add_parser("compare", help="mean ranks across result CSVs")
    cmp_.add_argument("csv", nargs="+")
    cmp_.add_argument("--metric", choices=["f1", "acc"], default="f1")
    return parser


def _load_config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as e:
            raise InvalidConfig(f"cannot read config {args.config}: {e}") from None
        if not isinstance(doc, dict):
            raise InvalidConfig("config must be a JSON object")
    for flag, name in OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            doc[name] = value
    try:
        return ExperimentConfig.from_dict(doc)
    except TypeError as e:
        raise InvalidConfig(str(e)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            summary = run_experiment(_load_config(args))
            print(
                f"{summary['dataset']['name']} {summary['config']['method']} "
                f"macro_f1={summary['macro_f1_mean']:.4f}±{summary['macro_f1_std']:.4f} "
                f"accuracy={summary['accuracy_mean']:.4f}±{summary['accuracy_std']:.4f}"
            )
        else:
            print(json.dumps(compare(args.csv, args.metric), indent=2))
    except (InvalidConfig, UnsupportedTask, InvalidInput) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, FormatError, UnsupportedDataset) as e:
        print(f"dataset error: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
