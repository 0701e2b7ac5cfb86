"""Accuracy and imbalance for every ranker, raw and rebalanced.

One row per (algorithm, rebalance) with precision, recall, AUC, NDCG and
imbalance at top-1% and 40 groups. Published reference values for the
public datasets are listed in the README.
"""

import argparse
import csv
import sys

from _data import add_data_args, load
from tbrank.harness import METRICS, MetricConfig, evaluate_grid
from tbrank.ranking import ALGORITHMS
from tbrank.rebalance import RebalanceConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    add_data_args(ap)
    ap.add_argument("--window", type=int, default=100)
    ap.add_argument("--L", type=float, default=0.01)
    ap.add_argument("--groups", type=int, default=40)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()

    inter, metadata, truth, label = load(args)
    reports = evaluate_grid(
        inter, metadata, truth, sorted(ALGORITHMS), RebalanceConfig(args.window), MetricConfig(args.L, args.groups), dataset=label
    )
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fh)
    w.writerow(["method", *METRICS])
    for r in reports:
        w.writerow([r.label, *("" if r.metrics[m] is None else f"{r.metrics[m]:.4f}" for m in METRICS)])
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
