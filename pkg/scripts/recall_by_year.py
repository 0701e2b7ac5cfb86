"""Recall of each award year's items, ranking only the data before that year.

Writes year,recall_raw,recall_rebalanced. Needs ground truth with award years;
the synthetic default provides them.
"""

import argparse
import csv
import sys

from _data import add_data_args, load
from tbrank.graph import resolve_release_dates
from tbrank.harness import graph_for, recall_by_year_table
from tbrank.rebalance import RebalanceConfig


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    add_data_args(ap)
    ap.add_argument("--algo", default="birank-r")
    ap.add_argument("--window", type=int, default=100)
    ap.add_argument("--L", type=float, default=0.01)
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()

    inter, metadata, truth, _ = load(args)
    if truth is None or not truth.award_year:
        sys.exit("ground truth with an award_year column is required")
    g = graph_for(args.algo, inter)
    cat = resolve_release_dates(g, metadata)
    rows = recall_by_year_table(g, cat, args.algo, RebalanceConfig(args.window), truth, args.L, min_user=args.min_user, min_item=args.min_item)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=["year", "recall_raw", "recall_rebalanced"])
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if v is None else v for k, v in r.items()})
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
