"""Relative imbalance (rebalanced / raw) as the window size grows.

Writes delta_p,raw_imbalance,rebalanced_imbalance,relative_imbalance.
"""

import argparse
import csv
import sys

from _data import add_data_args, load
from tbrank.harness import MetricConfig, graph_for, sweep_rows, sweep_window
from tbrank.graph import resolve_release_dates


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    add_data_args(ap)
    ap.add_argument("--algo", default="birank-r")
    ap.add_argument("--windows", default="2,10,20,50,100,200,500,1000,2000")
    ap.add_argument("--out", help="CSV path (default: stdout)")
    args = ap.parse_args()

    inter, metadata, _, _ = load(args)
    g = graph_for(args.algo, inter)
    cat = resolve_release_dates(g, metadata)
    windows = [int(x) for x in args.windows.split(",")]
    rows = sweep_rows(sweep_window(g, cat, args.algo, windows, MetricConfig()))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=list(rows[0]))
    w.writeheader()
    w.writerows(rows)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
