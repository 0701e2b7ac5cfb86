"""Top-k items before and after rebalancing, with release years, side by side."""

import argparse

from _data import add_data_args, load
from tbrank.graph import epoch_to_iso, resolve_release_dates
from tbrank.harness import graph_for
from tbrank.metrics import RankedList
from tbrank.ranking import rank
from tbrank.rebalance import RebalanceConfig, assign_windows, rebalance_scores


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    add_data_args(ap)
    ap.add_argument("--algo", default="birank-r")
    ap.add_argument("--window", type=int, default=100)
    ap.add_argument("--k", type=int, default=10)
    args = ap.parse_args()

    inter, metadata, truth, _ = load(args)
    g = graph_for(args.algo, inter)
    cat = resolve_release_dates(g, metadata)
    year = {it: epoch_to_iso(t)[:4] for it, t in cat.release_of().items()}
    raw = rank(args.algo, g)
    rb = rebalance_scores(raw, assign_windows(cat, args.window), RebalanceConfig(args.window))
    gt = set(truth) if truth is not None else set()
    before = RankedList.from_score_vector(raw).items[: args.k]
    after = RankedList.from_score_vector(rb).items[: args.k]
    print(f"{'rank':>4}  {'raw':<14}{'year':<6}  {'rebalanced':<14}{'year':<6}")
    for pos, (a, b) in enumerate(zip(before, after), start=1):
        ma = "*" if a in gt else " "
        mb = "*" if b in gt else " "
        print(f"{pos:>4}  {a + ma:<14}{year[a]:<6}  {b + mb:<14}{year[b]:<6}")
    if gt:
        print("* ground-truth item")


if __name__ == "__main__":
    main()
