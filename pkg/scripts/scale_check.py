"""Time rank + rebalance + metrics on a synthetic graph with a fixed edge count.

Prints one JSON object. Generation is excluded from ``seconds``; peak memory
covers the whole process.
"""

import argparse
import json
import resource
import time

from tbrank.graph import build_graph, resolve_release_dates
from tbrank.harness import MetricConfig, score_report
from tbrank.ranking import ConvergenceConfig, rank
from tbrank.rebalance import RebalanceConfig, assign_windows, rebalance_scores
from tbrank.synth import SynthConfig, generate_synthetic


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--edges", type=int, default=1_000_000)
    ap.add_argument("--items", type=int, default=20_000)
    ap.add_argument("--algo", default="birank-r")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    # ~5% headroom for users arriving before the first release
    users = int(args.edges / 20 * 1.05) + 1
    data = generate_synthetic(SynthConfig(n_items=args.items, n_users=users, seed=args.seed))
    if len(data.interactions) < args.edges:
        raise SystemExit(f"generator produced only {len(data.interactions)} edges")
    inter = data.interactions[: args.edges]

    t0 = time.perf_counter()
    graph = build_graph(inter)
    catalog = resolve_release_dates(graph, data.metadata)
    raw = rank(args.algo, graph, ConvergenceConfig())
    rb = rebalance_scores(raw, assign_windows(catalog, 100), RebalanceConfig(100))
    metrics, _, _ = score_report(rb, catalog, data.truth, MetricConfig())
    seconds = time.perf_counter() - t0

    peak_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    print(
        json.dumps(
            {
                "edges": graph.n_edges,
                "users": graph.n_users,
                "items": graph.n_items,
                "iterations": raw.iterations,
                "converged": raw.converged,
                "seconds": seconds,
                "peak_mb": peak_kb / 1024,
                "metrics": metrics,
            }
        )
    )


if __name__ == "__main__":
    main()
