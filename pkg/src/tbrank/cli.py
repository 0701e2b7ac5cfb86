"""Command line entry point: ``tbrank <subcommand> ...``.

Exit codes: 0 ok, 2 usage, 3 missing input file, 4 conflicting options,
5 bad data, 1 anything else. Every run writes one ``*.manifest.json`` next
to its primary output (``top`` prints instead and writes none unless
``--out`` is given).
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .graph import (
    SECONDS_PER_YEAR,
    ColumnSchema,
    Weighting,
    build_graph,
    epoch_to_iso,
    filter_min_degree,
    load_interactions,
    load_metadata,
    merge_duplicates,
    resolve_release_dates,
    write_interactions,
    write_metadata,
)
from .harness import (
    MetricConfig,
    atomic_write,
    atomic_write_csv,
    evaluate,
    evaluate_grid,
    load_ground_truth,
    read_scores,
    recall_by_year_table,
    run_manifest,
    score_rows,
    sweep_rows,
    sweep_window,
    write_ground_truth,
    write_reports,
)
from .metrics import RankedList
from .ranking import ALGORITHMS, WEIGHTING_FOR, ConvergenceConfig, ScoreVector, rank
from .rebalance import RebalanceConfig, assign_windows, rebalance_scores
from .synth import SynthConfig, generate_synthetic

log = logging.getLogger("tbrank")

DATA_DIR_ENV = "TBRANK_DATA_DIR"

EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_CONFLICT = 4
EXIT_DATA = 5


class ConflictError(Exception):
    pass


def _input_path(p: str | None) -> Path | None:
    if p is None:
        return None
    path = Path(p)
    if not path.exists() and not path.is_absolute() and os.environ.get(DATA_DIR_ENV):
        alt = Path(os.environ[DATA_DIR_ENV]) / path
        if alt.exists():
            return alt
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {p}")
    return path


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now_iso() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _columns(text: str) -> ColumnSchema:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("--columns needs four entries: user,item,rating,timestamp")
    return ColumnSchema(*(int(p) if p.isdigit() else p for p in parts))


def _scale(text: str) -> tuple[float, float]:
    lo, hi = (float(x) for x in text.split(","))
    return lo, hi


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _rebalance_arg(text: str) -> int | None:
    return None if text.lower() == "none" else int(text)


def _read_config(path: str) -> list[str]:
    """``key = value`` lines to argv tokens; ``key = true`` becomes a bare flag."""
    tokens: list[str] = []
    for raw in _input_path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() == "true":
            tokens.append(flag)
        elif value.lower() != "false":
            tokens += [flag, value]
    return tokens


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tbrank", description="Time-balanced ranking of items in rating networks.")
    p.add_argument("--version", action="version", version=f"tbrank {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags override it")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--in", dest="inp", required=True, help="ratings CSV")
    data.add_argument("--metadata", help="item,release_date CSV")
    data.add_argument("--columns", type=_columns, default=ColumnSchema(), help="user,item,rating,timestamp names or positions")
    data.add_argument("--scale", type=_scale, default=(1.0, 5.0), help="rating bounds lo,hi")
    data.add_argument("--min-user", type=int, default=0)
    data.add_argument("--min-item", type=int, default=0)
    data.add_argument("--single-pass", action="store_true", help="one filtering pass instead of a fixed point")

    def algo_parent(choices):
        algo = argparse.ArgumentParser(add_help=False)
        algo.add_argument("--algo", required=True, choices=choices)
        algo.add_argument("--weighting", choices=["rating", "time-decay"])
        algo.add_argument("--now", type=int, help="reference instant for time decay (default: latest rating)")
        algo.add_argument("--delta", type=float, default=0.85, help="time decay base")
        algo.add_argument("--decay-years", type=float, default=1.0, help="years per unit of decay exponent")
        algo.add_argument("--seed", type=int, default=42)
        algo.add_argument("--threshold", type=float, default=1e-8)
        algo.add_argument("--max-iter", type=int, default=1000)
        return algo

    metric = argparse.ArgumentParser(add_help=False)
    metric.add_argument("--L", type=float, default=0.01, help="top-list fraction")
    metric.add_argument("--groups", type=int, default=40)

    s = sub.add_parser("ingest", parents=[common, data], help="clean ratings: merge duplicates, filter degrees")
    s.add_argument("--out", required=True)

    algo = algo_parent(sorted(ALGORITHMS))
    s = sub.add_parser("rank", parents=[common, data, algo], help="score items")
    s.add_argument("--out", required=True)

    s = sub.add_parser("rebalance", parents=[common, data], help="z-score existing scores within time windows")
    s.add_argument("--scores", required=True)
    s.add_argument("--window", type=int, default=100)
    s.add_argument("--fallback", type=float, default=0.0)
    s.add_argument("--out", required=True)

    s = sub.add_parser(
        "eval", parents=[common, data, algo_parent(sorted(ALGORITHMS) + ["all"]), metric], help="accuracy and imbalance report"
    )
    s.add_argument("--truth", help="item_id[,award_year] CSV")
    s.add_argument("--rebalance", type=_rebalance_arg, default=100, help="window size, or 'none'")
    s.add_argument("--by-year", help="also write year,recall_raw,recall_rebalanced CSV here")
    s.add_argument("--out", required=True, help="report JSON; report.csv is written alongside")

    s = sub.add_parser("sweep", parents=[common, data, algo, metric], help="imbalance vs window size")
    s.add_argument("--windows", type=_int_list, default=[2, 10, 20, 50, 100, 200, 500, 1000, 2000])
    s.add_argument("--out", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    defaults = SynthConfig()
    s.add_argument("--items", type=int, default=defaults.n_items)
    s.add_argument("--users", type=int, default=defaults.n_users)
    s.add_argument("--edges-per-user", type=float, default=defaults.edges_per_user)
    s.add_argument("--beta", type=float, default=defaults.beta)
    s.add_argument("--browse", type=int, default=defaults.browse)
    s.add_argument("--user-growth", type=float, default=defaults.user_growth)
    s.add_argument("--noise", type=float, default=defaults.noise)
    s.add_argument("--horizon-years", type=float, default=defaults.horizon_years)
    s.add_argument("--seed", type=int, default=defaults.seed)
    s.add_argument("--out-dir", required=True)

    s = sub.add_parser("top", parents=[common, data], help="print the top-k items with release years")
    s.add_argument("--scores", required=True)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--out", help="also write the table as CSV")
    return p


def _prepare(args):
    path = _input_path(args.inp)
    loaded = load_interactions(path, args.columns, args.scale)
    inter = merge_duplicates(loaded.interactions)
    inter = filter_min_degree(inter, args.min_user, args.min_item, args.single_pass)
    if not inter:
        raise ValueError("no interactions left after cleaning")
    meta_path = _input_path(args.metadata)
    metadata = load_metadata(meta_path) if meta_path else None
    inputs = {str(path): _digest(path)}
    if meta_path:
        inputs[str(meta_path)] = _digest(meta_path)
    return inter, metadata, inputs, len(loaded.rejects)


def _weighting(args, interactions) -> Weighting:
    kind = args.weighting or WEIGHTING_FOR[args.algo]
    if args.weighting:
        expected = WEIGHTING_FOR[args.algo]
        if args.algo in ("birank-r", "birank-t", "qrep") and kind != expected:
            raise ConflictError(f"--algo {args.algo} requires --weighting {expected}")
    if kind == "rating":
        if args.now is not None:
            raise ConflictError("--now only applies to --weighting time-decay")
        return Weighting.rating()
    now = args.now if args.now is not None else max(x.timestamp for x in interactions)
    args.now = now
    return Weighting.time_decay(now, args.delta, 1.0 / (args.decay_years * SECONDS_PER_YEAR))


def _conv(args) -> ConvergenceConfig:
    return ConvergenceConfig(args.threshold, args.max_iter, args.seed)


def _params(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("func",):
            continue
        if isinstance(v, ColumnSchema):
            v = list(v.fields())
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def _write_manifest(primary: Path, args, inputs: dict, outputs: list[Path], started: str, extra: dict | None = None):
    manifest = {
        "subcommand": args.command,
        "parameters": _params(args),
        "inputs": inputs,
        "outputs": [str(p) for p in outputs],
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "started": started,
        "finished": _now_iso(),
    }
    if extra:
        manifest["run"] = extra
    path = primary.with_name(primary.name + ".manifest.json")
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return path


def cmd_ingest(args, started):
    inter, metadata, inputs, rejected = _prepare(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(f".{out.name}.tmp")
    write_interactions(tmp, inter)
    tmp.replace(out)
    users = len({x.user for x in inter})
    items = len({x.item for x in inter})
    print(f"{len(inter)} interactions, {users} users, {items} items ({rejected} rows rejected)")
    _write_manifest(out, args, inputs, [out], started, {"interactions": len(inter), "users": users, "items": items, "rejected": rejected})


def _scores_for(args, inter):
    graph = build_graph(inter, _weighting(args, inter))
    cfg = _conv(args)
    return graph, rank(args.algo, graph, cfg), cfg


def cmd_rank(args, started):
    inter, metadata, inputs, _ = _prepare(args)
    graph, sv, cfg = _scores_for(args, inter)
    out = Path(args.out)
    atomic_write_csv(out, ["item_id", "score", "rank"], score_rows(sv))
    _write_manifest(out, args, inputs, [out], started, run_manifest(sv, graph, cfg))


def _load_score_vector(path) -> ScoreVector:
    items, vals = read_scores(_input_path(path))
    return ScoreVector(tuple(items), (), vals, np.zeros(0), 0, True, "")


def cmd_rebalance(args, started):
    inter, metadata, inputs, _ = _prepare(args)
    catalog = resolve_release_dates(build_graph(inter), metadata)
    scores_path = _input_path(args.scores)
    inputs[str(scores_path)] = _digest(scores_path)
    sv = _load_score_vector(scores_path)
    cfg = RebalanceConfig(args.window, args.fallback)
    rb = rebalance_scores(sv, assign_windows(catalog, cfg.window), cfg)
    out = Path(args.out)
    atomic_write_csv(out, ["item_id", "score", "rank", "raw_score"], score_rows(rb))
    _write_manifest(out, args, inputs, [out], started, {"window": cfg.window, "fallback": cfg.fallback})


def cmd_eval(args, started):
    inter, metadata, inputs, _ = _prepare(args)
    truth = None
    base = resolve_release_dates(build_graph(inter), metadata)
    if args.truth:
        tp = _input_path(args.truth)
        inputs[str(tp)] = _digest(tp)
        truth = load_ground_truth(tp, base)
    rb = None if args.rebalance is None else RebalanceConfig(args.rebalance)
    mcfg = MetricConfig(args.L, args.groups)
    cfg = _conv(args)
    dataset = Path(args.inp).stem
    out = Path(args.out)
    outputs = [out]
    if args.algo == "all":
        if args.weighting or args.now is not None:
            raise ConflictError("--algo all picks each algorithm's weighting; drop --weighting/--now")
        reports = evaluate_grid(inter, metadata, truth, sorted(ALGORITHMS), rb or RebalanceConfig(), mcfg, cfg, dataset)
        if args.by_year:
            raise ConflictError("--by-year needs a single --algo")
    else:
        graph = build_graph(inter, _weighting(args, inter))
        catalog = resolve_release_dates(graph, metadata)
        reports = [evaluate(graph, catalog, args.algo, rb, truth, mcfg, cfg, dataset)]
        if args.by_year:
            if truth is None or not truth.award_year:
                raise ConflictError("--by-year needs --truth with an award_year column")
            table = recall_by_year_table(
                graph, catalog, args.algo, rb or RebalanceConfig(), truth, args.L, cfg, args.min_user, args.min_item
            )
            for row in table:
                reports[0].recall_by_year[row["year"]] = {k: row[k] for k in ("recall_raw", "recall_rebalanced")}
            yp = Path(args.by_year)
            atomic_write_csv(yp, ["year", "recall_raw", "recall_rebalanced"], table)
            outputs.append(yp)
    outputs.append(write_reports(out, reports))
    for r in reports:
        vals = " ".join(f"{k}={'n/a' if v is None else f'{v:.4f}'}" for k, v in r.metrics.items())
        print(f"{r.label:16s} {vals}")
    _write_manifest(out, args, inputs, outputs, started)


def cmd_sweep(args, started):
    inter, metadata, inputs, _ = _prepare(args)
    graph = build_graph(inter, _weighting(args, inter))
    catalog = resolve_release_dates(graph, metadata)
    cfg = _conv(args)
    sv = rank(args.algo, graph, cfg)
    points = sweep_window(graph, catalog, args.algo, args.windows, MetricConfig(args.L, args.groups), cfg, scores=sv)
    out = Path(args.out)
    atomic_write_csv(out, ["delta_p", "raw_imbalance", "rebalanced_imbalance", "relative_imbalance"], sweep_rows(points))
    _write_manifest(out, args, inputs, [out], started, run_manifest(sv, graph, cfg))


def cmd_synth(args, started):
    cfg = SynthConfig(
        n_items=args.items,
        n_users=args.users,
        edges_per_user=args.edges_per_user,
        beta=args.beta,
        browse=args.browse,
        user_growth=args.user_growth,
        noise=args.noise,
        horizon_years=args.horizon_years,
        seed=args.seed,
    )
    data = generate_synthetic(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "ratings.csv", out / "metadata.csv", out / "truth.csv"]
    write_interactions(paths[0], data.interactions)
    write_metadata(paths[1], data.metadata)
    write_ground_truth(paths[2], data.truth)
    print(f"{len(data.interactions)} ratings, {cfg.n_items} items, {len(data.truth)} planted truth items -> {out}")
    _write_manifest(out / "synth", args, {}, paths, started)


def cmd_top(args, started):
    inter, metadata, inputs, _ = _prepare(args)
    catalog = resolve_release_dates(build_graph(inter), metadata)
    release = catalog.release_of()
    items, vals = read_scores(_input_path(args.scores))
    ranked = RankedList.from_scores(items, vals)
    rows = []
    for pos, it in enumerate(ranked.items[: args.k], start=1):
        year = epoch_to_iso(release[it])[:4] if it in release else ""
        rows.append({"rank": pos, "item_id": it, "release_year": year})
    width = max([len("item_id")] + [len(r["item_id"]) for r in rows])
    print(f"{'rank':>4}  {'item_id':<{width}}  release_year")
    for r in rows:
        print(f"{r['rank']:>4}  {r['item_id']:<{width}}  {r['release_year']}")
    if args.out:
        out = Path(args.out)
        atomic_write_csv(out, ["rank", "item_id", "release_year"], rows)
        _write_manifest(out, args, inputs, [out], started)


COMMANDS = {
    "ingest": cmd_ingest,
    "rank": cmd_rank,
    "rebalance": cmd_rebalance,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "top": cmd_top,
}


def _with_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    k = argv.index("--config")
    if k + 1 >= len(argv):
        return argv
    cmd_pos = next((j for j, a in enumerate(argv) if a in COMMANDS), None)
    if cmd_pos is None:
        return argv
    rest = argv[:k] + argv[k + 2 :]
    return rest[: cmd_pos + 1] + _read_config(argv[k + 1]) + rest[cmd_pos + 1 :]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _with_config(argv)
    except FileNotFoundError as exc:
        print(f"tbrank: error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ValueError as exc:
        print(f"tbrank: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    started = _now_iso()
    try:
        COMMANDS[args.command](args, started)
    except FileNotFoundError as exc:
        print(f"tbrank: error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConflictError as exc:
        print(f"tbrank: error: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    except (ValueError, KeyError) as exc:
        print(f"tbrank: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("unexpected failure")
        print(f"tbrank: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
