"""Experiment orchestration: ground truth, evaluation reports, per-year recall, window sweeps."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .graph import (
    Interaction,
    ItemCatalog,
    RatingGraph,
    Weighting,
    build_graph,
    filter_min_degree,
    resolve_release_dates,
)
from .metrics import (
    ImbalanceConfig,
    RankedList,
    auc,
    imbalance,
    ndcg,
    precision_recall,
    top_list,
)
from .ranking import DISPLAY_NAMES, WEIGHTING_FOR, ConvergenceConfig, ScoreVector, rank
from .rebalance import RebalanceConfig, assign_windows, rebalance_scores

log = logging.getLogger(__name__)

METRICS = ("precision", "recall", "auc", "ndcg", "imbalance")


@dataclass(frozen=True)
class GroundTruth:
    """Benchmark items, optionally with the year each was awarded."""

    items: tuple[str, ...]
    award_year: dict[str, int] | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if len(set(self.items)) != len(self.items):
            raise ValueError("ground-truth ids must be unique")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __contains__(self, item: object) -> bool:
        return item in self.items

    @property
    def by_year(self) -> bool:
        return bool(self.award_year)


def load_ground_truth(path: str | Path, catalog: ItemCatalog | None = None, label: str = "") -> GroundTruth:
    """Read ``item_id[,award_year]`` rows; drop duplicates and items unknown to ``catalog``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"ground-truth file not found: {path}")
    known = set(catalog.items) if catalog is not None else None
    items: list[str] = []
    years: dict[str, int] = {}
    dropped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            item = row[0].strip()
            if lineno == 1 and item in ("item", "item_id"):
                continue
            if known is not None and item not in known:
                dropped += 1
                continue
            if item in years or item in items:
                continue
            items.append(item)
            if len(row) > 1 and row[1].strip():
                years[item] = int(row[1])
    if dropped:
        log.warning("%s: %d ground-truth item(s) not in catalog, dropped", path, dropped)
    if not items:
        raise ValueError(f"{path}: no ground-truth items left after matching the catalog")
    return GroundTruth(tuple(items), years or None, label or path.stem)


def write_ground_truth(path: str | Path, truth: GroundTruth) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if truth.award_year:
            w.writerow(["item_id", "award_year"])
            for it in truth.items:
                w.writerow([it, truth.award_year.get(it, "")])
        else:
            w.writerow(["item_id"])
            for it in truth.items:
                w.writerow([it])


@dataclass(frozen=True)
class MetricConfig:
    top_fraction: float = 0.01
    groups: int = 40
    ndcg_depth: int | None = None  # None: the top-list length


@dataclass
class EvalReport:
    dataset: str
    algorithm: str
    weighting: dict
    rebalance: dict | str
    top_fraction: float
    metrics: dict[str, float | None]
    not_applicable: dict[str, str]
    group_counts: list[int]
    recall_by_year: dict[int, dict] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        name = DISPLAY_NAMES.get(self.algorithm, self.algorithm)
        return name if self.rebalance == "none" else f"RB-{name}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["label"] = self.label
        d["recall_by_year"] = {str(k): v for k, v in self.recall_by_year.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def rows(self) -> list[dict]:
        rb = self.rebalance if self.rebalance == "none" else f"window={self.rebalance['window']}"
        out = []
        for m in METRICS:
            out.append(
                {
                    "dataset": self.dataset,
                    "algorithm": self.algorithm,
                    "rebalance": rb,
                    "metric": m,
                    "value": "" if self.metrics.get(m) is None else repr(self.metrics[m]),
                    "note": self.not_applicable.get(m, ""),
                }
            )
        return out


def write_reports(json_path: str | Path, reports: Sequence[EvalReport]) -> Path:
    """JSON list of reports plus a flat ``report.csv`` next to it."""
    json_path = Path(json_path)
    payload = [r.to_dict() for r in reports]
    atomic_write(json_path, json.dumps(payload if len(payload) != 1 else payload[0], indent=2, sort_keys=True))
    csv_path = json_path.with_name("report.csv")
    rows = [row for r in reports for row in r.rows()]
    atomic_write_csv(csv_path, ["dataset", "algorithm", "rebalance", "metric", "value", "note"], rows)
    return csv_path


def _guard(name: str, fn, metrics: dict, na: dict):
    try:
        return fn()
    except (ValueError, KeyError) as exc:
        metrics[name] = None
        na[name] = str(exc)
        return None


def score_report(
    scores: ScoreVector,
    catalog: ItemCatalog,
    truth: GroundTruth | None,
    metric_cfg: MetricConfig,
) -> tuple[dict[str, float | None], dict[str, str], list[int]]:
    ranked = RankedList.from_score_vector(scores)
    top = top_list(ranked, metric_cfg.top_fraction)
    metrics: dict[str, float | None] = {}
    na: dict[str, str] = {}
    if truth is None:
        for m in ("precision", "recall", "auc", "ndcg"):
            metrics[m] = None
            na[m] = "no ground truth supplied"
    else:
        known = set(scores.items)
        gt = [t for t in truth.items if t in known]
        pr = _guard("precision", lambda: precision_recall(top, gt), metrics, na)
        if pr is None:
            na["recall"] = na["precision"]
            metrics["recall"] = None
        else:
            metrics["precision"], metrics["recall"] = pr
        metrics["auc"] = _guard("auc", lambda: auc(ranked, gt), metrics, na)
        depth = metric_cfg.ndcg_depth or len(top)
        metrics["ndcg"] = _guard("ndcg", lambda: ndcg(ranked, gt, depth), metrics, na)
    imb = _guard(
        "imbalance",
        lambda: imbalance(ranked, catalog, ImbalanceConfig(metric_cfg.groups, metric_cfg.top_fraction)),
        metrics,
        na,
    )
    counts: list[int] = []
    if imb is not None:
        metrics["imbalance"] = imb.value
        counts = list(imb.counts)
    return metrics, na, counts


def run_manifest(scores: ScoreVector, graph: RatingGraph, cfg: ConvergenceConfig, **extra) -> dict:
    m = {
        "algorithm": scores.algorithm,
        "weighting": graph.weighting.describe(),
        "seed": cfg.seed,
        "threshold": cfg.threshold,
        "max_iterations": cfg.max_iterations,
        "iterations": scores.iterations,
        "converged": scores.converged,
        "components": scores.components,
        "users": graph.n_users,
        "items": graph.n_items,
        "edges": graph.n_edges,
        "tool_version": __version__,
    }
    m.update(extra)
    return m


def evaluate(
    graph: RatingGraph,
    catalog: ItemCatalog,
    algorithm: str,
    rebalance: RebalanceConfig | None,
    truth: GroundTruth | None,
    metric_cfg: MetricConfig | None = None,
    cfg: ConvergenceConfig | None = None,
    dataset: str = "",
    scores: ScoreVector | None = None,
) -> EvalReport:
    """Rank, optionally rebalance, and score one configuration.

    Pass precomputed raw ``scores`` to skip the ranking step.
    """
    metric_cfg = metric_cfg or MetricConfig()
    cfg = cfg or ConvergenceConfig()
    try:
        raw = scores if scores is not None else rank(algorithm, graph, cfg)
        final = raw
        if rebalance is not None:
            final = rebalance_scores(raw, assign_windows(catalog, rebalance.window), rebalance)
        metrics, na, counts = score_report(final, catalog, truth, metric_cfg)
    except Exception as exc:
        raise type(exc)(f"evaluating {algorithm} on {dataset or 'dataset'}: {exc}") from exc
    if not raw.converged:
        log.warning("%s did not converge; report flagged", algorithm)
    return EvalReport(
        dataset=dataset,
        algorithm=algorithm,
        weighting=graph.weighting.describe(),
        rebalance="none" if rebalance is None else asdict(rebalance),
        top_fraction=metric_cfg.top_fraction,
        metrics=metrics,
        not_applicable=na,
        group_counts=counts,
        manifest=run_manifest(raw, graph, cfg, groups=metric_cfg.groups, truth=truth.label if truth else None),
    )


def graph_for(
    algorithm: str,
    interactions: Sequence[Interaction],
    now: int | None = None,
    delta: float = 0.85,
    rate: float | None = None,
) -> RatingGraph:
    """Build the graph with the edge weighting ``algorithm`` expects."""
    if WEIGHTING_FOR[algorithm] == "time-decay":
        now = max(x.timestamp for x in interactions) if now is None else now
        kw = {} if rate is None else {"rate": rate}
        return build_graph(interactions, Weighting.time_decay(now, delta, **kw))
    return build_graph(interactions)


def evaluate_grid(
    interactions: Sequence[Interaction],
    metadata: Mapping[str, int] | None,
    truth: GroundTruth | None,
    algorithms: Iterable[str],
    rebalance: RebalanceConfig,
    metric_cfg: MetricConfig | None = None,
    cfg: ConvergenceConfig | None = None,
    dataset: str = "",
    now: int | None = None,
) -> list[EvalReport]:
    """Every algorithm raw and rebalanced: the full accuracy + imbalance table."""
    reports = []
    for algo in algorithms:
        g = graph_for(algo, interactions, now)
        cat = resolve_release_dates(g, metadata)
        raw = rank(algo, g, cfg or ConvergenceConfig())
        for rb in (None, rebalance):
            reports.append(evaluate(g, cat, algo, rb, truth, metric_cfg, cfg, dataset, scores=raw))
    return reports


def year_cutoff(year: int) -> int:
    """Last second of Dec 31 of ``year - 1``, UTC."""
    return int(dt.datetime(year, 1, 1, tzinfo=dt.timezone.utc).timestamp()) - 1


@dataclass(frozen=True)
class YearRecall:
    year: int
    recall: float | None
    truth_in_snapshot: int
    top_size: int
    note: str = ""


def snapshot(graph: RatingGraph, cutoff: int, min_user: int = 1, min_item: int = 1) -> list[Interaction]:
    kept = [x for x in graph.interactions() if x.timestamp <= cutoff]
    return filter_min_degree(kept, min_user, min_item)


def recall_by_year(
    graph: RatingGraph,
    catalog: ItemCatalog,
    algorithm: str,
    rebalance: RebalanceConfig | None,
    truth: GroundTruth,
    top_fraction: float = 0.01,
    cfg: ConvergenceConfig | None = None,
    min_user: int = 1,
    min_item: int = 1,
) -> dict[int, YearRecall]:
    """Recall of each award year's items, ranking only data available before that year.

    Snapshots keep edges up to Dec 31 of the previous year, re-apply the
    degree filter, and take the top fraction of the snapshot's own items.
    Award items missing from a snapshot are left out of that year's count.
    """
    if not truth.award_year:
        raise ValueError("ground truth has no award years")
    cfg = cfg or ConvergenceConfig()
    release = catalog.release_of()
    out: dict[int, YearRecall] = {}
    for year in sorted(set(truth.award_year.values())):
        cut = year_cutoff(year)
        inter = snapshot(graph, cut, min_user, min_item)
        awarded = [t for t in truth.items if truth.award_year.get(t) == year]
        if not inter:
            out[year] = YearRecall(year, None, 0, 0, "empty snapshot")
            continue
        if graph.weighting.kind == "time-decay":
            w = graph.weighting
            g = build_graph(inter, Weighting.time_decay(max(x.timestamp for x in inter), w.delta, w.rate))
        else:
            g = build_graph(inter)
        cat = resolve_release_dates(g, {it: release[it] for it in g.items if it in release})
        present = [t for t in awarded if t in set(g.items)]
        if not present:
            out[year] = YearRecall(year, None, 0, 0, "no award items in snapshot")
            continue
        sv = rank(algorithm, g, cfg)
        if rebalance is not None:
            sv = rebalance_scores(sv, assign_windows(cat, rebalance.window), rebalance)
        top = top_list(RankedList.from_score_vector(sv), top_fraction)
        _, rec = precision_recall(top, present)
        out[year] = YearRecall(year, rec, len(present), len(top))
    return out


def recall_by_year_table(
    graph: RatingGraph,
    catalog: ItemCatalog,
    algorithm: str,
    rebalance: RebalanceConfig,
    truth: GroundTruth,
    top_fraction: float = 0.01,
    cfg: ConvergenceConfig | None = None,
    min_user: int = 1,
    min_item: int = 1,
) -> list[dict]:
    raw = recall_by_year(graph, catalog, algorithm, None, truth, top_fraction, cfg, min_user, min_item)
    rb = recall_by_year(graph, catalog, algorithm, rebalance, truth, top_fraction, cfg, min_user, min_item)
    return [{"year": y, "recall_raw": raw[y].recall, "recall_rebalanced": rb[y].recall} for y in sorted(raw)]


@dataclass(frozen=True)
class SweepPoint:
    window: int
    raw_imbalance: float
    rebalanced_imbalance: float

    @property
    def relative(self) -> float:
        if self.raw_imbalance == 0:
            return math.nan
        return self.rebalanced_imbalance / self.raw_imbalance


def sweep_window(
    graph: RatingGraph,
    catalog: ItemCatalog,
    algorithm: str,
    windows: Sequence[int],
    metric_cfg: MetricConfig | None = None,
    cfg: ConvergenceConfig | None = None,
    scores: ScoreVector | None = None,
) -> list[SweepPoint]:
    """Imbalance after rebalancing with each window size, relative to the raw ranking.

    The ranker runs once; every window reuses its raw scores.
    """
    metric_cfg = metric_cfg or MetricConfig()
    for w in windows:
        if w < 2 or w % 2:
            raise ValueError(f"window sizes must be even and >= 2, got {w}")
    imb_cfg = ImbalanceConfig(metric_cfg.groups, metric_cfg.top_fraction)
    raw = scores if scores is not None else rank(algorithm, graph, cfg or ConvergenceConfig())
    raw_imb = imbalance(RankedList.from_score_vector(raw), catalog, imb_cfg).value
    points = []
    for w in windows:
        rb = rebalance_scores(raw, assign_windows(catalog, w), RebalanceConfig(w))
        points.append(SweepPoint(w, raw_imb, imbalance(RankedList.from_score_vector(rb), catalog, imb_cfg).value))
    return points


def sweep_rows(points: Sequence[SweepPoint]) -> list[dict]:
    return [
        {
            "delta_p": p.window,
            "raw_imbalance": repr(p.raw_imbalance),
            "rebalanced_imbalance": repr(p.rebalanced_imbalance),
            "relative_imbalance": repr(p.relative),
        }
        for p in points
    ]


def score_rows(scores: ScoreVector) -> list[dict]:
    """Score-file rows best-first; adds ``raw_score`` for rebalanced vectors."""
    ranked = RankedList.from_score_vector(scores)
    raw = None if scores.raw_item_scores is None else dict(zip(scores.items, scores.raw_item_scores.tolist()))
    rows = []
    for pos, (it, s) in enumerate(zip(ranked.items, ranked.scores.tolist()), start=1):
        row = {"item_id": it, "score": repr(s), "rank": pos}
        if raw is not None:
            row["raw_score"] = repr(raw[it])
        rows.append(row)
    return rows


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def atomic_write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Mapping]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(header), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    tmp.replace(path)


def read_scores(path: str | Path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scores file not found: {path}")
    items, vals = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            items.append(row["item_id"])
            vals.append(float(row["score"]))
    return items, np.array(vals)
