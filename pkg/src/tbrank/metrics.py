"""Accuracy metrics against a ground-truth set, and the time-imbalance metric."""

from __future__ import annotations

import math
from collections.abc import Collection, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .graph import ItemCatalog
from .ranking import ScoreVector


@dataclass(frozen=True, eq=False)
class RankedList:
    """Items best-first. Ties in score are broken by ascending item id."""

    items: tuple[str, ...]
    scores: np.ndarray

    @classmethod
    def from_scores(cls, items: Sequence[str], scores: Sequence[float]) -> RankedList:
        ids = np.array(items, dtype=str)
        vals = np.asarray(scores, dtype=float)
        if len(set(items)) != len(ids):
            raise ValueError("duplicate item ids in ranking")
        by_id = np.argsort(ids, kind="stable")
        order = by_id[np.argsort(-vals[by_id], kind="stable")]
        return cls(tuple(ids[order].tolist()), vals[order])

    @classmethod
    def from_score_vector(cls, sv: ScoreVector) -> RankedList:
        return cls.from_scores(sv.items, sv.item_scores)

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class ImbalanceConfig:
    groups: int = 40
    top_fraction: float = 0.01

    def __post_init__(self) -> None:
        if self.groups < 2:
            raise ValueError("need at least 2 groups")
        if not 0.0 < self.top_fraction < 1.0:
            raise ValueError("top fraction must be in (0, 1)")


@dataclass(frozen=True)
class ImbalanceResult:
    value: float
    counts: tuple[int, ...]
    sigma: float
    sigma0: float
    expected: float


def top_size(m: int, fraction: float) -> int:
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"top fraction must be in (0, 1], got {fraction}")
    # guard against 0.01 * 100 = 1.0000000000000002 style round-up
    return min(m, math.ceil(round(m * fraction, 9)))


def top_list(ranked: RankedList, fraction: float) -> list[str]:
    return list(ranked.items[: top_size(len(ranked), fraction)])


def precision_recall(top: Collection[str], truth: Collection[str]) -> tuple[float, float]:
    if not top:
        raise ValueError("precision undefined for an empty top list")
    if not truth:
        raise ValueError("recall undefined for an empty ground truth")
    hits = len(set(top) & set(truth))
    return hits / len(set(top)), hits / len(set(truth))


def _split(ranked: RankedList, truth: Collection[str]) -> np.ndarray:
    truth = set(truth)
    mask = np.array([it in truth for it in ranked.items], dtype=bool)
    if not mask.any():
        raise ValueError("AUC undefined: no ground-truth item in the ranking")
    if mask.all():
        raise ValueError("AUC undefined: every ranked item is ground truth")
    return mask


def auc(ranked: RankedList, truth: Collection[str]) -> float:
    """Mann-Whitney form: average-rank sum of truth items, ties count half."""
    mask = _split(ranked, truth)
    ranks = rankdata(ranked.scores, method="average")
    n_pos = int(mask.sum())
    n_neg = len(mask) - n_pos
    u = ranks[mask].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pairwise(ranked: RankedList, truth: Collection[str]) -> float:
    """Direct average over all (truth, non-truth) pairs. Quadratic; for checking."""
    mask = _split(ranked, truth)
    pos = ranked.scores[mask][:, None]
    neg = ranked.scores[~mask][None, :]
    wins = (pos > neg).sum() + 0.5 * (pos == neg).sum()
    return float(wins / (pos.size * neg.size))


def ndcg(ranked: RankedList, truth: Collection[str], depth: int) -> float:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    truth = set(truth)
    if not truth:
        raise ValueError("NDCG undefined for an empty ground truth")
    dcg = sum(1.0 / math.log2(pos + 1) for pos, it in enumerate(ranked.items[:depth], start=1) if it in truth)
    idcg = sum(1.0 / math.log2(pos + 1) for pos in range(1, min(depth, len(truth)) + 1))
    return dcg / idcg


def group_sizes(m: int, groups: int) -> np.ndarray:
    """Near-equal contiguous group sizes; the first ``m % groups`` get one extra."""
    base, extra = divmod(m, groups)
    return np.array([base + 1] * extra + [base] * (groups - extra), dtype=np.int64)


def imbalance(ranked: RankedList, catalog: ItemCatalog, cfg: ImbalanceConfig | None = None) -> ImbalanceResult:
    """Deviation of per-time-group top-L counts from the hypergeometric spread.

    Items are split oldest-first into ``groups`` contiguous groups. With m
    items and top fraction L, the ideal spread is
    sigma0 = sqrt(mL/S * (1 - 1/S) * (1 - L) * m / (m - 1)); the result is
    |sigma / sigma0 - 1| where sigma is the RMS deviation of group counts
    from mL/S. A perfectly even split therefore scores 1, not 0.
    """
    cfg = cfg or ImbalanceConfig()
    m = len(ranked)
    s, frac = cfg.groups, cfg.top_fraction
    if s > m:
        raise ValueError(f"{s} groups but only {m} items")
    ranked_set = set(ranked.items)
    release = catalog.release_of()
    missing = ranked_set - release.keys()
    if missing:
        raise KeyError(f"{len(missing)} ranked item(s) missing from catalog, e.g. {next(iter(missing))!r}")
    timeline = [it for it in catalog.ordered_items() if it in ranked_set]
    group_of = np.repeat(np.arange(s), group_sizes(m, s))
    group = dict(zip(timeline, group_of.tolist()))
    counts = np.zeros(s, dtype=np.int64)
    for it in top_list(ranked, frac):
        counts[group[it]] += 1
    expected = m * frac / s
    var0 = expected * (1 - 1 / s) * (1 - frac) * m / (m - 1)
    if not var0 > 0:
        raise ValueError("ideal spread is zero; imbalance undefined")
    sigma0 = math.sqrt(var0)
    sigma = math.sqrt(float(np.mean((counts - expected) ** 2)))
    return ImbalanceResult(abs(sigma / sigma0 - 1.0), tuple(counts.tolist()), sigma, sigma0, expected)
