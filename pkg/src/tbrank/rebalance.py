"""Time rebalancing: z-score each item against its release-time neighbours."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .graph import ItemCatalog
from .ranking import ScoreVector


@dataclass(frozen=True)
class RebalanceConfig:
    window: int = 100
    fallback: float = 0.0

    def __post_init__(self) -> None:
        if self.window < 2 or self.window % 2:
            raise ValueError(f"window must be an even integer >= 2, got {self.window}")


@dataclass(frozen=True)
class TimeWindow:
    members: tuple[str, ...]
    mean: float
    std: float


@dataclass(frozen=True, eq=False)
class WindowAssignment:
    """Sliding windows over the release-ordered catalog.

    The item at sorted position k owns positions ``start[k] .. start[k] + size - 1``.
    """

    order: tuple[str, ...]
    position: dict[str, int]
    start: np.ndarray
    size: int
    window: int

    def __len__(self) -> int:
        return len(self.order)

    def members(self, item: str) -> tuple[str, ...]:
        s = int(self.start[self.position[item]])
        return self.order[s : s + self.size]


def assign_windows(catalog: ItemCatalog, window: int) -> WindowAssignment:
    """Give each item the ``window // 2`` older and newer items around it.

    Near either end of the timeline the window slides inward so that it
    always holds ``min(n, window + 1)`` items.
    """
    if window < 2 or window % 2:
        raise ValueError(f"window must be an even integer >= 2, got {window}")
    order = tuple(catalog.ordered_items())
    n = len(order)
    size = min(n, window + 1)
    k = np.arange(n)
    start = np.clip(k - window // 2, 0, max(n - 1 - window, 0))
    start.flags.writeable = False
    return WindowAssignment(order, {it: p for p, it in enumerate(order)}, start, size, window)


def _scores_in_order(scores: ScoreVector, windows: WindowAssignment) -> np.ndarray:
    for it in scores.items:
        if it not in windows.position:
            raise KeyError(f"item {it!r} has no time window")
    lookup = dict(zip(scores.items, scores.item_scores))
    missing = [it for it in windows.order if it not in lookup]
    if missing:
        raise KeyError(f"window member {missing[0]!r} has no score ({len(missing)} missing)")
    return np.array([lookup[it] for it in windows.order], dtype=float)


def _window_stats(x: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, population std, and a constant-window flag for every distinct window start."""
    if size == 0:
        empty = np.zeros(0)
        return empty, empty, empty.astype(bool)
    view = sliding_window_view(x, size)
    mean = view.mean(axis=1)
    std = view.std(axis=1)
    const = view.max(axis=1) == view.min(axis=1)
    return mean, std, const


def window_stats(scores: ScoreVector, windows: WindowAssignment) -> dict[str, TimeWindow]:
    x = _scores_in_order(scores, windows)
    mean, std, const = _window_stats(x, windows.size)
    out = {}
    for p, it in enumerate(windows.order):
        s = int(windows.start[p])
        out[it] = TimeWindow(windows.order[s : s + windows.size], float(mean[s]), 0.0 if const[s] else float(std[s]))
    return out


def rebalance_scores(
    scores: ScoreVector, windows: WindowAssignment, cfg: RebalanceConfig | None = None
) -> ScoreVector:
    """Replace each item score by its z-score within its window.

    Windows whose scores are all identical give ``cfg.fallback``. User
    scores pass through; the raw item scores are kept on the result.
    """
    cfg = cfg or RebalanceConfig(windows.window)
    x = _scores_in_order(scores, windows)
    mean, std, const = _window_stats(x, windows.size)
    s = windows.start
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(const[s], cfg.fallback, (x - mean[s]) / std[s])
    by_item = dict(zip(windows.order, z))
    out = np.array([by_item[it] for it in scores.items], dtype=float)
    return replace(
        scores,
        item_scores=out,
        raw_item_scores=scores.item_scores,
        algorithm=f"rb-{scores.algorithm}" if scores.algorithm else "rb",
    )


def rebalance(scores: ScoreVector, catalog: ItemCatalog, cfg: RebalanceConfig | None = None) -> ScoreVector:
    cfg = cfg or RebalanceConfig()
    return rebalance_scores(scores, assign_windows(catalog, cfg.window), cfg)
