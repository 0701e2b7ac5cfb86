"""Seeded synthetic rating networks with planted quality and popularity-driven time bias."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .graph import SECONDS_PER_YEAR, Interaction, iso_to_epoch
from .harness import GroundTruth


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the generator.

    Items arrive uniformly over ``horizon_years`` with latent quality
    q ~ U(quality_low, quality_high). User arrivals have density growing
    like t ** user_growth (0 gives uniform arrivals). On arrival a user
    browses ``browse`` random already-released items (all of them when
    ``browse`` is 0) and rates Poisson(edges_per_user) of those, at least
    one, drawn without replacement with weight (degree / scale + 1) ** beta * q.
    ``scale`` is the mean degree of released items when ``relative`` is
    set, else 1.

    The browse set caps how fast one item can grow; without it beta > 1
    concentrates nearly every rating on a handful of early items. Growing
    arrivals keep the earliest items from all becoming hubs.
    """

    n_items: int = 4000
    n_users: int = 20000
    edges_per_user: float = 20.0
    quality_low: float = 0.0
    quality_high: float = 1.0
    beta: float = 2.0
    horizon_years: float = 20.0
    noise: float = 0.5
    truth_fraction: float = 0.01
    strata: int = 10
    browse: int = 100
    relative: bool = True
    user_growth: float = 2.0
    start: str = "2000-01-01"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_items <= 0 or self.n_users <= 0:
            raise ValueError("item and user counts must be positive")
        if self.edges_per_user <= 0:
            raise ValueError("edges_per_user must be positive")
        if self.browse < 0:
            raise ValueError("browse must be >= 0")
        if self.edges_per_user > self.n_items or (self.browse and self.edges_per_user > self.browse):
            raise ValueError("edge budget infeasible: edges_per_user exceeds item count")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0.0 <= self.quality_low < self.quality_high <= 1.0:
            raise ValueError("quality bounds must satisfy 0 <= low < high <= 1")
        if self.user_growth < 0:
            raise ValueError("user_growth must be >= 0")
        if self.horizon_years <= 0 or self.noise < 0:
            raise ValueError("horizon must be positive and noise non-negative")
        if self.strata < 1:
            raise ValueError("strata must be >= 1")


@dataclass(frozen=True)
class SynthData:
    interactions: list[Interaction]
    metadata: dict[str, int]
    truth: GroundTruth
    quality: dict[str, float]


def _stratified_truth(ids: list[str], release: np.ndarray, q: np.ndarray, cfg: SynthConfig) -> GroundTruth:
    n = len(ids)
    per = max(1, round(n * cfg.truth_fraction / cfg.strata))
    order = np.argsort(release, kind="stable")
    chosen: list[int] = []
    for chunk in np.array_split(order, cfg.strata):
        best = chunk[np.argsort(-q[chunk], kind="stable")[:per]]
        chosen.extend(sorted(best.tolist(), key=lambda k: release[k]))
    # awarded the year after release, so the item is in the award-year snapshot
    years = {ids[k]: dt.datetime.fromtimestamp(int(release[k]), tz=dt.timezone.utc).year + 1 for k in chosen}
    return GroundTruth(tuple(ids[k] for k in chosen), years, "planted")


def generate_synthetic(cfg: SynthConfig) -> SynthData:
    """Draw one dataset. Identical configs give identical output."""
    rng = np.random.default_rng(cfg.seed)
    t0 = iso_to_epoch(cfg.start)
    span = cfg.horizon_years * SECONDS_PER_YEAR
    width = len(str(cfg.n_items - 1))
    uwidth = len(str(cfg.n_users - 1))

    release = np.sort(t0 + np.floor(rng.uniform(0, span, cfg.n_items)).astype(np.int64))
    q = rng.uniform(cfg.quality_low, cfg.quality_high, cfg.n_items)
    # arrival density grows like t ** user_growth
    frac = rng.uniform(0, 1, cfg.n_users) ** (1.0 / (1.0 + cfg.user_growth))
    arrive = np.sort(t0 + np.floor(frac * span).astype(np.int64))
    k_draw = np.maximum(rng.poisson(cfg.edges_per_user, cfg.n_users), 1)
    item_ids = [f"i{k:0{width}d}" for k in range(cfg.n_items)]

    degree = np.zeros(cfg.n_items)
    log_q = np.log(np.maximum(q, 1e-300))
    users, items, ratings, stamps = [], [], [], []
    for u in range(cfg.n_users):
        avail = int(np.searchsorted(release, arrive[u], side="right"))
        if avail == 0:
            continue
        if cfg.browse and cfg.browse < avail:
            seen = rng.choice(avail, cfg.browse, replace=False)
        else:
            seen = np.arange(avail)
        k = min(int(k_draw[u]), len(seen))
        # Gumbel top-k == sequential sampling without replacement, weight (deg+1)^beta * q
        scale = max(degree[:avail].mean(), 1.0) if cfg.relative else 1.0
        keys = cfg.beta * np.log1p(degree[seen] / scale) + log_q[seen] + rng.gumbel(size=len(seen))
        picked = seen[np.argpartition(-keys, k - 1)[:k]] if k < len(seen) else seen
        picked = np.sort(picked)
        degree[picked] += 1
        users.append(np.full(k, u))
        items.append(picked)
        stamps.append(np.full(k, arrive[u]))
        noise = rng.normal(0.0, cfg.noise, k) if cfg.noise > 0 else np.zeros(k)
        ratings.append(np.clip(np.round(1 + 4 * q[picked] + noise), 1, 5))

    if not users:
        raise ValueError("no user arrived after the first item release; nothing generated")
    users_a = np.concatenate(users)
    items_a = np.concatenate(items)
    ratings_a = np.concatenate(ratings)
    stamps_a = np.concatenate(stamps)
    interactions = [
        Interaction(f"u{u:0{uwidth}d}", item_ids[i], float(r), int(t))
        for u, i, r, t in zip(users_a.tolist(), items_a.tolist(), ratings_a.tolist(), stamps_a.tolist())
    ]
    metadata = dict(zip(item_ids, release.tolist()))
    truth = _stratified_truth(item_ids, release, q, cfg)
    return SynthData(interactions, metadata, truth, dict(zip(item_ids, q.tolist())))
