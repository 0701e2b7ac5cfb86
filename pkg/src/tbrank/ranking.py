"""Iterative item rankers on a RatingGraph.

All rankers share one alternating user/item sweep loop. BiRank and BiHITS
have one fixed point per connected component, so they are solved per
component and stitched back together with each component weighted by its
share of the total edge weight; this makes the result seed-independent on
disconnected graphs as well.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .graph import RatingGraph

log = logging.getLogger(__name__)


class RankingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConvergenceConfig:
    threshold: float = 1e-8
    max_iterations: int = 1000
    seed: int = 42

    def __post_init__(self) -> None:
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True, eq=False)
class ScoreVector:
    items: tuple[str, ...]
    users: tuple[str, ...]
    item_scores: np.ndarray
    user_scores: np.ndarray
    iterations: int
    converged: bool
    algorithm: str = ""
    components: int = 1
    raw_item_scores: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.items, self.item_scores.tolist()))


Step = Callable[[np.ndarray], np.ndarray]


def _l2(x: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(x)
    return x / n if n > 0 else x


def _l1(x: np.ndarray) -> np.ndarray:
    s = x.sum()
    return x / s if s > 0 else x


def _sweep(
    user_step: Step,
    item_step: Step,
    r: np.ndarray,
    f: np.ndarray,
    cfg: ConvergenceConfig,
    normalize: Callable[[np.ndarray], np.ndarray] | None,
    name: str,
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Alternate R <- user_step(F), F <- item_step(R) until both moves drop below threshold."""
    norm = normalize or (lambda x: x)
    for k in range(1, cfg.max_iterations + 1):
        r_new = norm(user_step(f))
        f_new = norm(item_step(r_new))
        if not (np.all(np.isfinite(r_new)) and np.all(np.isfinite(f_new))):
            raise RankingError(f"{name}: non-finite scores at iteration {k}")
        dr = np.linalg.norm(r_new - r)
        df = np.linalg.norm(f_new - f)
        r, f = r_new, f_new
        if dr < cfg.threshold and df < cfg.threshold:
            return r, f, k, True
    log.warning("%s did not converge in %d iterations", name, cfg.max_iterations)
    return r, f, cfg.max_iterations, False


def _check(graph: RatingGraph) -> None:
    if graph.n_users == 0 or graph.n_items == 0:
        raise RankingError("empty graph")
    if np.any(graph.user_degree <= 0) or np.any(graph.item_degree <= 0):
        raise RankingError("graph has isolated nodes (zero weighted degree)")


def _components(graph: RatingGraph) -> tuple[int, np.ndarray, np.ndarray]:
    n_u = graph.n_users
    adj = sp.bmat([[None, graph.matrix], [graph.matrix.T, None]], format="csr")
    n, labels = connected_components(adj, directed=False)
    return n, labels[:n_u], labels[n_u:]


def _per_component(
    graph: RatingGraph,
    cfg: ConvergenceConfig,
    name: str,
    solve: Callable[[sp.csr_matrix, np.ndarray, np.ndarray, np.ndarray, np.ndarray], tuple],
    combine: Callable[[np.ndarray, float], np.ndarray],
) -> ScoreVector:
    _check(graph)
    rng = np.random.default_rng(cfg.seed)
    r0 = rng.uniform(0.0, 1.0, graph.n_users)
    f0 = rng.uniform(0.0, 1.0, graph.n_items)
    n_comp, ulab, ilab = _components(graph)
    if n_comp == 1:
        r, f, it, ok = solve(graph.matrix, graph.user_degree, graph.item_degree, r0, f0)
        return ScoreVector(graph.items, graph.users, f, r, it, ok, name, 1)

    log.info("%s: graph has %d connected components; ranking each separately", name, n_comp)
    total = graph.weights.sum()
    r_all = np.zeros(graph.n_users)
    f_all = np.zeros(graph.n_items)
    iters, ok_all = 0, True
    for c in range(n_comp):
        us = np.flatnonzero(ulab == c)
        its = np.flatnonzero(ilab == c)
        sub = graph.matrix[us][:, its]
        r, f, it, ok = solve(sub, graph.user_degree[us], graph.item_degree[its], r0[us], f0[its])
        share = sub.sum() / total
        r_all[us] = combine(r, share)
        f_all[its] = combine(f, share)
        iters = max(iters, it)
        ok_all = ok_all and ok
    return ScoreVector(graph.items, graph.users, f_all, r_all, iters, ok_all, name, n_comp)


def birank(graph: RatingGraph, cfg: ConvergenceConfig | None = None, name: str = "birank") -> ScoreVector:
    """Symmetric-normalized mutual reinforcement; item vector has unit L2 norm.

    R_i = sum_a w_ia / sqrt(d_i d_a) F_a and F_a = sum_i w_ia / sqrt(d_a d_i) R_i,
    each vector L2-normalized after its update.
    """
    cfg = cfg or ConvergenceConfig()

    def solve(w, du, di, r0, f0):
        s = sp.diags(1.0 / np.sqrt(du)) @ w @ sp.diags(1.0 / np.sqrt(di))
        s = s.tocsr()
        st = s.T.tocsr()
        return _sweep(lambda f: s @ f, lambda r: st @ r, _l2(r0), _l2(f0), cfg, _l2, name)

    return _per_component(graph, cfg, name, solve, lambda x, share: x * np.sqrt(share))


def birank_time(graph: RatingGraph, cfg: ConvergenceConfig | None = None) -> ScoreVector:
    """BiRank on a graph whose edges carry time-decay weights."""
    if graph.weighting.kind != "time-decay":
        raise ValueError("birank_time needs a graph built with time-decay weighting")
    return birank(graph, cfg, name="birank-t")


def bihits(graph: RatingGraph, cfg: ConvergenceConfig | None = None) -> ScoreVector:
    """Co-HITS style propagation with transition normalization, L1 per sweep.

    R_i = sum_a (w_ia / d_a) F_a, F_a = sum_i (w_ia / d_i) R_i.
    """
    cfg = cfg or ConvergenceConfig()

    def solve(w, du, di, r0, f0):
        to_user = (w @ sp.diags(1.0 / di)).tocsr()
        to_item = (sp.diags(1.0 / du) @ w).T.tocsr()
        return _sweep(lambda f: to_user @ f, lambda r: to_item @ r, _l1(r0), _l1(f0), cfg, _l1, "bihits")

    return _per_component(graph, cfg, "bihits", solve, lambda x, share: x * share)


def bgrm(graph: RatingGraph, cfg: ConvergenceConfig | None = None, damping: float = 0.85) -> ScoreVector:
    """Damped bipartite reinforcement towards uniform priors.

    R = damping * P_u F + (1 - damping) / U and F = damping * P_v R + (1 - damping) / I
    with row-stochastic transitions. Scores are the raw fixed point (not rescaled).
    """
    cfg = cfg or ConvergenceConfig()
    if not 0.0 <= damping < 1.0:
        raise ValueError(f"damping must be in [0, 1), got {damping}")
    _check(graph)
    w = graph.matrix
    p_u = (sp.diags(1.0 / graph.user_degree) @ w).tocsr()
    p_v = (sp.diags(1.0 / graph.item_degree) @ w.T).tocsr()
    r_prior = np.full(graph.n_users, 1.0 / graph.n_users)
    f_prior = np.full(graph.n_items, 1.0 / graph.n_items)
    rng = np.random.default_rng(cfg.seed)
    r0 = rng.uniform(0.0, 1.0, graph.n_users)
    f0 = rng.uniform(0.0, 1.0, graph.n_items)
    r, f, it, ok = _sweep(
        lambda f: damping * (p_u @ f) + (1 - damping) * r_prior,
        lambda r: damping * (p_v @ r) + (1 - damping) * f_prior,
        r0,
        f0,
        cfg,
        None,
        "bgrm",
    )
    return ScoreVector(graph.items, graph.users, f, r, it, ok, "bgrm")


def qrep(graph: RatingGraph, cfg: ConvergenceConfig | None = None, eps: float = 1e-3) -> ScoreVector:
    """Quality-reputation refinement on raw ratings.

    Item quality starts at its mean rating. Each user's reputation is the
    inverse of (mean absolute deviation from current qualities + eps); each
    quality is the reputation-weighted mean rating. Stops when no quality
    moves by ``threshold`` or more. Quality stays on the rating scale;
    reputations are normalized to sum to one.
    """
    cfg = cfg or ConvergenceConfig()
    _check(graph)
    u, i, r = graph.edge_user, graph.edge_item, graph.ratings
    n_u, n_i = graph.n_users, graph.n_items
    count_u = np.bincount(u, minlength=n_u)
    q = np.bincount(i, weights=r, minlength=n_i) / np.bincount(i, minlength=n_i)
    rep = np.ones(n_u)
    ok = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        dev = np.bincount(u, weights=np.abs(r - q[i]), minlength=n_u) / count_u
        rep = 1.0 / (dev + eps)
        q_new = np.bincount(i, weights=rep[u] * r, minlength=n_i) / np.bincount(i, weights=rep[u], minlength=n_i)
        if not np.all(np.isfinite(q_new)):
            raise RankingError(f"qrep: non-finite quality at iteration {it}")
        moved = np.max(np.abs(q_new - q))
        q = q_new
        if moved < cfg.threshold:
            ok = True
            break
    if not ok:
        log.warning("qrep did not converge in %d iterations", cfg.max_iterations)
    return ScoreVector(graph.items, graph.users, q, rep / rep.sum(), it, ok, "qrep")


ALGORITHMS: dict[str, Callable[..., ScoreVector]] = {
    "birank-r": lambda g, cfg=None: birank(g, cfg, name="birank-r"),
    "birank-t": birank_time,
    "bihits": bihits,
    "qrep": qrep,
    "bgrm": bgrm,
}

WEIGHTING_FOR: dict[str, str] = {
    "birank-r": "rating",
    "birank-t": "time-decay",
    "bihits": "rating",
    "qrep": "rating",
    "bgrm": "rating",
}

DISPLAY_NAMES: dict[str, str] = {
    "birank-r": "BiRank_r",
    "birank-t": "BiRank_t",
    "bihits": "BiHITS",
    "qrep": "QRep",
    "bgrm": "BGRM",
}


def rank(algorithm: str, graph: RatingGraph, cfg: ConvergenceConfig | None = None) -> ScoreVector:
    try:
        fn = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}") from None
    return fn(graph, cfg)
