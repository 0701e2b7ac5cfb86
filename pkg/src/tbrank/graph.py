"""Rating interactions, cleaning, and the bipartite user-item graph."""

from __future__ import annotations

import csv
import datetime as dt
import logging
import warnings
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

SECONDS_PER_YEAR = 31_557_600  # 365.25 days
DEFAULT_SCALE = (1.0, 5.0)


@dataclass(frozen=True, slots=True)
class Interaction:
    user: str
    item: str
    rating: float
    timestamp: int


class Reject(NamedTuple):
    line: int
    reason: str
    raw: str


class LoadResult(NamedTuple):
    interactions: list[Interaction]
    rejects: list[Reject]


@dataclass(frozen=True)
class ColumnSchema:
    """Where to find each field in a CSV row: a header name or a 0-based position."""

    user: str | int = "user"
    item: str | int = "item"
    rating: str | int = "rating"
    timestamp: str | int = "timestamp"

    def fields(self) -> tuple[str | int, ...]:
        return (self.user, self.item, self.rating, self.timestamp)


def _parse_timestamp(cell: str) -> int:
    value = float(cell)
    if not np.isfinite(value) or value != int(value):
        raise ValueError(f"timestamp {cell!r} is not an integer")
    return int(value)


def _looks_like_header(row: Sequence[str], schema: ColumnSchema) -> bool:
    names = [f for f in schema.fields() if isinstance(f, str)]
    if names and all(n in row for n in names):
        return True
    try:
        float(row[_position(schema.rating, 2)])
        float(row[_position(schema.timestamp, 3)])
    except (ValueError, IndexError):
        return True
    return False


def _position(spec: str | int, default: int) -> int:
    return spec if isinstance(spec, int) else default


def load_interactions(
    path: str | Path,
    schema: ColumnSchema | None = None,
    scale: tuple[float, float] = DEFAULT_SCALE,
    header: bool | None = None,
    write_rejects: bool = True,
) -> LoadResult:
    """Parse a ratings CSV into interactions, in file order.

    The header is auto-detected unless ``header`` is given. When the schema
    names columns but the file has no header, the default order
    ``user,item,rating,timestamp`` is assumed. Rejected rows are returned
    with 1-based line numbers and, if ``write_rejects``, echoed to
    ``<path>.rejects``.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"interactions file not found: {path}")
    schema = schema or ColumnSchema()
    lo, hi = scale
    out: list[Interaction] = []
    rejects: list[Reject] = []

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        idx: list[int] | None = None
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if idx is None:
                has_header = _looks_like_header(row, schema) if header is None else header
                if has_header:
                    cols = [c.strip() for c in row]
                    idx = []
                    for f, default in zip(schema.fields(), range(4)):
                        if isinstance(f, int):
                            idx.append(f)
                        elif f in cols:
                            idx.append(cols.index(f))
                        else:
                            raise ValueError(f"column {f!r} missing from header of {path}")
                    continue
                idx = [_position(f, d) for f, d in zip(schema.fields(), range(4))]
            raw = ",".join(row)
            try:
                user, item, rating_s, ts_s = (row[i].strip() for i in idx)
            except IndexError:
                rejects.append(Reject(lineno, "too few columns", raw))
                continue
            if not user or not item:
                rejects.append(Reject(lineno, "empty user or item id", raw))
                continue
            try:
                rating = float(rating_s)
                if not np.isfinite(rating):
                    raise ValueError
            except ValueError:
                rejects.append(Reject(lineno, f"unparsable rating {rating_s!r}", raw))
                continue
            try:
                ts = _parse_timestamp(ts_s)
            except ValueError:
                rejects.append(Reject(lineno, f"unparsable timestamp {ts_s!r}", raw))
                continue
            if not lo <= rating <= hi:
                rejects.append(Reject(lineno, f"rating {rating:g} outside [{lo:g}, {hi:g}]", raw))
                continue
            if ts < 0:
                rejects.append(Reject(lineno, f"negative timestamp {ts}", raw))
                continue
            out.append(Interaction(user, item, rating, ts))

    if rejects:
        log.warning("%s: rejected %d row(s)", path, len(rejects))
        if write_rejects:
            with Path(f"{path}.rejects").open("w", encoding="utf-8") as fh:
                for r in rejects:
                    fh.write(f"{r.line}\t{r.reason}\t{r.raw}\n")
    return LoadResult(out, rejects)


def write_interactions(path: str | Path, interactions: Iterable[Interaction]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "item", "rating", "timestamp"])
        for x in interactions:
            w.writerow([x.user, x.item, f"{x.rating:g}", x.timestamp])


def merge_duplicates(interactions: Iterable[Interaction]) -> list[Interaction]:
    """Collapse repeated (user, item) pairs: mean rating, earliest timestamp.

    Output keeps the position of each pair's first occurrence.
    """
    acc: dict[tuple[str, str], list] = {}
    for x in interactions:
        key = (x.user, x.item)
        slot = acc.get(key)
        if slot is None:
            acc[key] = [x, x.rating, 1, x.timestamp]
        else:
            slot[1] += x.rating
            slot[2] += 1
            slot[3] = min(slot[3], x.timestamp)
    out = []
    for (user, item), (first, total, count, ts) in acc.items():
        if count == 1:
            out.append(first)
        else:
            out.append(Interaction(user, item, total / count, ts))
    return out


def filter_min_degree(
    interactions: Sequence[Interaction],
    min_user: int,
    min_item: int,
    single_pass: bool = False,
) -> list[Interaction]:
    """Drop users with < ``min_user`` and items with < ``min_item`` interactions.

    Peels to a fixed point by default, since removing items can push users
    below threshold and vice versa. ``single_pass`` applies both criteria
    once against the unfiltered counts.
    """
    if min_user < 0 or min_item < 0:
        raise ValueError("degree thresholds must be >= 0")
    if not interactions:
        return []
    _, u = np.unique(np.array([x.user for x in interactions], dtype=object), return_inverse=True)
    _, i = np.unique(np.array([x.item for x in interactions], dtype=object), return_inverse=True)
    keep = np.ones(len(interactions), dtype=bool)
    while True:
        du = np.bincount(u[keep], minlength=u.max() + 1)
        di = np.bincount(i[keep], minlength=i.max() + 1)
        new = keep & (du[u] >= min_user) & (di[i] >= min_item)
        if single_pass or np.array_equal(new, keep):
            keep = new
            break
        keep = new
    return [x for x, k in zip(interactions, keep) if k]


@dataclass(frozen=True)
class Weighting:
    """Edge weighting: raw ratings, or exponential time decay ``delta ** (rate * age)``.

    ``rate`` is in 1/seconds; the default is one unit of decay per year.
    """

    kind: str = "rating"
    delta: float = 0.85
    rate: float = 1.0 / SECONDS_PER_YEAR
    now: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("rating", "time-decay"):
            raise ValueError(f"unknown weighting {self.kind!r}")
        if self.kind == "time-decay":
            if not 0.0 < self.delta < 1.0:
                raise ValueError(f"delta must be in (0, 1), got {self.delta}")
            if self.rate <= 0:
                raise ValueError(f"decay rate must be > 0, got {self.rate}")
            if self.now is None:
                raise ValueError("time-decay weighting needs a reference instant 'now'")

    @classmethod
    def rating(cls) -> Weighting:
        return cls("rating")

    @classmethod
    def time_decay(cls, now: int, delta: float = 0.85, rate: float = 1.0 / SECONDS_PER_YEAR) -> Weighting:
        return cls("time-decay", delta, rate, int(now))

    def weights(self, ratings: np.ndarray, timestamps: np.ndarray) -> np.ndarray:
        if self.kind == "rating":
            return np.asarray(ratings, dtype=float).copy()
        age = self.now - np.asarray(timestamps, dtype=float)
        if np.any(age < 0):
            warnings.warn(
                f"{int(np.sum(age < 0))} edge(s) dated after now={self.now}; their weight exceeds 1",
                stacklevel=3,
            )
        return np.power(self.delta, self.rate * age)

    def describe(self) -> dict:
        if self.kind == "rating":
            return {"kind": "rating"}
        return {"kind": self.kind, "delta": self.delta, "rate_per_year": self.rate * SECONDS_PER_YEAR, "now": self.now}


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class RatingGraph:
    """Immutable weighted bipartite graph. Users and items are indexed in sorted-id order.

    ``matrix`` is the U x I CSR matrix of edge weights; edge arrays are in
    the same (user-major) order as the CSR data.
    """

    users: tuple[str, ...]
    items: tuple[str, ...]
    edge_user: np.ndarray
    edge_item: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray
    weights: np.ndarray
    weighting: Weighting
    matrix: sp.csr_matrix = field(repr=False)
    user_degree: np.ndarray = field(repr=False)
    item_degree: np.ndarray = field(repr=False)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_edges(self) -> int:
        return len(self.weights)

    def item_index(self) -> dict[str, int]:
        return {it: k for k, it in enumerate(self.items)}

    def interactions(self) -> Iterator[Interaction]:
        for u, i, r, t in zip(self.edge_user, self.edge_item, self.ratings, self.timestamps):
            yield Interaction(self.users[u], self.items[i], float(r), int(t))

    def reweighted(self, weighting: Weighting) -> RatingGraph:
        return _assemble(self.users, self.items, self.edge_user, self.edge_item, self.ratings, self.timestamps, weighting)


def _assemble(users, items, eu, ei, ratings, ts, weighting: Weighting) -> RatingGraph:
    w = weighting.weights(ratings, ts)
    mat = sp.csr_matrix((w, (eu, ei)), shape=(len(users), len(items)))
    mat.sort_indices()
    du = np.asarray(mat.sum(axis=1)).ravel()
    di = np.asarray(mat.sum(axis=0)).ravel()
    if np.any(du <= 0) or np.any(di <= 0):
        raise ValueError("graph has a node with non-positive weighted degree")
    return RatingGraph(
        users=tuple(users),
        items=tuple(items),
        edge_user=_frozen(np.asarray(eu, dtype=np.int64)),
        edge_item=_frozen(np.asarray(ei, dtype=np.int64)),
        ratings=_frozen(np.asarray(ratings, dtype=float)),
        timestamps=_frozen(np.asarray(ts, dtype=np.int64)),
        weights=_frozen(w),
        weighting=weighting,
        matrix=mat,
        user_degree=_frozen(du),
        item_degree=_frozen(di),
    )


def build_graph(interactions: Sequence[Interaction], weighting: Weighting | None = None) -> RatingGraph:
    """Build the weighted bipartite graph from duplicate-free interactions."""
    weighting = weighting or Weighting.rating()
    if not interactions:
        raise ValueError("cannot build a graph from zero interactions")
    users, eu = np.unique(np.array([x.user for x in interactions], dtype=object), return_inverse=True)
    items, ei = np.unique(np.array([x.item for x in interactions], dtype=object), return_inverse=True)
    ratings = np.fromiter((x.rating for x in interactions), dtype=float, count=len(interactions))
    ts = np.fromiter((x.timestamp for x in interactions), dtype=np.int64, count=len(interactions))
    pair = eu.astype(np.int64) * len(items) + ei
    order = np.argsort(pair, kind="stable")
    if np.any(np.diff(pair[order]) == 0):
        raise ValueError("duplicate (user, item) pairs; run merge_duplicates first")
    return _assemble(users, items, eu[order], ei[order], ratings[order], ts[order], weighting)


@dataclass(frozen=True, eq=False)
class ItemCatalog:
    """Release instant per item, aligned with the graph's item order."""

    items: tuple[str, ...]
    release: np.ndarray
    provenance: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.items)

    def release_of(self) -> dict[str, int]:
        return {it: int(t) for it, t in zip(self.items, self.release)}

    def order(self) -> np.ndarray:
        """Item positions sorted by release time, ties by item id."""
        by_id = np.argsort(np.array(self.items, dtype=str), kind="stable")
        return by_id[np.argsort(self.release[by_id], kind="stable")]

    def ordered_items(self) -> list[str]:
        return [self.items[k] for k in self.order()]

    def restrict(self, items: Iterable[str]) -> ItemCatalog:
        keep = set(items)
        idx = [k for k, it in enumerate(self.items) if it in keep]
        return ItemCatalog(
            tuple(self.items[k] for k in idx),
            _frozen(self.release[idx].copy()),
            tuple(self.provenance[k] for k in idx),
        )


def resolve_release_dates(graph: RatingGraph, metadata: Mapping[str, int] | None = None) -> ItemCatalog:
    """Release instant per item: metadata where known, else the item's first rating."""
    metadata = metadata or {}
    first = np.full(graph.n_items, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(first, graph.edge_item, graph.timestamps)
    release = np.empty(graph.n_items, dtype=np.int64)
    prov = []
    for k, it in enumerate(graph.items):
        if it in metadata:
            release[k] = int(metadata[it])
            prov.append("metadata")
        else:
            release[k] = first[k]
            prov.append("proxy-first-rating")
    return ItemCatalog(graph.items, _frozen(release), tuple(prov))


def iso_to_epoch(text: str) -> int:
    """ISO-8601 date or datetime to epoch seconds; bare dates are midnight UTC."""
    text = text.strip()
    try:
        d = dt.date.fromisoformat(text)
        moment = dt.datetime(d.year, d.month, d.day, tzinfo=dt.timezone.utc)
    except ValueError:
        moment = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
        if moment.tzinfo is None:
            moment = moment.replace(tzinfo=dt.timezone.utc)
    return int(moment.timestamp())


def epoch_to_iso(ts: int) -> str:
    return dt.datetime.fromtimestamp(int(ts), tz=dt.timezone.utc).date().isoformat()


def load_metadata(path: str | Path) -> dict[str, int]:
    """Read ``item,release_date`` CSV (header optional) into item -> epoch seconds."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"metadata file not found: {path}")
    out: dict[str, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            if lineno == 1 and row[0].strip() in ("item", "item_id"):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: expected item,release_date")
            try:
                out[row[0].strip()] = iso_to_epoch(row[1])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad date {row[1]!r}") from exc
    return out


def write_metadata(path: str | Path, metadata: Mapping[str, int]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item", "release_date"])
        for it, ts in metadata.items():
            w.writerow([it, dt.datetime.fromtimestamp(int(ts), tz=dt.timezone.utc).isoformat().replace("+00:00", "Z")])
