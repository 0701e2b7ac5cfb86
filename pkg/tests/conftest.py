import numpy as np
import pytest

from tbrank.graph import Interaction, build_graph

ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def record():
    def _record(name: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")

    return _record


def random_connected(rng: np.random.Generator, max_nodes: int = 30, ratings: bool = True) -> list[Interaction]:
    """Random connected bipartite rating graph with at most ``max_nodes`` nodes."""
    n_u = int(rng.integers(1, max_nodes // 2 + 1))
    n_i = int(rng.integers(1, max_nodes - n_u + 1))
    edges: set[tuple[int, int]] = {(0, 0)}
    # random spanning tree: each new node hangs off a placed node of the other side
    rest = [("u", k) for k in range(1, n_u)] + [("i", k) for k in range(1, n_i)]
    rng.shuffle(rest)
    placed_u, placed_i = [0], [0]
    for side, k in rest:
        if side == "u":
            edges.add((k, int(rng.choice(placed_i))))
            placed_u.append(k)
        else:
            edges.add((int(rng.choice(placed_u)), k))
            placed_i.append(k)
    extra = int(rng.integers(0, n_u * n_i - len(edges) + 1))
    for _ in range(extra):
        edges.add((int(rng.integers(n_u)), int(rng.integers(n_i))))
    out = []
    for u, i in sorted(edges):
        r = float(rng.integers(1, 6)) if ratings else 1.0
        out.append(Interaction(f"u{u:02d}", f"i{i:02d}", r, int(rng.integers(0, 10**9))))
    return out


def is_connected(inter: list[Interaction]) -> bool:
    adj: dict[str, set[str]] = {}
    for x in inter:
        adj.setdefault("u" + x.user, set()).add("i" + x.item)
        adj.setdefault("i" + x.item, set()).add("u" + x.user)
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(adj)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def complete_2x2():
    return build_graph(
        [
            Interaction("u1", "i1", 1.0, 0),
            Interaction("u1", "i2", 1.0, 0),
            Interaction("u2", "i1", 1.0, 0),
            Interaction("u2", "i2", 1.0, 0),
        ]
    )
