"""Anonymous undirected graphs and the generators used by the experiments."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal, Sequence

import numpy as np


class GraphError(ValueError):
    """Invalid graph construction or malformed edge-list input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph on nodes ``0..node_count-1``.

    ``adjacency[v]`` is the sorted tuple of neighbours of ``v``.  Node
    indices exist for bookkeeping only; node programs never see them.
    """

    node_count: int
    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.adjacency) != self.node_count:
            raise GraphError("adjacency length differs from node_count")
        for u, nbrs in enumerate(self.adjacency):
            prev = -1
            for v in nbrs:
                if not 0 <= v < self.node_count:
                    raise GraphError(f"neighbour index {v} out of range at node {u}")
                if v == u:
                    raise GraphError(f"self-loop at node {u}")
                if v <= prev:
                    raise GraphError(f"neighbours of node {u} not sorted/unique")
                prev = v
        for u, nbrs in enumerate(self.adjacency):
            for v in nbrs:
                if u not in self._neighbour_sets[v]:
                    raise GraphError(f"asymmetric edge {u}->{v}")

    @cached_property
    def _neighbour_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(a) for a in self.adjacency)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.node_count == other.node_count and self.adjacency == other.adjacency

    def __hash__(self):
        return hash((self.node_count, self.adjacency))

    def __repr__(self):
        return f"Graph(n={self.node_count}, m={self.edge_count})"

    @property
    def n(self) -> int:
        return self.node_count

    def neighbours(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._neighbour_sets[u]

    @cached_property
    def _square(self) -> "Graph":
        adj = self.adjacency
        out = []
        for u in range(self.node_count):
            reach = set(adj[u])
            for w in adj[u]:
                reach.update(adj[w])
            reach.discard(u)
            out.append(tuple(sorted(reach)))
        return Graph(self.node_count, tuple(out))

    @cached_property
    def edge_count(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nbrs in enumerate(self.adjacency) for v in nbrs if u < v]

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) as int32 arrays, for the compiled kernels."""
        indptr = np.zeros(self.node_count + 1, dtype=np.int32)
        np.cumsum([len(a) for a in self.adjacency], out=indptr[1:])
        indices = np.fromiter(
            (v for a in self.adjacency for v in a), dtype=np.int32, count=int(indptr[-1])
        )
        return indptr, indices


def from_edges(n: int, edges: Iterable[tuple[int, int]]) -> Graph:
    """Build a graph from an edge iterable; duplicates and self-loops are rejected."""
    if n < 0:
        raise GraphError("node count must be non-negative")
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) has an index >= {n}")
        if u == v:
            raise GraphError(f"self-loop at node {u}")
        if v in nbrs[u]:
            raise GraphError(f"duplicate edge ({u}, {v})")
        nbrs[u].add(v)
        nbrs[v].add(u)
    return Graph(n, tuple(tuple(sorted(s)) for s in nbrs))


def make_empty(n: int) -> Graph:
    return Graph(n, tuple(() for _ in range(n)))


def make_complete(n: int) -> Graph:
    if n < 1:
        raise GraphError("complete graph needs n >= 1")
    return Graph(n, tuple(tuple(v for v in range(n) if v != u) for u in range(n)))


def make_ring(n: int) -> Graph:
    if n < 3:
        raise GraphError("ring needs n >= 3")
    return from_edges(n, ((i, (i + 1) % n) for i in range(n)))


def make_path(n: int) -> Graph:
    if n < 1:
        raise GraphError("path needs n >= 1")
    return from_edges(n, ((i, i + 1) for i in range(n - 1)))


def make_star(leaves: int) -> Graph:
    """Centre 0 joined to ``leaves`` leaf nodes."""
    if leaves < 0:
        raise GraphError("leaf count must be non-negative")
    return from_edges(leaves + 1, ((0, i) for i in range(1, leaves + 1)))


def make_erdos_renyi(n: int, edge_prob: float, seed: int) -> Graph:
    """G(n, p) drawn from a numpy generator seeded only by ``seed``.

    The generator is independent of every simulation stream, so one graph
    can be replayed under many execution seeds.
    """
    if not 0.0 <= edge_prob <= 1.0:
        raise GraphError(f"edge probability {edge_prob} outside [0, 1]")
    if n < 1:
        raise GraphError("G(n, p) needs n >= 1")
    rng = np.random.default_rng(int(seed) & ((1 << 64) - 1))
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < edge_prob
    iu, ju = iu[keep], ju[keep]
    src = np.concatenate([iu, ju])
    dst = np.concatenate([ju, iu])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    bounds = np.searchsorted(src, np.arange(n + 1))
    dst_list = dst.tolist()
    adjacency = tuple(tuple(dst_list[bounds[u]:bounds[u + 1]]) for u in range(n))
    return Graph(n, adjacency)


@dataclass(frozen=True)
class WheelSpec:
    """(m, s)-wheel: a cycle on 4ms nodes plus m antipodal spokes."""

    m: int
    s: int
    parity: Literal["odd", "even"] = "odd"

    def __post_init__(self):
        if self.m < 1 or self.s < 1:
            raise GraphError("wheel needs m >= 1 and s >= 1")
        if self.parity not in ("odd", "even"):
            raise GraphError(f"wheel parity must be 'odd' or 'even', not {self.parity!r}")

    @property
    def node_count(self) -> int:
        return 4 * self.m * self.s

    def node(self, j: int) -> int:
        """Index of the cycle vertex u_j (1-based, taken modulo 4ms)."""
        return (j - 1) % self.node_count

    def spokes(self) -> list[tuple[int, int]]:
        first = 1 if self.parity == "odd" else 2
        m, s = self.m, self.s
        return [(self.node(i * s), self.node((i + 2 * m) * s)) for i in range(first, 2 * m + 1, 2)]

    def multiples(self) -> list[int]:
        """Indices of u_{is} for i = 1..4m."""
        return [self.node(i * self.s) for i in range(1, 4 * self.m + 1)]


def make_wheel(spec: WheelSpec) -> Graph:
    n = spec.node_count
    cycle = [(spec.node(j - 1), spec.node(j)) for j in range(1, n + 1)]
    return from_edges(n, cycle + spec.spokes())


def square(g: Graph) -> Graph:
    """Graph on the same nodes joining every pair at distance 1 or 2.

    Computed once per graph; the checkers of 2-hop outputs call it per run.
    """
    return g._square


def max_degree(g: Graph) -> int:
    return max((len(a) for a in g.adjacency), default=0)


def save_edge_list(g: Graph) -> str:
    lines = [f"{g.node_count} {g.edge_count}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def load_edge_list(text: str) -> Graph:
    """Parse the ``n m`` header plus ``m`` lines of ``u v`` pairs.

    Blank lines are ignored.  Every problem is reported with its 1-based
    line number.
    """
    rows: list[tuple[int, list[str]]] = [
        (i, line.split()) for i, line in enumerate(text.splitlines(), start=1) if line.strip()
    ]
    if not rows:
        raise GraphError("empty input", line=1)
    head_line, head = rows[0]
    if len(head) != 2:
        raise GraphError("header must be 'n m'", line=head_line)
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        raise GraphError("header must hold two integers", line=head_line) from None
    if n < 0 or m < 0:
        raise GraphError("negative count in header", line=head_line)
    body = rows[1:]
    if len(body) != m:
        line = body[-1][0] if body else head_line
        raise GraphError(f"header announces {m} edges, found {len(body)}", line=line)
    nbrs: list[set[int]] = [set() for _ in range(n)]
    for line_no, parts in body:
        if len(parts) != 2:
            raise GraphError("edge line must be 'u v'", line=line_no)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError("edge endpoints must be integers", line=line_no) from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"endpoint out of range 0..{n - 1}", line=line_no)
        if u == v:
            raise GraphError(f"self-loop at node {u}", line=line_no)
        if v in nbrs[u]:
            raise GraphError(f"duplicate edge ({u}, {v})", line=line_no)
        nbrs[u].add(v)
        nbrs[v].add(u)
    return Graph(n, tuple(tuple(sorted(s)) for s in nbrs))


def atlas_graphs(max_nodes: int) -> Sequence[Graph]:
    """Every graph on 1..max_nodes nodes, one per isomorphism class (max_nodes <= 7)."""
    import networkx as nx

    if max_nodes > 7:
        raise GraphError("the graph atlas stops at 7 nodes")
    out = []
    for h in nx.graph_atlas_g():
        k = h.number_of_nodes()
        if 1 <= k <= max_nodes:
            out.append(from_edges(k, h.edges()))
    return out
