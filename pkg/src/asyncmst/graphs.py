"""Weighted graphs, random generators, partitions, and sequential oracles."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from collections import deque


class GraphError(ValueError):
    """Invalid graph structure, file contents, or generator parameters."""


_MAX_RETRIES = 64


class Graph:
    """Immutable connected undirected graph with ports and distinct edge weights."""

    __slots__ = ("n", "m", "edges", "adj", "_port_of")

    def __init__(self, n: int, edges: list[tuple[int, int, int]]):
        if n < 1:
            raise GraphError("need at least one node")
        seen_pairs = set()
        seen_weights = set()
        norm = []
        for u, v, w in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"endpoint out of range: ({u}, {v})")
            if u == v:
                raise GraphError(f"self-loop at {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen_pairs:
                raise GraphError(f"parallel edge {key}")
            if w <= 0 or w != int(w):
                raise GraphError(f"weight must be a positive integer, got {w!r}")
            if w in seen_weights:
                raise GraphError(f"duplicate weight {w}")
            seen_pairs.add(key)
            seen_weights.add(w)
            norm.append((u, v, int(w)))
        self.n = n
        self.m = len(norm)
        self.edges = tuple(norm)
        # adj[v] = list of (neighbor, weight, edge id) in port order (edge-list order)
        adj: list[list[tuple[int, int, int]]] = [[] for _ in range(n)]
        for eid, (u, v, w) in enumerate(self.edges):
            adj[u].append((v, w, eid))
            adj[v].append((u, w, eid))
        self.adj = tuple(tuple(row) for row in adj)
        port_of: list[dict[int, int]] = [dict() for _ in range(n)]
        for v in range(n):
            for p, (_, _, eid) in enumerate(self.adj[v]):
                port_of[v][eid] = p
        self._port_of = tuple(port_of)
        if not self._connected():
            raise GraphError("graph is not connected")

    def _connected(self) -> bool:
        if self.n == 1:
            return True
        seen = bytearray(self.n)
        seen[0] = 1
        queue = deque([0])
        count = 1
        while queue:
            v = queue.popleft()
            for u, _, _ in self.adj[v]:
                if not seen[u]:
                    seen[u] = 1
                    count += 1
                    queue.append(u)
        return count == self.n

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def port_of(self, v: int, eid: int) -> int:
        return self._port_of[v][eid]

    def endpoints(self, eid: int) -> tuple[int, int, int]:
        return self.edges[eid]

    def other_end(self, eid: int, v: int) -> int:
        u, u2, _ = self.edges[eid]
        return u2 if v == u else u

    def weights_at(self, v: int) -> tuple[int, ...]:
        return tuple(w for _, w, _ in self.adj[v])

    def bfs_dists(self, src: int) -> list[int]:
        dist = [-1] * self.n
        dist[src] = 0
        queue = deque([src])
        while queue:
            v = queue.popleft()
            dv = dist[v]
            for u, _, _ in self.adj[v]:
                if dist[u] < 0:
                    dist[u] = dv + 1
                    queue.append(u)
        return dist

    def to_text(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines.extend(f"{u} {v} {w}" for u, v, w in self.edges)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Graph":
        rows = [ln for ln in (s.strip() for s in text.splitlines()) if ln]
        if not rows:
            raise GraphError("empty graph file")
        try:
            n, m = (int(tok) for tok in rows[0].split())
        except ValueError as exc:
            raise GraphError(f"bad header line: {rows[0]!r}") from exc
        if len(rows) - 1 != m:
            raise GraphError(f"expected {m} edge lines, found {len(rows) - 1}")
        edges = []
        for ln in rows[1:]:
            try:
                u, v, w = (int(tok) for tok in ln.split())
            except ValueError as exc:
                raise GraphError(f"bad edge line: {ln!r}") from exc
            edges.append((u, v, w))
        return cls(n, edges)


def read_graph(path: str) -> Graph:
    with open(path) as fh:
        return Graph.from_text(fh.read())


def write_graph(g: Graph, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(g.to_text())


def _assign_weights(pairs: list[tuple[int, int]], rng: random.Random) -> list[tuple[int, int, int]]:
    weights = list(range(1, len(pairs) + 1))
    rng.shuffle(weights)
    return [(u, v, w) for (u, v), w in zip(pairs, weights)]


def _grid_pairs(n: int, rows: int, cols: int) -> list[tuple[int, int]]:
    pairs = []
    for i in range(n):
        r, c = divmod(i, cols)
        if c + 1 < cols and i + 1 < n:
            pairs.append((i, i + 1))
        if (r + 1) * cols + c < n:
            pairs.append((i, i + cols))
    return pairs


def _random_pairs_extra(n: int, count: int, existing: set, rng: random.Random) -> list[tuple[int, int]]:
    # all candidate non-edges, in deterministic order, sampled without replacement
    candidates = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in existing]
    count = min(count, len(candidates))
    return rng.sample(candidates, count) if count else []


def _structure(kind: str, n: int, seed: int, params: dict) -> list[tuple[int, int]]:
    rng = random.Random(seed)
    if kind == "path":
        return [(i, i + 1) for i in range(n - 1)]
    if kind == "cycle":
        if n < 3:
            raise GraphError("cycle needs n >= 3")
        return [(i, (i + 1) % n) for i in range(n)]
    if kind == "complete":
        return [(u, v) for u in range(n) for v in range(u + 1, n)]
    if kind == "grid":
        rows = params.get("rows")
        cols = params.get("cols")
        if rows is not None or cols is not None:
            if not rows or not cols or rows * cols != n:
                raise GraphError("grid rows*cols must equal n")
        else:
            rows = max(1, int(math.isqrt(n)))
            cols = -(-n // rows)
        return _grid_pairs(n, rows, cols)
    if kind == "erdos_renyi":
        p = params.get("p")
        if p is None or not (0.0 < p <= 1.0):
            raise GraphError("erdos_renyi needs p in (0, 1]")
        return [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    if kind == "geometric":
        radius = params.get("radius")
        if radius is None:
            radius = 2.0 * math.sqrt(math.log(max(n, 2)) / (math.pi * n))
        if radius <= 0:
            raise GraphError("geometric needs radius > 0")
        pts = [(rng.random(), rng.random()) for _ in range(n)]
        r2 = radius * radius
        return [
            (u, v)
            for u in range(n)
            for v in range(u + 1, n)
            if (pts[u][0] - pts[v][0]) ** 2 + (pts[u][1] - pts[v][1]) ** 2 <= r2
        ]
    if kind == "tree_plus_edges":
        extra = params.get("extra", n // 4)
        if extra < 0:
            raise GraphError("tree_plus_edges needs extra >= 0")
        pairs = []
        for v in range(1, n):
            u = rng.randrange(v)
            pairs.append((u, v))
        pairs.extend(_random_pairs_extra(n, extra, set(pairs), rng))
        return pairs
    if kind == "cycle_chords":
        if n < 3:
            raise GraphError("cycle_chords needs n >= 3")
        chords = params.get("chords", n // 4)
        if chords < 0:
            raise GraphError("cycle_chords needs chords >= 0")
        pairs = [(i, (i + 1) % n) for i in range(n)]
        ring = {(min(u, v), max(u, v)) for u, v in pairs}
        pairs.extend(_random_pairs_extra(n, chords, ring, rng))
        return pairs
    raise GraphError(f"unknown graph kind {kind!r}")


_RANDOM_KINDS = {"erdos_renyi", "geometric", "tree_plus_edges", "cycle_chords"}


def generate_graph(kind: str, n: int, seed: int = 0, **params) -> Graph:
    """Build a connected weighted graph, deterministic in (kind, n, seed, params)."""
    if n < 1:
        raise GraphError("need n >= 1")
    if n == 1:
        if kind in ("path", "complete", "grid", "tree_plus_edges", "erdos_renyi", "geometric"):
            return Graph(1, [])
        raise GraphError(f"kind {kind!r} needs more nodes")
    last_err = None
    for attempt in range(_MAX_RETRIES):
        s = seed + attempt
        pairs = _structure(kind, n, s, params)
        pairs = [(u, v) if u < v else (v, u) for u, v in pairs]
        pairs.sort()
        wrng = random.Random((s << 1) ^ 0x5EED)
        try:
            g = Graph(n, _assign_weights(pairs, wrng))
            return g
        except GraphError as exc:
            last_err = exc
            if kind not in _RANDOM_KINDS:
                raise
    raise GraphError(f"no connected {kind} graph after {_MAX_RETRIES} tries: {last_err}")


@dataclass(frozen=True)
class GraphConfig:
    """Declarative graph spec used by the CLI and sweeps."""

    kind: str
    n: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def build(self) -> Graph:
        return generate_graph(self.kind, self.n, self.seed, **self.params)


def hop_diameter(g: Graph) -> int:
    """Unweighted diameter via BFS from every node."""
    best = 0
    for src in range(g.n):
        dists = g.bfs_dists(src)
        ecc = max(dists)
        if min(dists) < 0:
            raise GraphError("graph is not connected")
        if ecc > best:
            best = ecc
    return best


class _UnionFind:
    __slots__ = ("parent", "rank")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def kruskal_mst(g: Graph) -> frozenset:
    """Edge ids of the unique MST (weights are distinct)."""
    uf = _UnionFind(g.n)
    chosen = []
    for eid in sorted(range(g.m), key=lambda e: g.edges[e][2]):
        u, v, _ = g.edges[eid]
        if uf.union(u, v):
            chosen.append(eid)
    return frozenset(chosen)


@dataclass(frozen=True)
class Partition:
    """Clusters over nodes plus per-cluster rooted trees (parent = -1 at roots)."""

    cluster_of: tuple
    parent: tuple

    def __post_init__(self):
        if len(self.cluster_of) != len(self.parent):
            raise GraphError("cluster_of and parent must have equal length")

    @property
    def n(self) -> int:
        return len(self.cluster_of)

    def clusters(self) -> dict:
        out: dict = {}
        for v, c in enumerate(self.cluster_of):
            out.setdefault(c, []).append(v)
        return out

    def roots(self) -> dict:
        out = {}
        for v, par in enumerate(self.parent):
            if par == -1:
                c = self.cluster_of[v]
                if c in out:
                    raise GraphError(f"cluster {c} has two roots")
                out[c] = v
        return out

    def depths(self) -> list[int]:
        n = self.n
        depth = [-1] * n
        for v in range(n):
            if depth[v] >= 0:
                continue
            chain = []
            x = v
            while depth[x] < 0 and self.parent[x] != -1:
                chain.append(x)
                x = self.parent[x]
                if len(chain) > n:
                    raise GraphError("parent pointers contain a cycle")
            base = 0 if self.parent[x] == -1 else depth[x]
            for node in reversed(chain):
                base += 1
                depth[node] = base
            if self.parent[v] == -1:
                depth[v] = 0
        return depth

    def to_text(self) -> str:
        lines = [f"{v} {self.cluster_of[v]} {self.parent[v]}" for v in range(self.n)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ClusterGraph:
    """Simple graph over cluster ids with one witness edge per adjacency."""

    nodes: frozenset
    adjacency: dict
    witness: dict

    def degree(self, c) -> int:
        return len(self.adjacency[c])

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.adjacency.values()) // 2


def induced_cluster_graph(g: Graph, p: Partition) -> ClusterGraph:
    """Collapse clusters to nodes; adjacency iff an original edge crosses."""
    if p.n != g.n:
        raise GraphError("partition does not cover all nodes")
    nodes = frozenset(p.cluster_of)
    adjacency: dict = {c: set() for c in nodes}
    witness: dict = {}
    for eid, (u, v, w) in enumerate(g.edges):
        cu, cv = p.cluster_of[u], p.cluster_of[v]
        if cu == cv:
            continue
        key = (cu, cv) if cu < cv else (cv, cu)
        if key not in witness or g.edges[witness[key]][2] > w:
            witness[key] = eid
        adjacency[cu].add(cv)
        adjacency[cv].add(cu)
    return ClusterGraph(nodes, {c: frozenset(s) for c, s in adjacency.items()}, witness)


@dataclass(frozen=True)
class PartitionReport:
    """Validation summary for a partition against a strong-diameter bound."""

    strong_diameter: dict
    tree_depth: dict
    cut_fraction: float
    max_strong_diameter: float
    ok: bool


def validate_partition(g: Graph, p: Partition, max_strong_diam: float) -> PartitionReport:
    """Per-cluster strong diameters, tree depths, and the inter-cluster edge fraction."""
    if p.n != g.n:
        raise GraphError("partition does not cover all nodes")
    members = p.clusters()
    roots = p.roots()
    for c in members:
        if c not in roots:
            raise GraphError(f"cluster {c} has no root")
    depth = p.depths()
    for v in range(g.n):
        par = p.parent[v]
        if par == -1:
            continue
        if p.cluster_of[par] != p.cluster_of[v]:
            raise GraphError(f"node {v} has parent {par} in another cluster")
        if par not in (u for u, _, _ in g.adj[v]):
            raise GraphError(f"tree edge ({v}, {par}) not in graph")
    strong: dict = {}
    tdepth: dict = {}
    for c, nodes in members.items():
        tdepth[c] = max(depth[v] for v in nodes)
        in_cluster = set(nodes)
        worst = 0.0
        for src in nodes:
            dist = {src: 0}
            queue = deque([src])
            while queue:
                x = queue.popleft()
                for u, _, _ in g.adj[x]:
                    if u in in_cluster and u not in dist:
                        dist[u] = dist[x] + 1
                        queue.append(u)
            if len(dist) < len(nodes):
                worst = math.inf
                break
            worst = max(worst, max(dist.values()))
        strong[c] = worst
    cut = sum(1 for u, v, _ in g.edges if p.cluster_of[u] != p.cluster_of[v])
    cut_fraction = cut / g.m if g.m else 0.0
    worst_diam = max(strong.values()) if strong else 0.0
    return PartitionReport(
        strong_diameter=strong,
        tree_depth=tdepth,
        cut_fraction=cut_fraction,
        max_strong_diameter=worst_diam,
        ok=worst_diam <= max_strong_diam,
    )
