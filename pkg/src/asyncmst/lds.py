"""Low-diameter decomposition and the clustered low-diameter spanning tree."""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass

from .graphs import Graph, GraphError, Partition
from .kernel import mix64


class TrivialRegime(Exception):
    """n is too small for the clustered construction; flood from the root."""


@dataclass(frozen=True)
class LdsParams:
    """Derived decomposition parameters for one spanning-tree attempt."""

    n: int
    epsilon: float
    epsilon_prime: float
    beta: float
    delta_max: int
    i_max: int
    d_guess: int


def derive_params(n: int, epsilon: float, d_guess: int,
                  beta_override: float | None = None) -> LdsParams:
    """Evaluate the parameter formulas; raises TrivialRegime for tiny n."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must be in (0, 1]")
    if d_guess < 1:
        raise ValueError("d_guess must be at least 1")
    eps_prime = epsilon / (2.0 * math.log(15.0))
    if beta_override is not None:
        if not 0.0 < beta_override < 1.0:
            raise ValueError("beta override must be in (0, 1)")
        beta = beta_override
    else:
        if n < 3 or math.log(math.log(n)) < 2.0 * eps_prime * math.log(3.0):
            raise TrivialRegime(f"n={n} is below the clustered regime")
        beta = math.log(n) ** (-1.0 / eps_prime)
    delta_max = math.floor(2.0 * math.log(max(n, 2)) / beta)
    if d_guess <= 1:
        i_max = 0
    elif 3.0 * beta >= 1.0:
        i_max = 1
    else:
        ratio = math.log(d_guess) / math.log(1.0 / (3.0 * beta))
        i_max = math.ceil(round(ratio, 12))
    return LdsParams(n=n, epsilon=epsilon, epsilon_prime=eps_prime, beta=beta,
                     delta_max=delta_max, i_max=i_max, d_guess=d_guess)


def bfs_round_budget(params: LdsParams, n_clusters: int) -> int:
    """Round allowance for the cluster BFS; a connected cluster graph never
    needs more than n_clusters rounds, so the cap is outcome-equivalent."""
    formula = math.log(max(params.n, 3)) ** (2.0 + 4.0 / params.epsilon_prime)
    if formula > n_clusters:
        return n_clusters
    return math.ceil(formula) + 1


def exponential_from_uniform(u: float, beta: float) -> float:
    """Inverse-CDF map of one uniform draw in (0, 1]."""
    if not 0.0 < u <= 1.0:
        raise ValueError("u must be in (0, 1]")
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    return -math.log(u) / beta


def sample_exponential(beta: float, rng: random.Random) -> float:
    """One exponential sample with rate beta."""
    return exponential_from_uniform(1.0 - rng.random(), beta)


@dataclass(frozen=True)
class MpxTrace:
    """Reference-run internals kept for statistics and oracle checks."""

    start: tuple
    arrival: tuple
    winner: tuple
    delta_overflows: int


def mpx_delta(beta: float, seed: int, true_id: int) -> float:
    """The exponential shift of one vertex, keyed by its true id."""
    return sample_exponential(beta, random.Random(mix64(seed, 0xE1, true_id)))


def mpx_start_time(delta: float, delta_max: int) -> int:
    """S_v = max(1, delta_max - floor(delta_v))."""
    return max(1, delta_max - math.floor(delta))


def mpx_sync(g: Graph, beta: float, seed: int, delta_max: int | None = None,
             ids: tuple | None = None, deltas=None, want_trace: bool = False):
    """Lock-step reference decomposition: each vertex joins the cluster of the
    vertex minimizing (S_w + dist(w, v), id_w); returns Partition [, trace]."""
    n = g.n
    if ids is None:
        ids = tuple(range(n))
    if delta_max is None:
        delta_max = math.floor(2.0 * math.log(max(n, 2)) / beta)
    if deltas is None:
        deltas = tuple(mpx_delta(beta, seed, ids[v]) for v in range(n))
    overflows = sum(1 for d in deltas if math.floor(d) >= delta_max)
    start = tuple(mpx_start_time(d, delta_max) for d in deltas)
    best = {v: (start[v], ids[v]) for v in range(n)}
    heap = [(start[v], ids[v], v) for v in range(n)]
    heapq.heapify(heap)
    while heap:
        t, wid, v = heapq.heappop(heap)
        if (t, wid) > best[v]:
            continue
        for u, _, _ in g.adj[v]:
            cand = (t + 1, wid)
            if cand < best[u]:
                best[u] = cand
                heapq.heappush(heap, (t + 1, wid, u))
    winner = tuple(best[v][1] for v in range(n))
    arrival = tuple(best[v][0] for v in range(n))
    parent = []
    for v in range(n):
        if winner[v] == ids[v]:
            parent.append(-1)
            continue
        want = (arrival[v] - 1, winner[v])
        hit = -1
        for u, _, _ in g.adj[v]:
            if best[u] == want:
                hit = u
                break
        if hit < 0:
            raise AssertionError(f"no carrier of the winning id at vertex {v}")
        parent.append(hit)
    part = Partition(cluster_of=winner, parent=tuple(parent))
    if want_trace:
        return part, MpxTrace(start=start, arrival=arrival, winner=winner,
                              delta_overflows=overflows)
    return part


def _cluster_adjacency(g: Graph, cluster_of) -> dict:
    adj: dict = {}
    for c in set(cluster_of):
        adj[c] = set()
    for u, v, _ in g.edges:
        cu, cv = cluster_of[u], cluster_of[v]
        if cu != cv:
            adj[cu].add(cv)
            adj[cv].add(cu)
    return adj


def _adjacency_diameter(adj: dict) -> int:
    best = 0
    for src in adj:
        dist = {src: 0}
        queue = [src]
        for x in queue:
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        if len(dist) != len(adj):
            raise GraphError("cluster graph is not connected")
        best = max(best, max(dist.values()))
    return best


def mpx_stats(graphs, beta: float, trials: int, base_seed: int = 0) -> dict:
    """Monte-Carlo decomposition quality over a graph pool."""
    if trials < 30:
        raise ValueError("need at least 30 trials")
    from .graphs import hop_diameter, validate_partition

    cut_samples = []
    diam_samples = []
    ratio_samples = []
    within = True
    bound = 0.0
    for t in range(trials):
        g = graphs[t % len(graphs)]
        part = mpx_sync(g, beta, base_seed + t)
        g_bound = 4.0 * math.log(max(g.n, 2)) / beta
        bound = max(bound, g_bound)
        report = validate_partition(g, part, g_bound)
        within = within and report.ok
        cut_samples.append(report.cut_fraction)
        diam_samples.append(report.max_strong_diameter)
        cg_adj = _cluster_adjacency(g, part.cluster_of)
        g_diam = hop_diameter(g)
        ratio_samples.append(
            _adjacency_diameter(cg_adj) / g_diam if g_diam else 0.0
        )
    mean_cut = sum(cut_samples) / trials
    var = sum((x - mean_cut) ** 2 for x in cut_samples) / trials
    return {
        "trials": trials,
        "beta": beta,
        "mean_cut_fraction": mean_cut,
        "std_cut_fraction": math.sqrt(var),
        "max_strong_diam": max(diam_samples),
        "bound_4ln_over_beta": bound,
        "all_within_bound": within,
        "diam_ratio_mean": sum(ratio_samples) / trials,
        "cut_samples": cut_samples,
        "diam_samples": diam_samples,
        "ratio_samples": ratio_samples,
    }


@dataclass(frozen=True)
class LevelState:
    """Partition of the original vertices after i rounds of clustering."""

    level: int
    part: Partition

    @property
    def cluster_of(self) -> tuple:
        return self.part.cluster_of

    @property
    def parent(self) -> tuple:
        return self.part.parent


def level_zero(g: Graph) -> LevelState:
    """Every vertex is its own singleton cluster."""
    return LevelState(0, Partition(cluster_of=tuple(range(g.n)),
                                   parent=(-1,) * g.n))


def build_level_graph(g: Graph, level: LevelState):
    """Relabel the cluster graph to a compact Graph; id order is preserved."""
    ids = tuple(sorted(set(level.cluster_of)))
    index = {c: i for i, c in enumerate(ids)}
    pairs = set()
    for u, v, _ in g.edges:
        cu, cv = level.cluster_of[u], level.cluster_of[v]
        if cu != cv:
            a, b = index[cu], index[cv]
            pairs.add((a, b) if a < b else (b, a))
    edges = [(a, b, w) for w, (a, b) in enumerate(sorted(pairs), start=1)]
    return Graph(len(ids), edges), ids


def _reroot(parent: list, new_root: int) -> None:
    chain = [new_root]
    while parent[chain[-1]] != -1:
        chain.append(parent[chain[-1]])
    for i in range(len(chain) - 1, 0, -1):
        parent[chain[i]] = chain[i - 1]
    parent[new_root] = -1


def transform(g: Graph, level: LevelState, ids: tuple, super_part: Partition,
              iterations: int | None = None) -> LevelState:
    """Merge each super-cluster into one cluster with a combined rooted tree.

    Every non-root cluster re-roots at its smallest-id crossing pair toward
    its super-parent and hangs from that edge; ids follow the super winner."""
    if iterations is not None and iterations < 1:
        raise ValueError("iterations must be positive when given")
    if len(super_part.cluster_of) != len(ids):
        raise GraphError("super partition does not match the level")
    index = {c: i for i, c in enumerate(ids)}
    # best crossing pair (w in child cluster, u in parent cluster), by ids
    attach: dict = {}
    for u, v, _ in g.edges:
        cu, cv = level.cluster_of[u], level.cluster_of[v]
        if cu == cv:
            continue
        for child_node, parent_node in ((u, v), (v, u)):
            child_c = level.cluster_of[child_node]
            parent_idx = super_part.parent[index[child_c]]
            if parent_idx == -1 or ids[parent_idx] != level.cluster_of[parent_node]:
                continue
            pair = (child_node, parent_node)
            if child_c not in attach or pair < attach[child_c]:
                attach[child_c] = pair
    new_parent = list(level.parent)
    for i, c in enumerate(ids):
        if super_part.parent[i] == -1:
            continue
        if c not in attach:
            raise GraphError(f"no crossing edge from cluster {c} to its parent")
        w, u = attach[c]
        _reroot(new_parent, w)
        new_parent[w] = u
    new_cluster = tuple(
        super_part.cluster_of[index[level.cluster_of[v]]] for v in range(g.n)
    )
    return LevelState(level.level + 1,
                      Partition(cluster_of=new_cluster,
                                parent=tuple(new_parent)))


def bfs_cluster_stage(adjacency: dict, root_cid, budget: int):
    """Layered BFS over cluster ids; parent = smallest-id previous-layer
    neighbor. Returns (parents, dists) for the clusters reached in budget."""
    dist = {root_cid: 0}
    frontier = [root_cid]
    layer = 0
    while frontier and layer < budget:
        layer += 1
        nxt = []
        for c in frontier:
            for d in adjacency[c]:
                if d not in dist:
                    dist[d] = layer
                    nxt.append(d)
        frontier = nxt
    parents = {root_cid: -1}
    for c, dc in dist.items():
        if c == root_cid:
            continue
        parents[c] = min(d for d in adjacency[c]
                         if d in dist and dist[d] == dc - 1)
    return parents, dist


@dataclass(frozen=True)
class StTree:
    """Rooted spanning tree with its depth and (hop) diameter."""

    root: int
    parent: tuple
    depth: int
    d_prime: int
    attempts: int
    params: LdsParams | None
    levels: tuple = ()


def tree_children(parent) -> list:
    kids: list[list[int]] = [[] for _ in parent]
    for v, p in enumerate(parent):
        if p != -1:
            kids[p].append(v)
    return kids


def tree_depth(parent, root) -> int:
    kids = tree_children(parent)
    deepest = 0
    stack = [(root, 0)]
    seen = 1
    while stack:
        v, d = stack.pop()
        deepest = max(deepest, d)
        for c in kids[v]:
            seen += 1
            stack.append((c, d + 1))
    if seen != len(parent):
        raise GraphError("parent array is not one tree over all vertices")
    return deepest


def tree_diameter(parent, root) -> int:
    kids = tree_children(parent)

    def far(src):
        adj = kids
        dist = {src: 0}
        queue = [src]
        for x in queue:
            nbrs = list(adj[x])
            if parent[x] != -1:
                nbrs.append(parent[x])
            for y in nbrs:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        top = max(dist, key=lambda v: (dist[v], v))
        return top, dist[top]

    a, _ = far(root)
    _, d = far(a)
    return d


def _bfs_fallback_parents(g: Graph, root: int) -> tuple:
    dist = g.bfs_dists(root)
    parent = [-1] * g.n
    for v in range(g.n):
        if v == root:
            continue
        for u, _, _ in g.adj[v]:
            if dist[u] == dist[v] - 1:
                parent[v] = u
                break
    return tuple(parent)


def _flood_tree(g: Graph, root: int, attempts: int = 0) -> StTree:
    parent = _bfs_fallback_parents(g, root)
    return StTree(root=root, parent=parent, depth=tree_depth(parent, root),
                  d_prime=tree_diameter(parent, root), attempts=attempts,
                  params=None)


def _attempt_sync(g: Graph, root: int, params: LdsParams, seed: int,
                  budget_override: int | None):
    level = level_zero(g)
    levels = [level]
    for i in range(1, params.i_max + 1):
        cg, ids = build_level_graph(g, level)
        if cg.n == 1:
            break
        super_part = mpx_sync(cg, params.beta, mix64(seed, 0x111, i),
                              delta_max=params.delta_max, ids=ids)
        level = transform(g, level, ids, super_part)
        levels.append(level)
    adjacency = _cluster_adjacency(g, level.cluster_of)
    n_clusters = len(adjacency)
    root_cid = level.cluster_of[root]
    if n_clusters == 1:
        final = level
    else:
        budget = (budget_override if budget_override is not None
                  else bfs_round_budget(params, n_clusters))
        parents, dist = bfs_cluster_stage(adjacency, root_cid, budget)
        if len(dist) < n_clusters:
            return None, levels
        ids = tuple(sorted(adjacency))
        index = {c: i for i, c in enumerate(ids)}
        super_part = Partition(
            cluster_of=(root_cid,) * n_clusters,
            parent=tuple(-1 if parents[c] == -1 else index[parents[c]]
                         for c in ids),
        )
        final = transform(g, level, ids, super_part)
        levels.append(final)
    parent = list(final.parent)
    _reroot(parent, root)
    return tuple(parent), levels


def st_cons(g: Graph, root: int, epsilon: float = 1.0,
            mode: str = "direct_sync", seed: int = 0,
            beta_override: float | None = None,
            budget_override: int | None = None,
            delays=None, wakeup=None) -> StTree:
    """Low-diameter rooted spanning tree via clustering, BFS, and doubling
    diameter guesses; falls back to flooding below the clustered regime."""
    if not 0 <= root < g.n:
        raise ValueError(f"root {root} out of range")
    if mode not in ("direct_sync", "async_simulated"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "async_simulated":
        from .lds_async import st_cons_async

        return st_cons_async(g, root, epsilon, seed=seed,
                             beta_override=beta_override,
                             budget_override=budget_override,
                             delays=delays, wakeup=wakeup)
    d_guess = 1
    attempts = 0
    while d_guess <= 2 * g.n:
        attempts += 1
        try:
            params = derive_params(g.n, epsilon, d_guess,
                                   beta_override=beta_override)
        except TrivialRegime:
            return _flood_tree(g, root, attempts=attempts)
        parent, levels = _attempt_sync(g, root, params, seed, budget_override)
        if parent is not None:
            return StTree(root=root, parent=parent,
                          depth=tree_depth(parent, root),
                          d_prime=tree_diameter(parent, root),
                          attempts=attempts, params=params,
                          levels=tuple(levels))
        d_guess *= 2
    raise GraphError("diameter guessing failed to cover the graph")
