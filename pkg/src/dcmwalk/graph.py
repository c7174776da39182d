"""Directed configuration model: sampling, SCC structure, in-neighbourhood
growth, and the marked in-exploration process.

Half-edges are flat arrays with index arithmetic: tails (out-half-edges) and
heads (in-half-edges) are numbered 0..m-1, grouped by vertex, and a sampled
graph is a permutation matching tail i to head match[i]. Sampled graphs are
immutable and shareable; exploration is single-threaded per replicate.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .degrees import BiDegreeSequence
from .errors import ValidationError


@dataclass(frozen=True)
class Multigraph:
    """Half-edge representation of a directed multigraph.

    Tail t belongs to tail_vertex[t] and is paired with head match[t], which
    belongs to head_vertex[match[t]]. Self-loops and parallel edges are
    allowed; edge multiplicities are recovered by aggregation.
    """

    n: int
    m: int
    d_in: np.ndarray
    d_out: np.ndarray
    tail_ptr: np.ndarray
    head_ptr: np.ndarray
    tail_vertex: np.ndarray
    head_vertex: np.ndarray
    match: np.ndarray

    def __post_init__(self):
        counts = np.bincount(self.match, minlength=self.m)
        if len(counts) != self.m or not np.all(counts == 1):
            raise ValidationError("pairing is not a perfect matching of half-edges")

    @property
    def inverse_match(self) -> np.ndarray:
        inv = np.empty(self.m, dtype=np.int64)
        inv[self.match] = np.arange(self.m)
        return inv

    def successors(self) -> np.ndarray:
        """Destination vertex of each tail, in tail order."""
        return self.head_vertex[self.match]

    def adjacency(self) -> sp.csr_matrix:
        """Vertex adjacency with multiplicities, as a CSR matrix."""
        data = np.ones(self.m, dtype=np.float64)
        return sp.csr_matrix(
            (data, (self.tail_vertex, self.successors())), shape=(self.n, self.n)
        )

    def edge_multiplicities(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        dst = self.successors()
        for t in range(self.m):
            key = (int(self.tail_vertex[t]), int(dst[t]))
            out[key] = out.get(key, 0) + 1
        return out

    def to_edge_list(self, path) -> None:
        """Write `src dst multiplicity` lines, sorted by (src, dst)."""
        mult = self.edge_multiplicities()
        with open(path, "w", encoding="ascii") as fh:
            for (src, dst) in sorted(mult):
                fh.write(f"{src} {dst} {mult[(src, dst)]}\n")

    @classmethod
    def from_edges(cls, edges, n: int | None = None) -> "Multigraph":
        """Build a multigraph from (src, dst, multiplicity) triples.

        The pairing is reconstructed canonically (half-edges matched in
        sorted edge order), which preserves the multigraph exactly.
        """
        edges = [(int(s), int(d), int(mult)) for s, d, mult in edges]
        if not edges:
            raise ValidationError("empty edge list")
        for src, dst, mult in edges:
            if src < 0 or dst < 0 or mult < 1:
                raise ValidationError(f"bad edge ({src}, {dst}, {mult})")
        size = max(max(s for s, _, _ in edges), max(d for _, d, _ in edges)) + 1
        n = size if n is None else max(n, size)
        d_out = np.zeros(n, dtype=np.int64)
        d_in = np.zeros(n, dtype=np.int64)
        for src, dst, mult in edges:
            d_out[src] += mult
            d_in[dst] += mult
        g = _empty_graph(d_in, d_out)
        next_tail = g.tail_ptr[:-1].copy()
        next_head = g.head_ptr[:-1].copy()
        match = np.empty(g.m, dtype=np.int64)
        for src, dst, mult in sorted(edges):
            for _ in range(mult):
                match[next_tail[src]] = next_head[dst]
                next_tail[src] += 1
                next_head[dst] += 1
        return cls(
            n=g.n, m=g.m, d_in=g.d_in, d_out=g.d_out, tail_ptr=g.tail_ptr,
            head_ptr=g.head_ptr, tail_vertex=g.tail_vertex,
            head_vertex=g.head_vertex, match=match,
        )

    @classmethod
    def from_edge_list(cls, path) -> "Multigraph":
        """Rebuild a multigraph from `src dst multiplicity` lines."""
        edges: list[tuple[int, int, int]] = []
        with open(path, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 3:
                    raise ValidationError(f"{path}:{lineno}: expected 'src dst mult'")
                edges.append((int(parts[0]), int(parts[1]), int(parts[2])))
        if not edges:
            raise ValidationError(f"{path}: empty edge list")
        return cls.from_edges(edges)


def _empty_graph(d_in: np.ndarray, d_out: np.ndarray) -> Multigraph:
    """Graph skeleton with the identity pairing (placeholder match)."""
    n = len(d_in)
    m = int(d_out.sum())
    if int(d_in.sum()) != m:
        raise ValidationError("head and tail totals differ")
    tail_ptr = np.concatenate(([0], np.cumsum(d_out)))
    head_ptr = np.concatenate(([0], np.cumsum(d_in)))
    tail_vertex = np.repeat(np.arange(n), d_out)
    head_vertex = np.repeat(np.arange(n), d_in)
    return Multigraph(
        n=n, m=m, d_in=d_in.astype(np.int64), d_out=d_out.astype(np.int64),
        tail_ptr=tail_ptr.astype(np.int64), head_ptr=head_ptr.astype(np.int64),
        tail_vertex=tail_vertex, head_vertex=head_vertex,
        match=np.arange(m, dtype=np.int64),
    )


def sample_dcm(
    seq: BiDegreeSequence, rng_seed: int | np.random.SeedSequence = 0
) -> Multigraph:
    """Sample the configuration model: a uniform perfect matching of heads
    against the canonical tail order (Fisher-Yates shuffle of the head array).
    """
    d_in = seq.in_degrees
    d_out = seq.out_degrees
    skeleton = _empty_graph(d_in, d_out)
    rng = np.random.default_rng(rng_seed)
    match = rng.permutation(skeleton.m).astype(np.int64)
    return Multigraph(
        n=skeleton.n, m=skeleton.m, d_in=d_in, d_out=d_out,
        tail_ptr=skeleton.tail_ptr, head_ptr=skeleton.head_ptr,
        tail_vertex=skeleton.tail_vertex, head_vertex=skeleton.head_vertex,
        match=match,
    )


def sample_rout(n: int, r: int, rng_seed: int | np.random.SeedSequence = 0) -> Multigraph:
    """Sample the r-out digraph: each vertex draws r uniform out-neighbours
    with replacement (self-loops allowed); in-degrees are Binomial(nr, 1/n).
    """
    if r < 2 or n < 1:
        raise ValidationError(f"need r >= 2 and n >= 1, got r={r}, n={n}")
    rng = np.random.default_rng(rng_seed)
    targets = rng.integers(0, n, size=n * r)
    d_in = np.bincount(targets, minlength=n).astype(np.int64)
    d_out = np.full(n, r, dtype=np.int64)
    skeleton = _empty_graph(d_in, d_out)
    order = np.argsort(targets, kind="stable")
    match = np.empty(n * r, dtype=np.int64)
    match[order] = np.arange(n * r)
    return Multigraph(
        n=n, m=n * r, d_in=d_in, d_out=d_out,
        tail_ptr=skeleton.tail_ptr, head_ptr=skeleton.head_ptr,
        tail_vertex=skeleton.tail_vertex, head_vertex=skeleton.head_vertex,
        match=match,
    )


def sccs(g: Multigraph) -> tuple[int, np.ndarray]:
    """Strongly connected component labeling (count, per-vertex labels)."""
    n_comp, labels = connected_components(
        g.adjacency(), directed=True, connection="strong"
    )
    return int(n_comp), labels


def attractive_scc(g: Multigraph) -> np.ndarray | None:
    """Vertices of the attractive SCC, or None.

    A component is attractive when it is reachable from every vertex; in a
    finite digraph that holds exactly when it is the unique sink of the
    condensation (every vertex can follow the DAG down to some sink).
    """
    n_comp, labels = sccs(g)
    if n_comp == 1:
        return np.arange(g.n, dtype=np.int64)
    src_comp = labels[g.tail_vertex]
    dst_comp = labels[g.successors()]
    has_external_out = np.zeros(n_comp, dtype=bool)
    external = src_comp != dst_comp
    has_external_out[src_comp[external]] = True
    # Components without out-edges at all (out-degree-0 vertices) count as
    # condensation sinks too and defeat uniqueness.
    sinks = np.nonzero(~has_external_out)[0]
    if len(sinks) != 1:
        return None
    return np.nonzero(labels == sinks[0])[0].astype(np.int64)


def t_omega(
    g: Multigraph, f: int, omega: int, t_cap: int
) -> int | None:
    """First level t at which the in-neighbourhood of head f holds at least
    omega heads, or None if the growth dies out or t_cap is reached.

    Levels are breadth-first over heads: the heads one level behind head h
    are the heads of the vertex whose tail is paired with h.
    """
    if omega < 1:
        raise ValidationError("omega must be >= 1")
    if omega == 1:
        return 0
    inv = g.inverse_match
    seen = np.zeros(g.m, dtype=bool)
    frontier = np.array([f], dtype=np.int64)
    seen[f] = True
    for t in range(1, t_cap + 1):
        tails = inv[frontier]
        vertices = g.tail_vertex[tails]
        nxt = _heads_of(g, vertices)
        nxt = nxt[~seen[nxt]]
        nxt = np.unique(nxt)
        if len(nxt) == 0:
            return None
        seen[nxt] = True
        if len(nxt) >= omega:
            return t
        frontier = nxt
    return None


def t_omega_set(g: Multigraph, omega: int, t_cap: int) -> np.ndarray:
    """Boolean mask over heads with finite t_omega (bulk form of t_omega)."""
    return np.array(
        [t_omega(g, f, omega, t_cap) is not None for f in range(g.m)], dtype=bool
    )


def _heads_of(g: Multigraph, vertices: np.ndarray) -> np.ndarray:
    """Concatenated head ids of the given vertices (with repeats collapsed later)."""
    counts = g.d_in[vertices]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    starts = g.head_ptr[vertices]
    offsets = np.arange(total) - np.repeat(
        np.concatenate(([0], np.cumsum(counts)))[:-1], counts
    )
    return np.repeat(starts, counts) + offsets


@dataclass(frozen=True)
class StopRule:
    """Stop condition for the in-exploration: whichever triggers first.

    level: stop once every head at depth < level is paired (active set is
    exactly that level). active_cap: stop at the first level boundary whose
    level holds at least this many heads. budget: hard cap on pairings
    (stopping mid-level, flagged).
    """

    level: int | None = None
    active_cap: int | None = None
    budget: int | None = None

    def __post_init__(self):
        if self.level is None and self.active_cap is None and self.budget is None:
            raise ValidationError("stop rule needs at least one of level/cap/budget")


@dataclass(frozen=True)
class IncompleteTree:
    """Marked tree of heads built by the in-exploration process.

    Arrays are parallel over nodes; mark is -1 until the node is paired.
    `pairs` records (head id, tail id) in pairing order; `collisions` counts
    pairings that landed on an already-discovered vertex (the excess TX of
    the explored subgraph); collided heads stay as paired leaves.
    """

    root_head: int
    parent: np.ndarray
    head_id: np.ndarray
    level: np.ndarray
    mark: np.ndarray
    paired: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    collisions: int
    stopped_at_boundary: bool
    budget_exhausted: bool

    @property
    def num_nodes(self) -> int:
        return len(self.parent)

    @property
    def num_paired(self) -> int:
        return int(self.paired.sum())

    @property
    def level_sizes(self) -> tuple[int, ...]:
        return tuple(np.bincount(self.level).tolist())

    def active_levels(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.level[~self.paired].tolist())))

    def gamma_at(self, t: int) -> float:
        """Sum over level-t nodes of the in-tree path weights.

        Weight of a node = product of 1/mark over its ancestors at levels
        0..t-1 (each such ancestor is paired, so its mark is known).
        """
        weights = {0: 1.0}
        for node in range(1, self.num_nodes):
            if self.level[node] > t:
                continue
            par = int(self.parent[node])
            if par not in weights or self.mark[par] < 1:
                continue
            weights[node] = weights[par] / float(self.mark[par])
        return float(
            sum(w for node, w in weights.items() if self.level[node] == t)
        )


def explore_in_tree(
    seq: BiDegreeSequence,
    f: int,
    stop: StopRule,
    rng_seed: int | np.random.SeedSequence = 0,
) -> IncompleteTree:
    """Run the marked breadth-first in-exploration from head f.

    Heads are processed in FIFO order (earliest activated first). Each step
    pairs the current head with a uniformly random unpaired tail — drawn by
    a partial Fisher-Yates over the tail array, so the tree's law matches
    the exploration of a uniform configuration without sampling the whole
    graph. If the tail's vertex is new, its heads become the node's children
    and the node's mark is that vertex's out-degree; if the vertex was
    already discovered, the pairing is a collision: the node keeps the mark
    but becomes a childless paired leaf.
    """
    d_in = seq.in_degrees
    d_out = seq.out_degrees
    m = seq.m
    if not 0 <= f < m:
        raise ValidationError(f"head id {f} outside 0..{m - 1}")
    head_ptr = seq.head_ptr
    head_vertex = seq.head_vertex
    tail_vertex = seq.tail_vertex

    rng = np.random.default_rng(rng_seed)
    pool = np.arange(m, dtype=np.int64)  # tails; consumed prefix is paired
    consumed = 0
    discovered = np.zeros(seq.n, dtype=bool)

    parent = [-1]
    head_id = [f]
    level = [0]
    mark = [-1]
    paired = [False]
    pairs: list[tuple[int, int]] = []
    collisions = 0
    discovered[head_vertex[f]] = True

    queue: deque[int] = deque([0])
    budget_exhausted = False
    current_level = -1
    level_counts = {0: 1}

    def boundary_stop() -> bool:
        if stop.level is not None and current_level >= stop.level:
            return True
        if stop.active_cap is not None and level_counts.get(current_level, 0) >= stop.active_cap:
            return True
        return False

    stopped_at_boundary = False
    while queue:
        node = queue[0]
        if level[node] > current_level:
            current_level = level[node]
            if boundary_stop():
                stopped_at_boundary = True
                break
        if stop.budget is not None and len(pairs) >= stop.budget:
            budget_exhausted = True
            break
        queue.popleft()
        # Uniform unpaired tail via partial Fisher-Yates swap.
        j = int(rng.integers(consumed, m))
        pool[consumed], pool[j] = pool[j], pool[consumed]
        tail = int(pool[consumed])
        consumed += 1
        u = int(tail_vertex[tail])
        pairs.append((head_id[node], tail))
        paired[node] = True
        mark[node] = int(d_out[u])
        if discovered[u]:
            collisions += 1
            continue
        discovered[u] = True
        child_level = level[node] + 1
        for h in range(head_ptr[u], head_ptr[u + 1]):
            parent.append(node)
            head_id.append(int(h))
            level.append(child_level)
            mark.append(-1)
            paired.append(False)
            queue.append(len(parent) - 1)
        level_counts[child_level] = level_counts.get(child_level, 0) + d_in[u]
    else:
        stopped_at_boundary = True  # exploration died out: active set empty

    return IncompleteTree(
        root_head=f,
        parent=np.array(parent, dtype=np.int64),
        head_id=np.array(head_id, dtype=np.int64),
        level=np.array(level, dtype=np.int64),
        mark=np.array(mark, dtype=np.int64),
        paired=np.array(paired, dtype=bool),
        pairs=tuple(pairs),
        collisions=collisions,
        stopped_at_boundary=stopped_at_boundary,
        budget_exhausted=budget_exhausted,
    )


def complete_pairing(seq: BiDegreeSequence, pairs) -> Multigraph:
    """Extend a partial (head, tail) pairing to a full multigraph, matching
    the remaining half-edges in canonical order. Test-support helper for
    shared-randomness consistency between exploration and sampling."""
    d_in = seq.in_degrees
    d_out = seq.out_degrees
    skeleton = _empty_graph(d_in, d_out)
    m = skeleton.m
    match = np.full(m, -1, dtype=np.int64)
    used_heads = np.zeros(m, dtype=bool)
    for head, tail in pairs:
        if match[tail] != -1 or used_heads[head]:
            raise ValidationError("partial pairing reuses a half-edge")
        match[tail] = head
        used_heads[head] = True
    free_heads = np.nonzero(~used_heads)[0]
    free_tails = np.nonzero(match == -1)[0]
    match[free_tails] = free_heads
    return Multigraph(
        n=skeleton.n, m=m, d_in=d_in, d_out=d_out,
        tail_ptr=skeleton.tail_ptr, head_ptr=skeleton.head_ptr,
        tail_vertex=skeleton.tail_vertex, head_vertex=skeleton.head_vertex,
        match=match,
    )
