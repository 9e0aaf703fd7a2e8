"""Consensus graphs and exact maximum-clique search.

A ConsensusGraph is an undirected graph whose nodes are measurements and
whose edges mean "these two measurements can share a consensus set". The
maximum clique of such a graph is the consensus-set estimate.

The solver is a branch-and-bound search with greedy-coloring upper bounds,
a degeneracy-ordered greedy clique for the initial lower bound, and k-core
pruning. Adjacency rows are packed bitsets (arbitrary-precision ints), so
candidate-set intersection and popcounts are single word-parallel
operations; this is what keeps the search fast on the large, benign graphs
the registration pipeline produces.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass

import numpy as np

from .core import Correspondence
from .consensus import consistency_matrix
from .errors import GraphSizeError, InsufficientInputError

BRUTEFORCE_MAX_NODES = 25


@dataclass(frozen=True)
class Clique:
    """A set of pairwise-adjacent nodes, stored sorted."""

    nodes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(int(v) for v in self.nodes)))

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class GraphStats:
    """Summary statistics of a consensus graph."""

    density: float
    degeneracy: int
    mean_degree: float


class ConsensusGraph:
    """Undirected graph over measurements, adjacency as packed bit rows.

    `node_ids[v]` maps graph node v back to the index of the measurement it
    represents. `dense` is the boolean adjacency matrix (kept for vectorized
    degree arithmetic); `row_bits(v)` exposes row v as an int bitset where
    bit u is set iff u and v are adjacent.
    """

    def __init__(self, dense: np.ndarray, node_ids: np.ndarray | None = None):
        dense = np.asarray(dense, dtype=bool)
        if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {dense.shape}")
        n = dense.shape[0]
        if n and dense.diagonal().any():
            raise ValueError("adjacency has self-loops")
        if not np.array_equal(dense, dense.T):
            raise ValueError("adjacency is not symmetric")
        if node_ids is None:
            node_ids = np.arange(n, dtype=np.int64)
        node_ids = np.asarray(node_ids, dtype=np.int64)
        if node_ids.shape != (n,):
            raise ValueError("node_ids length must equal node count")
        if n and np.unique(node_ids).shape[0] != n:
            raise ValueError("node_ids must be injective")
        self.n = n
        self.node_ids = node_ids
        self.dense = dense
        # Little-endian packing: bit u of row v <-> dense[v, u].
        self._packed = np.packbits(dense, axis=1, bitorder="little") if n else np.zeros((0, 0), np.uint8)
        self._rows: list[int] | None = None

    def row_bits(self, v: int) -> int:
        return self.rows()[v]

    def rows(self) -> list[int]:
        if self._rows is None:
            self._rows = [int.from_bytes(self._packed[v].tobytes(), "little") for v in range(self.n)]
        return self._rows

    def degrees(self) -> np.ndarray:
        return self.dense.sum(axis=1, dtype=np.int64)

    def edge_count(self) -> int:
        return int(self.dense.sum()) // 2

    def is_clique(self, nodes) -> bool:
        nodes = list(nodes)
        return all(self.dense[u, v] for k, u in enumerate(nodes) for v in nodes[k + 1:])


def build_graph(count: int, predicate) -> ConsensusGraph:
    """Graph on `count` nodes; predicate(i, j) is called once per pair i < j."""
    if count < 1:
        raise InsufficientInputError("build_graph needs at least one node")
    dense = np.zeros((count, count), dtype=bool)
    for i in range(count):
        for j in range(i + 1, count):
            if predicate(i, j):
                dense[i, j] = dense[j, i] = True
    return ConsensusGraph(dense)


def degeneracy_order(g: ConsensusGraph) -> tuple[list[int], int]:
    """Repeated minimum-degree peeling; ties to the smallest node index.

    Returns the removal order and the degeneracy (max degree at removal
    time). The maximum clique size is at most degeneracy + 1.
    """
    n = g.n
    if n == 0:
        return [], 0
    deg = g.degrees().astype(np.int64)
    alive = np.ones(n, dtype=bool)
    order: list[int] = []
    degeneracy = 0
    sentinel = np.int64(n + 1)
    for _ in range(n):
        d = np.where(alive, deg, sentinel)
        v = int(np.argmin(d))
        degeneracy = max(degeneracy, int(d[v]))
        order.append(v)
        alive[v] = False
        deg -= g.dense[v] & alive
    return order, degeneracy


def core_numbers(g: ConsensusGraph) -> np.ndarray:
    """Core number per node: the largest k such that v is in the k-core."""
    n = g.n
    core = np.zeros(n, dtype=np.int64)
    deg = g.degrees().astype(np.int64)
    alive = np.ones(n, dtype=bool)
    sentinel = np.int64(n + 1)
    running = 0
    for _ in range(n):
        d = np.where(alive, deg, sentinel)
        v = int(np.argmin(d))
        running = max(running, int(d[v]))
        core[v] = running
        alive[v] = False
        deg -= g.dense[v] & alive
    return core


def k_core_reduce(g: ConsensusGraph, k: int) -> ConsensusGraph:
    """Maximal subgraph with all degrees >= k.

    Never removes any clique of size >= k + 1: every node of such a clique
    has degree >= k inside it. node_ids of the result map back to the same
    measurement indices as in g.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    alive = np.ones(g.n, dtype=bool)
    deg = g.degrees().astype(np.int64)
    while True:
        bad = alive & (deg < k)
        if not bad.any():
            break
        alive &= ~bad
        deg = deg - g.dense[bad].sum(axis=0, dtype=np.int64)
    idx = np.flatnonzero(alive)
    sub = g.dense[np.ix_(idx, idx)]
    return ConsensusGraph(sub, node_ids=g.node_ids[idx])


def consistency_graph(corrs: list[Correspondence], s_hat: float, c: float = 1.0) -> ConsensusGraph:
    """Known-scale consistency graph over correspondences (pairwise length test)."""
    if len(corrs) < 2:
        raise InsufficientInputError("consistency graph needs at least 2 correspondences")
    return ConsensusGraph(consistency_matrix(corrs, s_hat, c))


def graph_stats(g: ConsensusGraph) -> GraphStats:
    e = g.edge_count()
    density = 2.0 * e / (g.n * (g.n - 1)) if g.n >= 2 else 0.0
    mean_degree = 2.0 * e / g.n if g.n >= 1 else 0.0
    _, degeneracy = degeneracy_order(g)
    return GraphStats(density=density, degeneracy=degeneracy, mean_degree=mean_degree)


def write_edge_list(g: ConsensusGraph, path) -> None:
    """Dump edges as one '[u] [v]' pair per line, 0-indexed, u < v."""
    us, vs = np.nonzero(np.triu(g.dense, k=1))
    with open(path, "w", encoding="ascii") as fh:
        for u, v in zip(us, vs):
            fh.write(f"{u} {v}\n")


# ---------------------------------------------------------------------------
# Maximum clique
# ---------------------------------------------------------------------------

class _Deadline:
    __slots__ = ("t_end", "hit", "ticks")

    def __init__(self, budget_ms: float | None):
        self.t_end = None if budget_ms is None else time.perf_counter() + budget_ms / 1000.0
        self.hit = False
        self.ticks = 0

    def expired(self) -> bool:
        if self.t_end is None:
            return False
        self.ticks += 1
        if self.ticks & 0xFF:
            return self.hit
        if time.perf_counter() > self.t_end:
            self.hit = True
        return self.hit


class _Timeout(Exception):
    pass


def _color_sort(p: int, rows: list[int]) -> tuple[list[int], list[int]]:
    """Greedy coloring of candidate set p (bitset).

    Returns vertices ordered by color class and their 1-based color numbers
    (nondecreasing). A clique uses at most one vertex per class, so the
    number of classes bounds the clique size within p.
    """
    order: list[int] = []
    colors: list[int] = []
    color = 0
    uncolored = p
    while uncolored:
        color += 1
        q = uncolored
        while q:
            v = (q & -q).bit_length() - 1
            order.append(v)
            colors.append(color)
            bit = 1 << v
            uncolored ^= bit
            q &= ~rows[v]
            q ^= bit
    return order, colors


def _greedy_clique(order: list[int], rows: list[int]) -> list[int]:
    """Greedy clique over a vertex order (pass core-most vertices first)."""
    mask = 0
    members: list[int] = []
    for v in order:
        if mask & ~rows[v] == 0:
            members.append(v)
            mask |= 1 << v
    return members


def _expand(cur: list[int], p: int, rows: list[int], best: list, deadline: _Deadline) -> None:
    if deadline.expired():
        raise _Timeout
    order, colors = _color_sort(p, rows)
    size = len(cur)
    for idx in range(len(order) - 1, -1, -1):
        if size + colors[idx] <= best[0]:
            return
        v = order[idx]
        cur.append(v)
        p2 = p & rows[v]
        if p2:
            _expand(cur, p2, rows, best, deadline)
        elif size + 1 > best[0]:
            best[0] = size + 1
            best[1] = cur.copy()
        cur.pop()
        p ^= 1 << v


def _greedy_witness_in(p: int, rows: list[int]) -> tuple[int, int]:
    """Greedy clique grown from the lowest-index candidates of p: (bitset, size)."""
    w = 0
    size = 0
    while p:
        v = (p & -p).bit_length() - 1
        w |= 1 << v
        size += 1
        p &= rows[v]
    return w, size


def _find_clique_witness(p: int, need: int, rows: list[int], deadline: _Deadline) -> int | None:
    """Bitset of some clique of size >= need within p, or None if none exists."""
    if need <= 0:
        return 0
    if p.bit_count() < need:
        return None
    w, size = _greedy_witness_in(p, rows)
    if size >= need:
        return w
    if deadline.expired():
        raise _Timeout
    order, colors = _color_sort(p, rows)
    if colors[-1] < need:
        return None
    for idx in range(len(order) - 1, -1, -1):
        if colors[idx] < need:
            return None
        v = order[idx]
        sub = _find_clique_witness(p & rows[v], need - 1, rows, deadline)
        if sub is not None:
            return sub | (1 << v)
        p ^= 1 << v
    return None


# Route to the complement independent-set engine when the complement is this
# sparse (mean complement degree); coloring search degrades on near-complete
# graphs while branch-and-reduce on their thin complements stays fast.
_DENSE_COMPLEMENT_DEGREE = 24.0


def _complement_rows(rows: list[int], n: int) -> list[int]:
    full = (1 << n) - 1
    return [(full & ~rows[v]) & ~(1 << v) for v in range(n)]


def _bitset_component(p: int, start_bit: int, crows: list[int]) -> int:
    """Connected component of the complement subgraph induced by p."""
    comp = start_bit
    frontier = start_bit
    while frontier:
        reach = 0
        while frontier:
            v = (frontier & -frontier).bit_length() - 1
            reach |= crows[v]
            frontier ^= 1 << v
        frontier = reach & p & ~comp
        comp |= frontier
    return comp


def _mis_component(p: int, crows: list[int], deadline: _Deadline) -> tuple[int, int]:
    """Maximum independent set of one complement component: (size, bitset)."""
    size = 0
    wit = 0
    # Reductions: isolated vertices always join; a degree-1 vertex joins some
    # maximum independent set, removing its neighbor.
    queue = []
    q = p
    while q:
        v = (q & -q).bit_length() - 1
        queue.append(v)
        q ^= 1 << v
    while queue:
        v = queue.pop()
        bit = 1 << v
        if not p & bit:
            continue
        nbrs = crows[v] & p
        d = nbrs.bit_count()
        if d == 0:
            size += 1
            wit |= bit
            p ^= bit
        elif d == 1:
            size += 1
            wit |= bit
            u_bit = nbrs
            u = u_bit.bit_length() - 1
            p ^= bit | u_bit
            q = crows[u] & p
            while q:
                w = (q & -q).bit_length() - 1
                queue.append(w)
                q ^= 1 << w
    if p == 0:
        return size, wit
    if deadline.expired():
        raise _Timeout
    # Branch on the highest-degree remaining vertex.
    best_v, best_d, q = -1, -1, p
    while q:
        v = (q & -q).bit_length() - 1
        d = (crows[v] & p).bit_count()
        if d > best_d:
            best_v, best_d = v, d
        q ^= 1 << v
    bit = 1 << best_v
    s_in, w_in = _mis(p & ~(crows[best_v] | bit), crows, deadline)
    s_in, w_in = s_in + 1, w_in | bit
    s_out, w_out = 0, 0
    if (p ^ bit).bit_count() > s_in:  # exclude branch cannot win otherwise
        s_out, w_out = _mis(p ^ bit, crows, deadline)
    if s_out > s_in:
        return size + s_out, wit | w_out
    return size + s_in, wit | w_in


def _mis(p: int, crows: list[int], deadline: _Deadline) -> tuple[int, int]:
    """Maximum independent set within p on the complement graph: (size, bitset).

    Splits into connected components (independent subproblems) so sparse
    complements decompose into many small searches.
    """
    size = 0
    wit = 0
    while p:
        start = p & -p
        comp = _bitset_component(p, start, crows)
        s, w = _mis_component(comp, crows, deadline)
        size += s
        wit |= w
        p &= ~comp
    return size, wit


def _lex_min_clique(n: int, size: int, witness: int, finder, deadline: _Deadline) -> list[int]:
    """Lexicographically smallest clique of the given (maximum) size.

    `witness` is a known clique of size >= the current target inside the
    candidate set; its members are accepted without a search, so only
    vertices outside the witness pay for an existence query via `finder`
    (which returns a replacement witness or None).
    """
    chosen: list[int] = []
    p = (1 << n) - 1
    need = size
    while need > 0:
        if p == 0:
            raise RuntimeError("clique reconstruction ran out of candidates")
        v = (p & -p).bit_length() - 1
        bit = 1 << v
        if witness & bit:
            chosen.append(v)
            p = finder.restrict(p, v)
            witness = finder.restrict(witness, v)
            need -= 1
            continue
        sub = finder.find(finder.restrict(p, v), need - 1, deadline)
        if sub is not None:
            chosen.append(v)
            p = finder.restrict(p, v)
            witness = sub
            need -= 1
        else:
            p ^= bit
    return chosen


class _SparseFinder:
    """Existence queries via greedy + coloring branch-and-bound."""

    def __init__(self, rows: list[int]):
        self.rows = rows

    def restrict(self, p: int, v: int) -> int:
        return p & self.rows[v]

    def find(self, p: int, need: int, deadline: _Deadline) -> int | None:
        return _find_clique_witness(p, need, self.rows, deadline)


class _DenseFinder:
    """Existence queries via maximum independent set on the complement."""

    def __init__(self, rows: list[int], crows: list[int]):
        self.rows = rows
        self.crows = crows

    def restrict(self, p: int, v: int) -> int:
        return p & self.rows[v]

    def find(self, p: int, need: int, deadline: _Deadline) -> int | None:
        if need <= 0:
            return 0
        if p.bit_count() < need:
            return None
        w, size = _greedy_witness_in(p, self.rows)
        if size >= need:
            return w
        s, wit = _mis(p, self.crows, deadline)
        return wit if s >= need else None


def max_clique(g: ConsensusGraph, time_budget_ms: float | None = None) -> tuple[Clique, bool]:
    """Exact maximum clique; ties broken by smallest lexicographic node set.

    With a time budget, returns the best clique found and an exactness flag
    (False when the budget expired before the search finished). Node numbers
    in the returned clique refer to g's own numbering.
    """
    if g.n < 1:
        raise InsufficientInputError("max_clique needs at least one node")
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 4 * g.n + 1000))
    deadline = _Deadline(time_budget_ms)

    order, degeneracy = degeneracy_order(g)
    rows = g.rows()
    greedy = _greedy_clique(list(reversed(order)), rows)
    lb = len(greedy)

    # Shed everything that cannot be in a clique larger than the greedy one.
    reduced = k_core_reduce(g, max(lb - 1, 0))
    sub_rows = reduced.rows()
    # k_core_reduce composes node_ids, so rebuild the map into g's numbering.
    pos_of_id = {int(mid): i for i, mid in enumerate(g.node_ids)}
    back_to_g = np.array([pos_of_id[int(m)] for m in reduced.node_ids], dtype=np.int64)

    to_reduced = {int(gv): rv for rv, gv in enumerate(back_to_g)}
    best = [lb, [to_reduced[v] for v in greedy]]

    exact = True
    if reduced.n and lb < degeneracy + 1:
        # The greedy clique may be beaten; search the reduced graph.
        mean_comp_degree = (reduced.n - 1) - 2.0 * reduced.edge_count() / max(reduced.n, 1)
        try:
            if mean_comp_degree <= _DENSE_COMPLEMENT_DEGREE:
                crows = _complement_rows(sub_rows, reduced.n)
                s, wit = _mis((1 << reduced.n) - 1, crows, deadline)
                if s > best[0]:
                    members = []
                    while wit:
                        v = (wit & -wit).bit_length() - 1
                        members.append(v)
                        wit ^= 1 << v
                    best = [s, members]
            else:
                _expand([], (1 << reduced.n) - 1, sub_rows, best, deadline)
        except _Timeout:
            exact = False
    if reduced.n and exact:
        witness = 0
        for v in best[1]:
            witness |= 1 << v
        mean_comp_degree = (reduced.n - 1) - 2.0 * reduced.edge_count() / max(reduced.n, 1)
        if mean_comp_degree <= _DENSE_COMPLEMENT_DEGREE:
            finder = _DenseFinder(sub_rows, _complement_rows(sub_rows, reduced.n))
        else:
            finder = _SparseFinder(sub_rows)
        try:
            best[1] = _lex_min_clique(reduced.n, best[0], witness, finder, deadline)
        except _Timeout:
            pass  # size is already exact; keep the incumbent's node set
    nodes = [int(back_to_g[v]) for v in best[1]]
    return Clique(tuple(nodes)), exact


def max_clique_bruteforce(g: ConsensusGraph) -> Clique:
    """Exact maximum clique by subset enumeration (test oracle, n <= 25).

    Independent of the branch-and-bound machinery: include-first DFS over
    ascending node indices, which visits cliques in lexicographic order, so
    the first clique reaching each size is the lexicographically smallest.
    """
    if g.n > BRUTEFORCE_MAX_NODES:
        raise GraphSizeError(f"brute force limited to {BRUTEFORCE_MAX_NODES} nodes, got {g.n}")
    if g.n < 1:
        raise InsufficientInputError("max_clique_bruteforce needs at least one node")
    rows = g.rows()
    best_size = 0
    best_nodes: list[int] = []

    def dfs(cur: list[int], p: int) -> None:
        nonlocal best_size, best_nodes
        if len(cur) > best_size:
            best_size = len(cur)
            best_nodes = cur.copy()
        if len(cur) + p.bit_count() <= best_size:
            return
        while p:
            v = (p & -p).bit_length() - 1
            bit = 1 << v
            cur.append(v)
            dfs(cur, p & rows[v])
            cur.pop()
            p ^= bit
            if len(cur) + p.bit_count() <= best_size:
                return

    dfs([], (1 << g.n) - 1)
    return Clique(tuple(best_nodes))
