"""
Directed graph primitives for the consensus network.

Edge convention: a stored pair ``(i, j)`` means node ``j`` is an in-neighbor
of node ``i``, i.e. ``j``'s state flows into ``i``'s update. Every module in
this package uses this single orientation.
"""

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Set, Tuple
import math

Edge = Tuple[int, int]

# Distinguished marker for unreachable pairs; never a real path length.
INFINITE = math.inf


class GraphError(ValueError):
    """Raised for malformed graphs or out-of-range node ids."""
    pass


class DiameterUndefined(GraphError):
    """Raised when the diameter of a graph that is not strongly connected is requested."""
    pass


@dataclass(frozen=True)
class Digraph:
    """Directed graph on nodes ``0..n-1`` without self-loops."""
    n: int
    edges: FrozenSet[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"Node count must be positive, got {self.n}")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise GraphError(f"Self-loop ({i}, {j}) is not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"Edge ({i}, {j}) has an endpoint outside [0, {self.n})")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge]) -> "Digraph":
        return cls(n=n, edges=frozenset(edges))

    @property
    def nodes(self) -> range:
        return range(self.n)

    def check_node(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise GraphError(f"Node {i} is outside [0, {self.n})")

    def in_adjacency(self) -> List[List[int]]:
        """Sorted in-neighbor lists, indexed by node."""
        return self._in_adj

    def out_adjacency(self) -> List[List[int]]:
        """Sorted out-neighbor lists: ``j -> [i, ...]`` for every ``(i, j)``."""
        return self._out_adj

    @cached_property
    def _in_adj(self) -> List[List[int]]:
        adj: List[List[int]] = [[] for _ in self.nodes]
        for i, j in self.edges:
            adj[i].append(j)
        return [sorted(a) for a in adj]

    @cached_property
    def _out_adj(self) -> List[List[int]]:
        adj: List[List[int]] = [[] for _ in self.nodes]
        for i, j in self.edges:
            adj[j].append(i)
        return [sorted(a) for a in adj]


@dataclass(frozen=True)
class DistanceMatrix:
    """``d[i][j]`` is the shortest directed path length from ``j`` to ``i``."""
    d: Tuple[Tuple[float, ...], ...]

    @property
    def n(self) -> int:
        return len(self.d)

    def __getitem__(self, i: int) -> Tuple[float, ...]:
        return self.d[i]

    def is_finite(self) -> bool:
        return all(v != INFINITE for row in self.d for v in row)


def in_neighbors(g: Digraph, i: int) -> Set[int]:
    g.check_node(i)
    return {j for (a, j) in g.edges if a == i}


def out_neighbors(g: Digraph, j: int) -> Set[int]:
    g.check_node(j)
    return {i for (i, b) in g.edges if b == j}


def _bfs_from(source: int, out_adj: List[List[int]]) -> Dict[int, int]:
    """Hop counts along the direction information travels (source -> receivers)."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in out_adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def distance_matrix(g: Digraph) -> DistanceMatrix:
    out_adj = g.out_adjacency()
    rows: List[List[float]] = [[INFINITE] * g.n for _ in g.nodes]
    for source in g.nodes:
        for target, hops in _bfs_from(source, out_adj).items():
            rows[target][source] = hops
    return DistanceMatrix(d=tuple(tuple(r) for r in rows))


def is_strongly_connected(g: Digraph) -> bool:
    # One forward and one backward sweep from node 0 suffice.
    if g.n == 1:
        return True
    forward = _bfs_from(0, g.out_adjacency())
    if len(forward) != g.n:
        return False
    backward = _bfs_from(0, g.in_adjacency())
    return len(backward) == g.n


def diameter(g: Digraph) -> int:
    """Largest finite distance over ordered node pairs; requires strong connectivity."""
    if not is_strongly_connected(g):
        raise DiameterUndefined(f"Graph on {g.n} nodes is not strongly connected")
    if g.n == 1:
        # Single node: no pairs; report the smallest admissible threshold.
        return 1
    dm = distance_matrix(g)
    return int(max(dm[i][j] for i in g.nodes for j in g.nodes if i != j))


def has_spanning_tree(g: Digraph) -> bool:
    """True iff some root reaches every node along the information flow."""
    out_adj = g.out_adjacency()
    return any(len(_bfs_from(root, out_adj)) == g.n for root in g.nodes)


def complete_digraph(n: int) -> Digraph:
    return Digraph.from_edges(n, ((i, j) for i in range(n) for j in range(n) if i != j))


def ring_digraph(n: int) -> Digraph:
    """Directed ring where node ``i`` listens to ``i+1`` (mod n)."""
    return Digraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)] if n > 1 else [])
