"""Window-intersection graph, chordal extension, and clique-tree extraction.

The pipeline turns an arbitrary window family into a sequence of maximal
cliques B_1 < ... < B_m with the running intersection property (RIP): for
every i < m there is a parent index k(i) > i with

    B_i  ∩ (B_{i+1} ∪ ... ∪ B_m)  =  B_i ∩ B_{k(i)}.

That property is what lets the summation engine factorize the conditional
expectation clique by clique.  The steps:

  1. build the graph whose edges join every pair of cells sharing a window;
  2. pick an elimination ordering (greedy minimum degree, or caller-supplied)
     and relabel vertices so ordering position == label;
  3. triangularize: for each vertex, pairwise-connect its higher-labelled
     neighbors, yielding a chordal graph with the identity ordering as a
     perfect elimination ordering;
  4. collect the elimination cliques, drop non-maximal ones, and sort the
     maximal cliques by the descending-member lexicographic order; the parent
     map k(i) then falls out as the first later clique containing the
     forward intersection.

All clique-tree structures live in the renumbered label space; the attached
ordering maps back to original labels for display.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Sequence

from .errors import ConsistencyError, InputError
from .windows import WindowFamily

__all__ = [
    "UndirectedGraph",
    "EliminationOrdering",
    "ChordalExtension",
    "CliqueTree",
    "build_window_graph",
    "minimum_degree_ordering",
    "triangularize",
    "elimination_cliques",
    "maximal_cliques",
    "perfect_sequence",
    "verify_rip",
    "assign_windows",
    "build_clique_tree",
]


@dataclass(frozen=True)
class UndirectedGraph:
    """Simple undirected graph on vertices 1..n, edges stored as (i, j), i < j."""

    vertex_count: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        for a, b in self.edges:
            if a == b:
                raise InputError(f"self-loop at vertex {a}")
            if not (1 <= a < b <= self.vertex_count):
                raise InputError(
                    f"edge ({a},{b}) is not an ordered pair inside 1..{self.vertex_count}"
                )

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[tuple[int, int]]) -> "UndirectedGraph":
        normalized = frozenset((min(a, b), max(a, b)) for a, b in edges)
        return cls(vertex_count, normalized)

    def neighbor_map(self) -> dict[int, set[int]]:
        nbrs: dict[int, set[int]] = {v: set() for v in range(1, self.vertex_count + 1)}
        for a, b in self.edges:
            nbrs[a].add(b)
            nbrs[b].add(a)
        return nbrs

    @property
    def edge_count(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class EliminationOrdering:
    """A permutation v_1..v_n of the vertex set; position i gets new label i."""

    order: tuple[int, ...]

    def __post_init__(self):
        n = len(self.order)
        if sorted(self.order) != list(range(1, n + 1)):
            raise InputError("ordering is not a permutation of 1..n")

    def __len__(self) -> int:
        return len(self.order)

    def new_label(self, original: int) -> int:
        return self._position()[original]

    def original_label(self, renumbered: int) -> int:
        return self.order[renumbered - 1]

    def renumber_set(self, vertices: Iterable[int]) -> frozenset[int]:
        pos = self._position()
        return frozenset(pos[v] for v in vertices)

    def restore_set(self, vertices: Iterable[int]) -> frozenset[int]:
        return frozenset(self.order[v - 1] for v in vertices)

    def _position(self) -> dict[int, int]:
        # tiny n in practice; rebuild rather than caching on a frozen dataclass
        return {v: i + 1 for i, v in enumerate(self.order)}

    @classmethod
    def identity(cls, n: int) -> "EliminationOrdering":
        return cls(tuple(range(1, n + 1)))


@dataclass(frozen=True)
class ChordalExtension:
    """A chordal supergraph of the renumbered base graph.

    Edges and fill edges are in renumbered labels (ordering position ==
    label); the base graph keeps its original labels.
    """

    base: UndirectedGraph
    ordering: EliminationOrdering
    edges: frozenset[tuple[int, int]]       # renumbered base edges + fill
    fill_edges: frozenset[tuple[int, int]]  # renumbered

    @property
    def vertex_count(self) -> int:
        return self.base.vertex_count

    def renumbered_base_edges(self) -> frozenset[tuple[int, int]]:
        return self.edges - self.fill_edges

    def fill_edges_original(self) -> frozenset[tuple[int, int]]:
        restore = self.ordering.original_label
        return frozenset(
            (min(restore(a), restore(b)), max(restore(a), restore(b)))
            for a, b in self.fill_edges
        )

    def neighbor_map(self) -> dict[int, set[int]]:
        nbrs: dict[int, set[int]] = {v: set() for v in range(1, self.vertex_count + 1)}
        for a, b in self.edges:
            nbrs[a].add(b)
            nbrs[b].add(a)
        return nbrs

    def is_clique(self, vertices: Iterable[int]) -> bool:
        vs = sorted(vertices)
        return all((a, b) in self.edges for a, b in combinations(vs, 2))


@dataclass(frozen=True)
class CliqueTree:
    """Perfect sequence of maximal cliques with derived decomposition sets.

    For clique i (1-based): `parent[i-1]` is k(i) (0 for the last clique),
    `separators[i-1]` is C_i = B_i ∩ B_{k(i)}, `residuals[i-1]` is
    R_i = B_i \\ C_i, and `supports[i-1]` is T_i, the union of residuals over
    the subtree hanging off clique i.  Residuals partition the vertex set.
    """

    cliques: tuple[frozenset[int], ...]
    parent: tuple[int, ...]
    separators: tuple[frozenset[int], ...]
    residuals: tuple[frozenset[int], ...]
    supports: tuple[frozenset[int], ...]
    ordering: EliminationOrdering | None = field(default=None, compare=False)
    extension: ChordalExtension | None = field(default=None, compare=False)
    window_map: tuple[int, ...] | None = field(default=None, compare=False)

    @property
    def size(self) -> int:
        return len(self.cliques)

    @property
    def vertex_count(self) -> int:
        return sum(len(r) for r in self.residuals)

    def children(self, i: int) -> tuple[int, ...]:
        return tuple(j for j in range(1, self.size) if self.parent[j - 1] == i)

    def fan_in(self, i: int) -> int:
        return sum(1 for j in range(1, self.size) if self.parent[j - 1] == i)

    def clique_original(self, i: int) -> frozenset[int]:
        if self.ordering is None:
            return self.cliques[i - 1]
        return self.ordering.restore_set(self.cliques[i - 1])

    def with_window_map(self, window_map: Sequence[int]) -> "CliqueTree":
        return replace(self, window_map=tuple(window_map))


def build_window_graph(windows: WindowFamily, vertex_count: int) -> UndirectedGraph:
    """Graph with an edge between every two cells that share some window."""
    if vertex_count < 1:
        raise InputError("vertex_count must be >= 1")
    edges: set[tuple[int, int]] = set()
    for w in windows:
        if w[-1] > vertex_count:
            raise InputError(f"window {w!r} leaves the vertex range 1..{vertex_count}")
        edges.update(combinations(w, 2))
    return UndirectedGraph(vertex_count, frozenset(edges))


def minimum_degree_ordering(graph: UndirectedGraph) -> EliminationOrdering:
    """Greedy minimum-degree elimination ordering.

    Repeatedly removes a vertex of minimum degree (smallest label on ties)
    together with its incident edges.  No fill edges are considered during
    the ordering itself; triangularization happens afterwards.
    """
    nbrs = graph.neighbor_map()
    remaining = set(nbrs)
    order = []
    while remaining:
        v = min(remaining, key=lambda u: (len(nbrs[u]), u))
        order.append(v)
        remaining.remove(v)
        for w in nbrs[v]:
            nbrs[w].discard(v)
        del nbrs[v]
    return EliminationOrdering(tuple(order))


def triangularize(graph: UndirectedGraph, ordering: EliminationOrdering) -> ChordalExtension:
    """Renumber by the ordering, then run the elimination game.

    For each vertex i = 1..n in the renumbered graph, every pair of its
    higher-labelled neighbors is connected (adding fill edges as needed).
    The result is chordal and the identity ordering on the renumbered
    labels is a perfect elimination ordering.
    """
    if len(ordering) != graph.vertex_count:
        raise InputError("ordering length does not match the vertex count")
    n = graph.vertex_count
    position = {v: i + 1 for i, v in enumerate(ordering.order)}
    nbrs: dict[int, set[int]] = {v: set() for v in range(1, n + 1)}
    for a, b in graph.edges:
        ra, rb = position[a], position[b]
        nbrs[ra].add(rb)
        nbrs[rb].add(ra)

    base_edges = frozenset(
        (min(position[a], position[b]), max(position[a], position[b]))
        for a, b in graph.edges
    )
    fill: set[tuple[int, int]] = set()
    for i in range(1, n + 1):
        higher = sorted(u for u in nbrs[i] if u > i)
        for a, b in combinations(higher, 2):
            if b not in nbrs[a]:
                nbrs[a].add(b)
                nbrs[b].add(a)
                fill.add((a, b))
    return ChordalExtension(
        base=graph,
        ordering=ordering,
        edges=base_edges | fill,
        fill_edges=frozenset(fill),
    )


def elimination_cliques(ext: ChordalExtension) -> list[frozenset[int]]:
    """The clique V_i = {i} ∪ {higher-labelled neighbors of i}, for each i."""
    nbrs = ext.neighbor_map()
    return [
        frozenset({i} | {j for j in nbrs[i] if j > i})
        for i in range(1, ext.vertex_count + 1)
    ]


def maximal_cliques(cliques: Sequence[frozenset[int]]) -> list[frozenset[int]]:
    """Drop every V_i contained in an earlier V_l (l < i).

    On elimination cliques of a chordal graph, what remains is exactly the
    set of maximal cliques.
    """
    kept: list[frozenset[int]] = []
    for vi in cliques:
        if not any(vi <= vl for vl in kept):
            kept.append(vi)
    return kept


def _descending_key(clique: frozenset[int]) -> tuple[int, ...]:
    return tuple(sorted(clique, reverse=True))


def perfect_sequence(cliques: Iterable[frozenset[int]]) -> CliqueTree:
    """Order maximal cliques into a perfect sequence and derive k, C, R, T.

    Cliques are sorted ascending by comparing their members largest-first
    (ties broken by the shorter clique, which cannot occur between
    incomparable maximal cliques).  The parent of clique i is the first
    later clique containing B_i ∩ (union of all later cliques); for a
    clique whose component is exhausted that intersection is empty and the
    parent is simply the next clique, which chains connected components
    into one sequence with empty separators.
    """
    ordered = sorted(set(cliques), key=_descending_key)
    m = len(ordered)
    if m == 0:
        raise InputError("no cliques given")

    # forward unions: union of cliques strictly after i
    suffix: list[frozenset[int]] = [frozenset()] * m
    acc: frozenset[int] = frozenset()
    for i in range(m - 1, -1, -1):
        suffix[i] = acc
        acc = acc | ordered[i]

    parent = [0] * m
    separators: list[frozenset[int]] = [frozenset()] * m
    residuals: list[frozenset[int]] = [frozenset()] * m
    for i in range(m - 1):
        forward = ordered[i] & suffix[i]
        k = next((k for k in range(i + 1, m) if forward <= ordered[k]), None)
        if k is None:
            raise ConsistencyError(
                f"running intersection fails at clique {i + 1}: no later clique "
                f"contains {sorted(forward)}"
            )
        parent[i] = k + 1
        separators[i] = ordered[i] & ordered[k]
        residuals[i] = ordered[i] - separators[i]
        if separators[i] != forward:  # guaranteed by construction; cheap sanity
            raise ConsistencyError(f"separator mismatch at clique {i + 1}")
    residuals[m - 1] = ordered[m - 1]

    supports: list[frozenset[int]] = [frozenset()] * m
    for i in range(m):
        acc = residuals[i]
        for j in range(i):
            if parent[j] == i + 1:
                acc = acc | supports[j]
        supports[i] = acc

    return CliqueTree(
        cliques=tuple(ordered),
        parent=tuple(parent),
        separators=tuple(separators),
        residuals=tuple(residuals),
        supports=tuple(supports),
    )


def verify_rip(tree: CliqueTree) -> bool:
    """Check the running intersection property and derived-set consistency.

    Verifies k(i) > i, the RIP identity for every non-final clique, that
    residuals are pairwise disjoint and cover the vertex set, and (when a
    chordal extension is attached) that every separator is a clique of it.
    """
    m = tree.size
    seen: set[int] = set()
    for i in range(m):
        if tree.residuals[i] & seen:
            return False
        seen |= tree.residuals[i]
    if seen != set().union(*tree.cliques):
        return False

    for i in range(m - 1):
        k = tree.parent[i]
        if not i + 1 < k <= m:
            return False
        forward = frozenset().union(*tree.cliques[i + 1 :])
        if tree.cliques[i] & forward != tree.cliques[i] & tree.cliques[k - 1]:
            return False
        if tree.separators[i] != tree.cliques[i] & tree.cliques[k - 1]:
            return False
        if tree.extension is not None and not tree.extension.is_clique(tree.separators[i]):
            return False
    return True


def assign_windows(tree: CliqueTree, windows: WindowFamily) -> tuple[int, ...]:
    """Map every window to the smallest-index clique containing it.

    Windows are given in original labels; when the tree carries an ordering
    they are renumbered before the containment test.  Every window is a
    clique of the extension by construction, so failure to find a container
    indicates a broken pipeline.
    """
    out = []
    for j, w in enumerate(windows):
        target = (
            tree.ordering.renumber_set(w) if tree.ordering is not None else frozenset(w)
        )
        i = next((i for i, b in enumerate(tree.cliques, start=1) if target <= b), None)
        if i is None:
            raise ConsistencyError(
                f"window #{j} {tuple(w)!r} is not contained in any maximal clique"
            )
        out.append(i)
    return tuple(out)


def build_clique_tree(
    windows: WindowFamily,
    vertex_count: int,
    ordering: EliminationOrdering | None = None,
) -> CliqueTree:
    """Full pipeline: window graph -> chordal extension -> clique tree + window map."""
    graph = build_window_graph(windows, vertex_count)
    if ordering is None:
        ordering = minimum_degree_ordering(graph)
    ext = triangularize(graph, ordering)
    tree = perfect_sequence(maximal_cliques(elimination_cliques(ext)))
    tree = replace(tree, ordering=ordering, extension=ext)
    return tree.with_window_map(assign_windows(tree, windows))
