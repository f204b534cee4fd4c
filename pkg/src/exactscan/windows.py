"""Scan-window families and their generators.

A scan window is a candidate cluster: a nonempty subset of the cell index set
V = {1, ..., n}.  A window family is an ordered, duplicate-free collection of
windows; the whole family defines the multiple-testing problem that the exact
p-value adjusts for.

Two generators cover the common cases: consecutive time intervals up to a
maximum length (temporal clustering) and singletons plus adjacent pairs on a
district adjacency graph (spatial clustering).  Arbitrary families can be
built directly from any iterable of subsets.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InputError

__all__ = [
    "WindowFamily",
    "Adjacency",
    "temporal_windows",
    "spatial_windows",
    "partition_windows",
]


@dataclass(frozen=True)
class WindowFamily:
    """Ordered collection of scan windows with canonical member order.

    Each window is stored as a sorted tuple of vertex labels; duplicates
    (same member set) are rejected.  Optional per-vertex display labels are
    carried through to reports but play no role in computation.
    """

    windows: tuple[tuple[int, ...], ...]
    labels: dict[int, str] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.windows:
            raise InputError("window family is empty")
        seen = set()
        for w in self.windows:
            if not w:
                raise InputError("empty window in family")
            if any((not isinstance(v, int)) or v < 1 for v in w):
                raise InputError(f"window {w!r} has a non-positive or non-integer member")
            if tuple(sorted(w)) != w:
                raise InputError(f"window {w!r} is not in canonical sorted order")
            if len(set(w)) != len(w):
                raise InputError(f"window {w!r} repeats a member")
            if w in seen:
                raise InputError(f"duplicate window {w!r}")
            seen.add(w)

    @classmethod
    def from_iterable(cls, windows: Iterable[Iterable[int]], labels=None) -> "WindowFamily":
        return cls(tuple(tuple(sorted(w)) for w in windows), labels)

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)

    def member_union(self) -> frozenset[int]:
        out: set[int] = set()
        for w in self.windows:
            out.update(w)
        return frozenset(out)

    def label_of(self, vertex: int) -> str:
        if self.labels and vertex in self.labels:
            return self.labels[vertex]
        return str(vertex)


@dataclass(frozen=True)
class Adjacency:
    """Symmetric adjacency relation on vertices 1..n (no self-adjacency)."""

    vertex_count: int
    neighbors: tuple[frozenset[int], ...]  # index v-1 -> neighbor set of v

    @classmethod
    def from_edges(cls, vertex_count: int, edges: Iterable[tuple[int, int]]) -> "Adjacency":
        if vertex_count < 1:
            raise InputError("vertex_count must be >= 1")
        nbrs: list[set[int]] = [set() for _ in range(vertex_count)]
        for a, b in edges:
            if a == b:
                raise InputError(f"self-adjacency at vertex {a}")
            for v in (a, b):
                if not 1 <= v <= vertex_count:
                    raise InputError(f"adjacency edge ({a},{b}) leaves 1..{vertex_count}")
            nbrs[a - 1].add(b)
            nbrs[b - 1].add(a)
        return cls(vertex_count, tuple(frozenset(s) for s in nbrs))

    def edge_list(self) -> list[tuple[int, int]]:
        out = []
        for v in range(1, self.vertex_count + 1):
            for w in self.neighbors[v - 1]:
                if v < w:
                    out.append((v, w))
        return sorted(out)


def temporal_windows(n_periods: int, max_len: int, labels=None) -> WindowFamily:
    """All consecutive intervals of length 1..max_len over periods 1..n.

    Windows are emitted in increasing (length, start) order; the family size
    is sum_{l=1}^{max_len} (n_periods - l + 1).
    """
    if not 1 <= max_len <= n_periods:
        raise InputError(f"max window length {max_len} not in 1..{n_periods}")
    out = []
    for length in range(1, max_len + 1):
        for start in range(1, n_periods - length + 2):
            out.append(tuple(range(start, start + length)))
    return WindowFamily(tuple(out), labels)


def spatial_windows(adjacency: Adjacency, max_size: int = 2, labels=None) -> WindowFamily:
    """All singleton districts, plus all adjacent pairs when max_size is 2."""
    if max_size not in (1, 2):
        raise InputError("max_size must be 1 or 2")
    out: list[tuple[int, ...]] = [(v,) for v in range(1, adjacency.vertex_count + 1)]
    if max_size == 2:
        out.extend(adjacency.edge_list())
    return WindowFamily(tuple(out), labels)


def partition_windows(
    family: WindowFamily,
    groups: int,
    seed: int | None = None,
    assignment: Sequence[int] | None = None,
) -> list[WindowFamily]:
    """Split a family into disjoint groups covering every window exactly once.

    With a seed, the split is a deterministic uniform random balanced
    partition (group sizes differ by at most one).  With an explicit
    assignment (one group index per window, 0-based), exactly that partition
    is used; it must assign every window and leave no group empty.
    """
    m = len(family)
    if not 1 <= groups <= m:
        raise InputError(f"group count {groups} not in 1..{m}")
    if assignment is not None:
        if len(assignment) != m:
            raise InputError(
                f"assignment length {len(assignment)} does not match family size {m}"
            )
        buckets: list[list[tuple[int, ...]]] = [[] for _ in range(groups)]
        for idx, g in enumerate(assignment):
            if not 0 <= g < groups:
                raise InputError(f"assignment group {g} for window {idx} not in 0..{groups - 1}")
            buckets[g].append(family.windows[idx])
        if any(not b for b in buckets):
            empty = [i for i, b in enumerate(buckets) if not b]
            raise InputError(f"assignment leaves group(s) {empty} empty")
    else:
        order = list(range(m))
        random.Random(seed).shuffle(order)
        base, extra = divmod(m, groups)
        buckets = []
        pos = 0
        for g in range(groups):
            size = base + (1 if g < extra else 0)
            chunk = sorted(order[pos : pos + size])
            buckets.append([family.windows[i] for i in chunk])
            pos += size
    return [WindowFamily(tuple(b), family.labels) for b in buckets]
