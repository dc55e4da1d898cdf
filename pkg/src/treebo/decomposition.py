"""Tree-based decompositions of a d-dimensional input space.

A decomposition is a collection of components (subsets of the dimension
indices ``1..d``).  The tree-based decompositions used throughout this
package consist of exactly ``E`` pairwise components whose edges form an
acyclic undirected graph, plus a singleton component for every dimension
not covered by an edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DecompositionError, InvalidParameterError


@dataclass(frozen=True, order=True)
class Component:
    """An ordered, duplicate-free set of 1-based dimension indices."""

    dims: tuple[int, ...]

    def __init__(self, dims):
        dims = tuple(sorted(int(i) for i in dims))
        if not dims:
            raise InvalidParameterError("component must contain at least one dimension")
        if len(set(dims)) != len(dims):
            raise InvalidParameterError(f"component has duplicate dimensions: {dims}")
        object.__setattr__(self, "dims", dims)

    def __len__(self):
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)

    def __str__(self):
        return ",".join(str(i) for i in self.dims)


@dataclass(frozen=True)
class Decomposition:
    """A set of components over dimensions ``1..d``.

    Components are stored in a canonical sorted order so that equality and
    serialisation are deterministic.
    """

    d: int
    components: tuple[Component, ...] = field(default_factory=tuple)

    def __init__(self, d: int, components):
        comps = tuple(sorted(c if isinstance(c, Component) else Component(c) for c in components))
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "components", comps)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    @property
    def edges(self) -> tuple[Component, ...]:
        return tuple(c for c in self.components if len(c) == 2)

    @property
    def singletons(self) -> tuple[int, ...]:
        return tuple(c.dims[0] for c in self.components if len(c) == 1)


class _UnionFind:
    """Disjoint sets over ``1..d`` with path compression and union by rank."""

    def __init__(self, d: int):
        self._parent = list(range(d + 1))
        self._rank = [0] * (d + 1)

    def find(self, a: int) -> int:
        root = a
        while self._parent[root] != root:
            root = self._parent[root]
        while self._parent[a] != root:
            self._parent[a], a = root, self._parent[a]
        return root

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self._rank[ra] < self._rank[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        if self._rank[ra] == self._rank[rb]:
            self._rank[ra] += 1


def sample_random_tree(d: int, num_edges: int, rng: np.random.Generator) -> Decomposition:
    """Sample a tree decomposition with ``num_edges`` pairwise components.

    Two independent random permutations of the dimensions are walked in a
    nested loop; a pair is accepted as an edge whenever its endpoints lie
    in different connected components, and the loop exits as soon as the
    requested number of edges has been collected.  Every dimension not
    covered by an edge becomes a singleton component.

    Parameters
    ----------
    d : int
        Number of input dimensions, at least 1.
    num_edges : int
        Number of pairwise components, in ``[0, d - 1]``.
    rng : numpy.random.Generator
        Source of randomness; a fixed generator state yields a fixed tree.
    """
    if d < 1:
        raise InvalidParameterError(f"d must be positive, got {d}")
    if not 0 <= num_edges <= d - 1:
        raise InvalidParameterError(
            f"num_edges must be in [0, {d - 1}] for d={d}, got {num_edges}"
        )
    edges: list[tuple[int, int]] = []
    if num_edges > 0:
        order_in = rng.permutation(np.arange(1, d + 1))
        order_out = rng.permutation(np.arange(1, d + 1))
        uf = _UnionFind(d)
        done = False
        for n_in in order_in:
            for n_out in order_out:
                if not uf.connected(int(n_in), int(n_out)):
                    uf.union(int(n_in), int(n_out))
                    a, b = int(n_in), int(n_out)
                    edges.append((a, b) if a < b else (b, a))
                if len(edges) == num_edges:
                    done = True
                    break
            if done:
                break
    covered = {i for e in edges for i in e}
    components = [Component(e) for e in edges]
    components.extend(Component((i,)) for i in range(1, d + 1) if i not in covered)
    return Decomposition(d, components)


def validate(g: Decomposition) -> None:
    """Check all tree-decomposition invariants, raising on the first failure."""
    seen_singleton: set[int] = set()
    edges: list[tuple[int, int]] = []
    covered: set[int] = set()
    for c in g.components:
        if len(c) > 2:
            raise DecompositionError(
                "component-too-large", f"component {c} has more than two dimensions"
            )
        for i in c:
            if not 1 <= i <= g.d:
                raise DecompositionError(
                    "dimension-out-of-range", f"dimension {i} outside [1, {g.d}]"
                )
            covered.add(i)
        if len(c) == 1:
            i = c.dims[0]
            if i in seen_singleton:
                raise DecompositionError(
                    "duplicate-singleton", f"dimension {i} appears in two singletons"
                )
            seen_singleton.add(i)
        else:
            edges.append(c.dims)
    missing = set(range(1, g.d + 1)) - covered
    if missing:
        raise DecompositionError(
            "dimension-uncovered", f"dimensions {sorted(missing)} not covered"
        )
    uf = _UnionFind(g.d)
    for a, b in edges:
        if uf.connected(a, b):
            raise DecompositionError(
                "cycle-detected", f"edge ({a},{b}) closes a cycle"
            )
        uf.union(a, b)


def connected_groups(g: Decomposition):
    """Split the decomposition's edge graph into its trees.

    Returns
    -------
    (groups, singletons)
        ``groups`` is a list of ``(nodes, edges)`` pairs, one per tree of
        the forest, with nodes sorted ascending and edges in canonical
        order.  ``singletons`` lists the dimensions covered by no edge.
    """
    adjacency: dict[int, list[int]] = {}
    for a, b in (c.dims for c in g.edges):
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
    groups = []
    visited: set[int] = set()
    for start in sorted(adjacency):
        if start in visited:
            continue
        stack, nodes = [start], set()
        while stack:
            node = stack.pop()
            if node in nodes:
                continue
            nodes.add(node)
            stack.extend(n for n in adjacency[node] if n not in nodes)
        visited |= nodes
        edges = [c.dims for c in g.edges if c.dims[0] in nodes]
        groups.append((tuple(sorted(nodes)), tuple(sorted(edges))))
    singletons = tuple(i for i in range(1, g.d + 1) if i not in visited)
    return groups, singletons


def edge_frequencies(d: int, num_edges: int, samples: int, rng: np.random.Generator):
    """Empirical per-edge selection frequency over repeated tree draws.

    Returns a dict mapping every unordered pair ``(i, j)`` with
    ``i < j`` to its observed frequency.  Frequencies sum to
    ``num_edges`` because each draw contributes exactly that many edges.
    """
    if samples < 1:
        raise InvalidParameterError(f"samples must be >= 1, got {samples}")
    counts = {(i, j): 0 for i in range(1, d + 1) for j in range(i + 1, d + 1)}
    for _ in range(samples):
        g = sample_random_tree(d, num_edges, rng)
        for c in g.edges:
            counts[c.dims] += 1
    return {e: n / samples for e, n in counts.items()}


def from_edges(d: int, edges) -> Decomposition:
    """Build a decomposition from pair components, filling in singletons."""
    edges = [tuple(sorted(int(i) for i in e)) for e in edges]
    covered = {i for e in edges for i in e}
    components = [Component(e) for e in edges]
    components.extend(Component((i,)) for i in range(1, d + 1) if i not in covered)
    return Decomposition(d, components)


def full_pairwise(d: int) -> Decomposition:
    """The (non-tree) decomposition containing every pairwise component."""
    return Decomposition(
        d, [Component((i, j)) for i in range(1, d + 1) for j in range(i + 1, d + 1)]
    )


def serialize(g: Decomposition, sep: str = "\n") -> str:
    """Render components in canonical order, one per ``sep``-separated field."""
    return sep.join(str(c) for c in g.components)


def deserialize(text: str, d: int, sep: str = "\n") -> Decomposition:
    """Inverse of :func:`serialize`."""
    parts = [p for p in text.strip().split(sep) if p]
    comps = [Component(int(i) for i in p.split(",")) for p in parts]
    return Decomposition(d, comps)
