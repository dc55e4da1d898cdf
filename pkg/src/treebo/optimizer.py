"""Exact grid maximisation of additive acquisitions.

The acquisition decomposes over the components of a tree decomposition,
so its restriction to a per-dimension grid is maximised exactly: each
singleton component independently, and each tree of the forest by
leaf-to-root dynamic programming over the edge tables (max-sum message
passing with backtracking pointers).

A brute-force enumerator over the full product grid serves as the
testing oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acquisition import AcquisitionSpec, component_term, total_acquisition
from .decomposition import Component, connected_groups
from .errors import InvalidParameterError, ResourceError
from .gp import GpModel

DEFAULT_GRID_SIZE = 100
DEFAULT_MEMORY_CAP_MB = 512.0


@dataclass(frozen=True)
class ContinuousDim:
    """A continuous interval discretised to ``grid_size`` equispaced values."""

    lo: float
    hi: float
    grid_size: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidParameterError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.grid_size < 2:
            raise InvalidParameterError("grid_size must be >= 2")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.grid_size)


@dataclass(frozen=True)
class FiniteDim:
    """An explicit finite value set (integer or categorical codes)."""

    values: tuple[float, ...]

    def __init__(self, values):
        values = tuple(float(v) for v in values)
        if not values:
            raise InvalidParameterError("finite dimension needs at least one value")
        object.__setattr__(self, "values", values)

    def grid(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class DomainSpec:
    """Per-dimension grid descriptors for the acquisition maximiser."""

    dims: tuple

    def __init__(self, dims):
        object.__setattr__(self, "dims", tuple(dims))

    @classmethod
    def unit_box(cls, d: int, grid_size: int = DEFAULT_GRID_SIZE) -> "DomainSpec":
        return cls([ContinuousDim(0.0, 1.0, grid_size) for _ in range(d)])

    @property
    def d(self) -> int:
        return len(self.dims)

    def grids(self) -> list[np.ndarray]:
        return [dim.grid() for dim in self.dims]


def _check_memory(g, grids, memory_cap_mb: float) -> None:
    cells = 0
    for c in g.components:
        if len(c) == 2:
            cells += grids[c.dims[0] - 1].size * grids[c.dims[1] - 1].size
        else:
            cells += grids[c.dims[0] - 1].size
    mb = cells * 8 / 2**20
    if mb > memory_cap_mb:
        raise ResourceError(
            f"acquisition tables need {mb:.0f} MiB > cap {memory_cap_mb:.0f} MiB; "
            "lower the grid size"
        )


def _edge_table(model, c, grids, spec, t) -> np.ndarray:
    gi = grids[c.dims[0] - 1]
    gj = grids[c.dims[1] - 1]
    II, JJ = np.meshgrid(gi, gj, indexing="ij")
    pts = np.column_stack([II.ravel(), JJ.ravel()])
    return np.asarray(component_term(model, c, pts, spec, t)).reshape(gi.size, gj.size)


def _singleton_table(model, c, grids, spec, t) -> np.ndarray:
    gi = grids[c.dims[0] - 1]
    return np.asarray(component_term(model, c, gi.reshape(-1, 1), spec, t))


def _solve_tree(nodes, edges, tables, grids):
    """Max-sum DP on one tree; first-index tie-breaks at every argmax.

    ``tables[(i, j)]`` holds the edge table indexed ``(grid_i, grid_j)``
    for ``i < j``.  Returns the tree's maximum and the chosen grid index
    per node.
    """
    root = nodes[0]
    adjacency = {n: [] for n in nodes}
    for a, b in edges:
        adjacency[a].append(b)
        adjacency[b].append(a)
    # Iterative DFS order from the root; children processed before parents.
    parent = {root: None}
    order = []
    stack = [root]
    while stack:
        node = stack.pop()
        order.append(node)
        for nb in sorted(adjacency[node]):
            if nb not in parent:
                parent[nb] = node
                stack.append(nb)
    messages: dict[int, np.ndarray] = {}
    argmax_up: dict[int, np.ndarray] = {}
    for node in reversed(order):
        if parent[node] is None:
            continue
        p = parent[node]
        score = _oriented_table(tables, node, p)  # (grid_node, grid_p)
        for child in adjacency[node]:
            if child != p:
                score = score + messages[child][:, None]
        argmax_up[node] = np.argmax(score, axis=0)
        messages[node] = score[argmax_up[node], np.arange(score.shape[1])]
    root_score = np.zeros(grids[root - 1].size)
    for child in adjacency[root]:
        root_score = root_score + messages[child]
    choice = {root: int(np.argmax(root_score))}
    value = float(root_score[choice[root]])
    for node in order:
        if parent[node] is not None:
            choice[node] = int(argmax_up[node][choice[parent[node]]])
    return value, choice


def _oriented_table(tables, node, p):
    if (node, p) in tables:
        return tables[(node, p)]
    return tables[(p, node)].T


def maximize_additive(
    model: GpModel,
    spec: AcquisitionSpec,
    t: int,
    domain: DomainSpec,
    memory_cap_mb: float = DEFAULT_MEMORY_CAP_MB,
    refine: bool = False,
):
    """Exact grid argmax of the additive acquisition.

    Returns ``(x_star, value)`` where ``x_star`` attains the maximum of
    the total acquisition over the product grid.  With ``refine=True`` a
    single golden-section pass per continuous dimension polishes the
    winning cell (the returned value is then the refined one and may
    exceed the grid maximum).
    """
    if domain.d != model.g.d:
        raise InvalidParameterError(
            f"domain covers {domain.d} dims but decomposition has {model.g.d}"
        )
    grids = domain.grids()
    _check_memory(model.g, grids, memory_cap_mb)
    groups, singleton_dims = connected_groups(model.g)
    indices = np.zeros(domain.d, dtype=int)
    value = 0.0
    for i in singleton_dims:
        table = _singleton_table(model, Component((i,)), grids, spec, t)
        indices[i - 1] = int(np.argmax(table))
        value += float(table[indices[i - 1]])
    for nodes, edges in groups:
        tables = {
            e: _edge_table(model, Component(e), grids, spec, t) for e in edges
        }
        tree_value, choice = _solve_tree(nodes, edges, tables, grids)
        value += tree_value
        for node, k in choice.items():
            indices[node - 1] = k
    x_star = np.array([grids[i][indices[i]] for i in range(domain.d)])
    if refine:
        x_star, value = _refine(model, spec, t, domain, grids, indices, x_star)
    return x_star, value


def _refine(model, spec, t, domain, grids, indices, x_star):
    """One golden-section pass per continuous dimension around the winning cell."""
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    x = x_star.copy()
    for i, dim in enumerate(domain.dims):
        if not isinstance(dim, ContinuousDim):
            continue
        k = indices[i]
        lo = grids[i][max(k - 1, 0)]
        hi = grids[i][min(k + 1, grids[i].size - 1)]
        if hi <= lo:
            continue

        def line_value(v):
            trial = x.copy()
            trial[i] = v
            return total_acquisition(model, trial, spec, t)

        a, b = lo, hi
        c1, c2 = b - phi * (b - a), a + phi * (b - a)
        f1, f2 = line_value(c1), line_value(c2)
        for _ in range(20):
            if f1 >= f2:
                b, c2, f2 = c2, c1, f1
                c1 = b - phi * (b - a)
                f1 = line_value(c1)
            else:
                a, c1, f1 = c1, c2, f2
                c2 = a + phi * (b - a)
                f2 = line_value(c2)
        best = c1 if f1 >= f2 else c2
        if line_value(best) >= line_value(x[i]):
            x[i] = best
    return x, total_acquisition(model, x, spec, t)


def brute_force_max(
    model: GpModel,
    spec: AcquisitionSpec,
    t: int,
    domain: DomainSpec,
    max_cells: int = 10**6,
):
    """Exhaustive grid maximum; ties resolved to the lowest lexicographic index."""
    grids = domain.grids()
    total = 1
    for grid in grids:
        total *= grid.size
    if total > max_cells:
        raise ResourceError(f"{total} grid cells exceed the {max_cells} cap")
    mesh = np.meshgrid(*grids, indexing="ij")
    points = np.column_stack([m.ravel() for m in mesh])
    values = np.zeros(points.shape[0])
    for c in model.g.components:
        idx = [i - 1 for i in c.dims]
        values += np.asarray(component_term(model, c, points[:, idx], spec, t))
    best = int(np.argmax(values))
    return points[best], float(values[best])
