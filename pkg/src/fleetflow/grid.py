"""Hexagonal cell grids in axial coordinates and their self-looped adjacency.

Cells are addressed by axial coordinates ``(q, r)``; the implicit third cube
coordinate is ``-q - r``.  Every cell gets a stable integer index in
``[0, n)`` and the adjacency matrix ``L`` carries ones on the diagonal so
that "stay in place" is a legal move.
"""

from __future__ import annotations

import csv
import json
from collections import deque
from pathlib import Path
from typing import Iterable

import numpy as np

Coord = tuple[int, int]

AXIAL_DIRECTIONS: tuple[Coord, ...] = (
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
)


def hex_distance(a: Coord, b: Coord) -> int:
    dq = a[0] - b[0]
    dr = a[1] - b[1]
    return (abs(dq) + abs(dr) + abs(dq + dr)) // 2


def hex_patch(radius: int) -> list[Coord]:
    """All axial coordinates within ``radius`` of the origin, row-major."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    coords = [
        (q, r)
        for r in range(-radius, radius + 1)
        for q in range(-radius, radius + 1)
        if hex_distance((q, r), (0, 0)) <= radius
    ]
    return coords


class HexGrid:
    """An immutable set of hexagonal cells with fixed indexing.

    ``coords[i]`` is the axial coordinate of cell ``i``.  ``blocked`` records
    the patch coordinates that were removed as unreachable; they carry no
    index and take part in no adjacency.
    """

    __slots__ = ("_coords", "_index", "_blocked", "_radius", "_adj", "_nbrs")

    def __init__(
        self,
        coords: Iterable[Coord],
        blocked: Iterable[Coord] = (),
        radius: int | None = None,
    ):
        coords = tuple((int(q), int(r)) for q, r in coords)
        index = {}
        for i, c in enumerate(coords):
            if c in index:
                raise ValueError(f"duplicate axial coordinate {c}")
            index[c] = i
        self._coords = coords
        self._index = index
        self._blocked = frozenset((int(q), int(r)) for q, r in blocked)
        if self._blocked & set(index):
            raise ValueError("a coordinate cannot be both a cell and blocked")
        self._radius = radius
        self._adj = None
        self._nbrs = None

    @property
    def n(self) -> int:
        return len(self._coords)

    def __len__(self) -> int:
        return len(self._coords)

    @property
    def coords(self) -> tuple[Coord, ...]:
        return self._coords

    @property
    def blocked(self) -> frozenset[Coord]:
        return self._blocked

    @property
    def radius(self) -> int | None:
        return self._radius

    def index_of(self, coord: Coord) -> int:
        try:
            return self._index[(int(coord[0]), int(coord[1]))]
        except KeyError:
            raise KeyError(f"no cell at axial coordinate {tuple(coord)}") from None

    def coord_of(self, i: int) -> Coord:
        self._check(i)
        return self._coords[i]

    def __contains__(self, coord) -> bool:
        return tuple(coord) in self._index

    def _check(self, i: int) -> None:
        if not 0 <= i < len(self._coords):
            raise IndexError(f"cell {i} not in grid of {len(self._coords)} cells")

    def distance(self, i: int, j: int) -> int:
        """Axial hex distance between cells ``i`` and ``j``."""
        return hex_distance(self.coord_of(i), self.coord_of(j))

    def distance_matrix(self) -> np.ndarray:
        q = np.array([c[0] for c in self._coords], dtype=np.int64)
        r = np.array([c[1] for c in self._coords], dtype=np.int64)
        dq = q[:, None] - q[None, :]
        dr = r[:, None] - r[None, :]
        return (np.abs(dq) + np.abs(dr) + np.abs(dq + dr)) // 2

    def neighbor_lists(self) -> tuple[tuple[int, ...], ...]:
        """``neighbor_lists()[i]``: sorted indices ``j`` with ``L[i][j] = 1``."""
        if self._nbrs is None:
            out = []
            for i, (q, r) in enumerate(self._coords):
                nb = {i}
                for dq, dr in AXIAL_DIRECTIONS:
                    j = self._index.get((q + dq, r + dr))
                    if j is not None:
                        nb.add(j)
                out.append(tuple(sorted(nb)))
            self._nbrs = tuple(out)
        return self._nbrs

    def to_dict(self) -> dict:
        if self._radius is not None and set(self._coords) | self._blocked == set(
            hex_patch(self._radius)
        ):
            return {"radius": self._radius, "blocked": sorted([list(c) for c in self._blocked])}
        return {"cells": [list(c) for c in self._coords]}

    @classmethod
    def from_dict(cls, data: dict) -> "HexGrid":
        if "radius" in data:
            return build_hex_grid(data["radius"], [tuple(c) for c in data.get("blocked", [])])
        return cls([tuple(c) for c in data["cells"]], data.get("blocked", ()))

    def __repr__(self) -> str:
        return f"HexGrid(n={self.n}, radius={self._radius}, blocked={len(self._blocked)})"


def build_hex_grid(radius: int, blocked: Iterable[Coord] = ()) -> HexGrid:
    """Hexagon-shaped patch of ``3*radius*(radius+1) + 1`` cells, minus ``blocked``.

    Cells are indexed row-major over ``(r, q)`` so the indexing is
    reproducible.  Raises ``ValueError`` for a blocked coordinate outside the
    patch.
    """
    patch = hex_patch(radius)
    blocked = {(int(q), int(r)) for q, r in blocked}
    outside = blocked - set(patch)
    if outside:
        raise ValueError(f"blocked coordinates outside radius-{radius} patch: {sorted(outside)}")
    cells = [c for c in patch if c not in blocked]
    return HexGrid(cells, blocked, radius=radius)


def adjacency(grid: HexGrid) -> np.ndarray:
    """Symmetric 0/1 matrix with ``L[i][j] = 1`` iff cells touch or ``i == j``."""
    if grid._adj is None:
        L = np.zeros((grid.n, grid.n), dtype=np.int8)
        for i, nb in enumerate(grid.neighbor_lists()):
            L[i, list(nb)] = 1
        L.setflags(write=False)
        grid._adj = L
    return grid._adj


def neighbors(grid: HexGrid, i: int) -> list[int]:
    """Cells reachable from ``i`` in one step, ``i`` included."""
    grid._check(i)
    return list(grid.neighbor_lists()[i])


def bfs_distances(grid: HexGrid, source: int) -> list[int]:
    """Hop counts from ``source`` over ``L``; ``-1`` marks unreachable cells."""
    nbrs = grid.neighbor_lists()
    dist = [-1] * grid.n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def graph_diameter(grid: HexGrid) -> int:
    """Longest shortest-path hop count between two cells.

    Raises ``ValueError`` naming a disconnected pair if the grid is not
    connected.
    """
    best = 0
    for s in range(grid.n):
        dist = bfs_distances(grid, s)
        for t, d in enumerate(dist):
            if d < 0:
                raise ValueError(
                    f"grid is disconnected: no path between cell {s} {grid.coord_of(s)} "
                    f"and cell {t} {grid.coord_of(t)}"
                )
        best = max(best, max(dist, default=0))
    return best


def load_grid(path: str | Path) -> HexGrid:
    """Read a grid definition file ``{"radius": R, "blocked": [[q, r], ...]}``."""
    with open(path) as fh:
        return HexGrid.from_dict(json.load(fh))


def save_grid(grid: HexGrid, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(grid.to_dict(), fh, indent=2)
        fh.write("\n")


def write_cells_csv(grid: HexGrid, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "q", "r"])
        for i, (q, r) in enumerate(grid.coords):
            w.writerow([i, q, r])

