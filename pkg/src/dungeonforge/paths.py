"""Spatial queries on layout grids: BFS distances, diameter, line of sight.

A GridIndex bundles the precomputed tables (all-pairs BFS distances,
pairwise line of sight, neighbor lists) that the furnishers, engine and
personas all share.  Indices are flat cell ids (y*10 + x); the public
functions accept (x, y) coordinates.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .model import HEIGHT, N_CELLS, WIDTH, LayoutGrid, cell_index

# Wall-independent tables, shared by every grid.
_XS = np.arange(N_CELLS) % WIDTH
_YS = np.arange(N_CELLS) // WIDTH
EUCLID = np.sqrt(
    (_XS[:, None] - _XS[None, :]) ** 2.0 + (_YS[:, None] - _YS[None, :]) ** 2.0
)
CHEBYSHEV = np.maximum(
    np.abs(_XS[:, None] - _XS[None, :]), np.abs(_YS[:, None] - _YS[None, :])
).astype(np.int16)

UNREACHABLE = math.inf


@dataclass(frozen=True)
class LongestPathResult:
    """Graph diameter of the floor adjacency graph: endpoints + length."""

    a: tuple[int, int]
    b: tuple[int, int]
    length: int


class GridIndex:
    """Precomputed spatial tables for one LayoutGrid."""

    def __init__(self, grid: LayoutGrid):
        self.grid = grid
        self.floor_mask = np.frombuffer(grid.cells, dtype=np.uint8).copy()
        self.neighbors = _neighbor_table(self.floor_mask)
        self.dist = _kernel._bfs_all(self.floor_mask, self.neighbors)
        self.los = _kernel._los_all(self.floor_mask)
        self.wall8 = _wall8_counts(self.floor_mask)
        self._diameter: LongestPathResult | None = None

    @property
    def diameter(self) -> LongestPathResult:
        if self._diameter is None:
            self._diameter = _diameter_from_dist(self.dist)
        return self._diameter


def _neighbor_table(floor_mask: np.ndarray) -> np.ndarray:
    """Per-cell floor neighbors in N,S,E,W order; -1 for wall/out of bounds."""
    nb = np.full((N_CELLS, 4), -1, np.int16)
    for i in range(N_CELLS):
        if not floor_mask[i]:
            continue
        x, y = i % WIDTH, i // WIDTH
        for k, (nx, ny) in enumerate(((x, y - 1), (x, y + 1), (x + 1, y), (x - 1, y))):
            if 0 <= nx < WIDTH and 0 <= ny < HEIGHT:
                j = ny * WIDTH + nx
                if floor_mask[j]:
                    nb[i, k] = j
    return nb


def _wall8_counts(floor_mask: np.ndarray) -> np.ndarray:
    """Number of wall cells among the 8 neighbors (off-grid counts as wall)."""
    grid = floor_mask.reshape(HEIGHT, WIDTH)
    padded = np.zeros((HEIGHT + 2, WIDTH + 2), np.uint8)
    padded[1:-1, 1:-1] = grid
    counts = np.zeros((HEIGHT, WIDTH), np.int16)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            counts += 1 - padded[1 + dy : HEIGHT + 1 + dy, 1 + dx : WIDTH + 1 + dx]
    return counts.reshape(-1)


def _diameter_from_dist(dist: np.ndarray) -> LongestPathResult:
    longest = int(dist.max())
    if longest < 0:
        raise ValueError("diameter undefined: grid has no floor cells")
    a, b = np.argwhere(dist == longest)[0]
    return LongestPathResult(
        (int(a) % WIDTH, int(a) // WIDTH), (int(b) % WIDTH, int(b) // WIDTH), longest
    )


@functools.lru_cache(maxsize=512)
def get_index(grid: LayoutGrid) -> GridIndex:
    """Shared per-grid index; grids are immutable so caching is safe."""
    return GridIndex(grid)


def shortest_path_distance(grid: LayoutGrid, a: tuple[int, int], b: tuple[int, int]):
    """4-connected BFS distance in tiles; math.inf when disconnected."""
    for p in (a, b):
        if not grid.is_floor(*p):
            raise ValueError(f"{p} is not a floor cell")
    d = get_index(grid).dist[cell_index(*a), cell_index(*b)]
    return UNREACHABLE if d < 0 else int(d)


def diameter(grid: LayoutGrid) -> LongestPathResult:
    """Longest shortest path over all floor pairs; scan-order tie-break."""
    return get_index(grid).diameter


def line_of_sight(grid: LayoutGrid, a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True iff the discrete sight line a->b crosses no wall.

    Uses a symmetric supercover walk (corner hits test both adjacent
    cells); endpoints themselves are excluded from the wall test.
    """
    floor_mask = np.frombuffer(grid.cells, dtype=np.uint8)
    return bool(_kernel._los_pair(floor_mask, a[0], a[1], b[0], b[1]))


def euclidean(a: tuple[int, int], b: tuple[int, int]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def chebyshev(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def canonical_path(grid: LayoutGrid, a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """The deterministic shortest path a->b (BFS, neighbor order N,S,E,W).

    Returns the full cell sequence including both endpoints; empty list if
    b is unreachable from a.
    """
    index = get_index(grid)
    ai, bi = cell_index(*a), cell_index(*b)
    if index.dist[ai, bi] < 0:
        return []
    # walk from a, always stepping to the first neighbor closer to b
    path = [ai]
    cur = ai
    while cur != bi:
        d = index.dist[cur, bi]
        for k in range(4):
            v = index.neighbors[cur, k]
            if v >= 0 and index.dist[v, bi] == d - 1:
                cur = int(v)
                break
        path.append(cur)
    return [(i % WIDTH, i // WIDTH) for i in path]
