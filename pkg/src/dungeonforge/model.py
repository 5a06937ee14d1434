"""Canonical level representation, text serialization, and validation.

A level is a 10x20 tile grid (walls and floors) plus a list of entity
placements.  The text form is 20 lines of 10 glyphs each, LF-terminated:

    '#' Wall      '.' Floor     'H' Entrance  'X' Exit      'T' Treasure
    'P' Potion    'O' Portal    '^' Trap      'g' Goblin    'm' GoblinMage
    'b' Blob      'o' Ogre      'M' Minitaur

Coordinates are (x, y) with x in [0, 10), y in [0, 20), origin top-left;
serialization is row-major.  The border ring is always Wall, and all floor
cells form a single 4-connected region.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

WIDTH = 10
HEIGHT = 20
N_CELLS = WIDTH * HEIGHT


class Tile(IntEnum):
    WALL = 0
    FLOOR = 1


class EntityKind(Enum):
    ENTRANCE = "entrance"
    EXIT = "exit"
    TREASURE = "treasure"
    POTION = "potion"
    PORTAL = "portal"
    TRAP = "trap"
    GOBLIN = "goblin"
    GOBLIN_MAGE = "goblin_mage"
    BLOB = "blob"
    OGRE = "ogre"
    MINITAUR = "minitaur"


# Canonical placement/iteration order for entity kinds.
KIND_ORDER = (
    EntityKind.ENTRANCE,
    EntityKind.EXIT,
    EntityKind.TREASURE,
    EntityKind.POTION,
    EntityKind.PORTAL,
    EntityKind.TRAP,
    EntityKind.GOBLIN,
    EntityKind.GOBLIN_MAGE,
    EntityKind.BLOB,
    EntityKind.OGRE,
    EntityKind.MINITAUR,
)

MONSTER_KINDS = frozenset(
    {
        EntityKind.GOBLIN,
        EntityKind.GOBLIN_MAGE,
        EntityKind.BLOB,
        EntityKind.OGRE,
        EntityKind.MINITAUR,
    }
)

GLYPH_BY_KIND = {
    EntityKind.ENTRANCE: "H",
    EntityKind.EXIT: "X",
    EntityKind.TREASURE: "T",
    EntityKind.POTION: "P",
    EntityKind.PORTAL: "O",
    EntityKind.TRAP: "^",
    EntityKind.GOBLIN: "g",
    EntityKind.GOBLIN_MAGE: "m",
    EntityKind.BLOB: "b",
    EntityKind.OGRE: "o",
    EntityKind.MINITAUR: "M",
}
KIND_BY_GLYPH = {g: k for k, g in GLYPH_BY_KIND.items()}

WALL_GLYPH = "#"
FLOOR_GLYPH = "."


def cell_index(x: int, y: int) -> int:
    return y * WIDTH + x


class LayoutGrid:
    """Immutable 10x20 wall/floor grid.

    Cells are stored row-major as bytes of Tile values; the object is
    hashable and cheap to compare, so grids can key caches.
    """

    __slots__ = ("cells",)

    def __init__(self, cells: bytes):
        if len(cells) != N_CELLS:
            raise ValueError(f"expected {N_CELLS} cells, got {len(cells)}")
        object.__setattr__(self, "cells", bytes(cells))

    def __setattr__(self, name, value):
        raise AttributeError("LayoutGrid is immutable")

    def __eq__(self, other):
        return isinstance(other, LayoutGrid) and self.cells == other.cells

    def __hash__(self):
        return hash(self.cells)

    def tile_at(self, x: int, y: int) -> Tile:
        return Tile(self.cells[cell_index(x, y)])

    def is_floor(self, x: int, y: int) -> bool:
        return self.cells[cell_index(x, y)] == Tile.FLOOR

    def floor_count(self) -> int:
        return sum(self.cells)

    def floor_cells(self) -> list[tuple[int, int]]:
        """All floor coordinates in scan order (y, then x)."""
        return [
            (i % WIDTH, i // WIDTH)
            for i, c in enumerate(self.cells)
            if c == Tile.FLOOR
        ]

    def to_text(self) -> str:
        lines = []
        for y in range(HEIGHT):
            row = self.cells[y * WIDTH : (y + 1) * WIDTH]
            lines.append("".join(FLOOR_GLYPH if c else WALL_GLYPH for c in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LayoutGrid":
        grid, _ = _parse_cells(text)
        return grid

    @classmethod
    def all_wall(cls) -> "LayoutGrid":
        return cls(bytes(N_CELLS))

    def __repr__(self):
        return f"LayoutGrid(floor={self.floor_count()})"


@dataclass(frozen=True)
class Placement:
    kind: EntityKind
    position: tuple[int, int]


@dataclass(frozen=True)
class Provenance:
    creator: str
    furnisher: str
    seed: int


@dataclass
class Level:
    """A furnished level: layout grid plus entity placements.

    Structural equality ignores provenance (it is metadata carried by the
    sidecar, not recoverable from level text).
    """

    grid: LayoutGrid
    placements: list[Placement] = field(default_factory=list)
    provenance: Provenance | None = None

    def __eq__(self, other):
        if not isinstance(other, Level):
            return NotImplemented
        return self.grid == other.grid and sorted(
            self.placements, key=_placement_sort_key
        ) == sorted(other.placements, key=_placement_sort_key)

    def placements_by_kind(self, kind: EntityKind) -> list[Placement]:
        return [p for p in self.placements if p.kind is kind]

    def entrance(self) -> tuple[int, int]:
        return self.placements_by_kind(EntityKind.ENTRANCE)[0].position

    def exit(self) -> tuple[int, int]:
        return self.placements_by_kind(EntityKind.EXIT)[0].position


def _placement_sort_key(p: Placement):
    return (p.position[1], p.position[0], p.kind.value)


class LevelParseError(ValueError):
    """Malformed level text; message carries line/column detail."""


def _parse_cells(text: str) -> tuple[LayoutGrid, list[Placement]]:
    lines = text.splitlines()
    if len(lines) != HEIGHT:
        raise LevelParseError(f"expected {HEIGHT} lines, got {len(lines)}")
    cells = bytearray(N_CELLS)
    placements: list[Placement] = []
    for y, line in enumerate(lines):
        if len(line) != WIDTH:
            raise LevelParseError(
                f"line {y + 1}: expected {WIDTH} characters, got {len(line)}"
            )
        for x, ch in enumerate(line):
            if ch == WALL_GLYPH:
                continue
            if ch == FLOOR_GLYPH:
                cells[cell_index(x, y)] = Tile.FLOOR
            elif ch in KIND_BY_GLYPH:
                cells[cell_index(x, y)] = Tile.FLOOR
                placements.append(Placement(KIND_BY_GLYPH[ch], (x, y)))
            else:
                raise LevelParseError(f"line {y + 1}, column {x + 1}: unknown glyph {ch!r}")
    return LayoutGrid(bytes(cells)), placements


def parse_level(text: str) -> Level:
    """Parse canonical 20x10 level text into a Level (no validation)."""
    grid, placements = _parse_cells(text)
    return Level(grid=grid, placements=placements)


def serialize_level(level: Level) -> str:
    """Render a level as canonical text; inverse of parse_level."""
    rows = [list(FLOOR_GLYPH if c else WALL_GLYPH for c in level.grid.cells[y * WIDTH : (y + 1) * WIDTH]) for y in range(HEIGHT)]
    for p in level.placements:
        x, y = p.position
        rows[y][x] = GLYPH_BY_KIND[p.kind]
    return "\n".join("".join(r) for r in rows) + "\n"


def _floor_regions(grid: LayoutGrid) -> list[set[int]]:
    """4-connected components of floor cells, as sets of cell indices."""
    seen = set()
    regions = []
    for start, c in enumerate(grid.cells):
        if c != Tile.FLOOR or start in seen:
            continue
        comp = {start}
        stack = [start]
        seen.add(start)
        while stack:
            i = stack.pop()
            x, y = i % WIDTH, i // WIDTH
            for nx, ny in ((x, y - 1), (x, y + 1), (x + 1, y), (x - 1, y)):
                if 0 <= nx < WIDTH and 0 <= ny < HEIGHT:
                    j = cell_index(nx, ny)
                    if j not in seen and grid.cells[j] == Tile.FLOOR:
                        seen.add(j)
                        comp.add(j)
                        stack.append(j)
        regions.append(comp)
    return regions


def validate_layout(grid: LayoutGrid) -> list[str]:
    """Check LayoutGrid invariants; returns one violation string per breach."""
    violations = []
    for x in range(WIDTH):
        for y in (0, HEIGHT - 1):
            if grid.is_floor(x, y):
                violations.append(f"BorderFloor@({x},{y})")
    for y in range(1, HEIGHT - 1):
        for x in (0, WIDTH - 1):
            if grid.is_floor(x, y):
                violations.append(f"BorderFloor@({x},{y})")
    if len(_floor_regions(grid)) > 1:
        violations.append("SplitFloorRegion")
    return violations


def validate_level(level: Level) -> list[str]:
    """Check every Level invariant; empty list means the level is valid.

    Violations are data, not exceptions: each is a short code, with a
    position suffix where one applies.
    """
    violations = validate_layout(level.grid)

    seen_positions: dict[tuple[int, int], EntityKind] = {}
    for p in level.placements:
        x, y = p.position
        if not (0 <= x < WIDTH and 0 <= y < HEIGHT):
            violations.append(f"OutOfBounds@({x},{y})")
            continue
        if not level.grid.is_floor(x, y):
            violations.append(f"EntityOnWall@({x},{y})")
        if p.position in seen_positions:
            violations.append(f"OverlapPlacement@({x},{y})")
        seen_positions[p.position] = p.kind

    n_entrance = len(level.placements_by_kind(EntityKind.ENTRANCE))
    n_exit = len(level.placements_by_kind(EntityKind.EXIT))
    n_portal = len(level.placements_by_kind(EntityKind.PORTAL))
    if n_entrance == 0:
        violations.append("MissingEntrance")
    elif n_entrance > 1:
        violations.append("MultipleEntrance")
    if n_exit == 0:
        violations.append("MissingExit")
    elif n_exit > 1:
        violations.append("MultipleExit")
    if n_portal not in (0, 2):
        violations.append("PortalParity")

    if n_entrance == 1 and n_exit == 1:
        regions = _floor_regions(level.grid)
        ent = cell_index(*level.entrance())
        ext = cell_index(*level.exit())
        if not any(ent in r and ext in r for r in regions):
            violations.append("ExitUnreachable")
    return violations
