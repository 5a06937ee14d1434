"""Step 1 of the pipeline: carve a 10x20 wall/floor layout.

Three interchangeable creators:

* ``create_constraint_layout`` — spawn 8-16 rooms and push overlapping
  pairs apart one tile at a time until they separate (or 100 iterations
  pass), then rasterize whatever landed in bounds.
* ``create_cellular_layout`` — noise seed + smoothing passes of a
  majority-wall cellular automaton, re-seeding walls while the map is
  more than 75% floor.
* ``create_agent_layout`` — a digger walks from a random start carving
  floor, turning with a probability that grows 5% per step, until a
  target count of 75-95 floor tiles is carved.

Every creator ends by pruning isolated floor islands, so the output
always has one connected floor region inside a wall border.  Degenerate
outcomes (tiny regions) are legal output here; the batch pipeline is the
layer that decides whether a grid is big enough to furnish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import HEIGHT, N_CELLS, WIDTH, LayoutGrid, Tile, cell_index
from .rng import RandomStream


@dataclass
class Room:
    """Axis-aligned room; (x, y) is the top-left corner in grid coords."""

    x: int
    y: int
    w: int
    h: int

    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def overlaps(self, other: "Room") -> bool:
        return (
            self.x < other.x + other.w
            and other.x < self.x + self.w
            and self.y < other.y + other.h
            and other.y < self.y + self.h
        )

    def in_bounds(self) -> bool:
        """Fully inside the 8x18 interior (border ring stays wall)."""
        return (
            self.x >= 1
            and self.y >= 1
            and self.x + self.w <= WIDTH - 1
            and self.y + self.h <= HEIGHT - 1
        )


@dataclass
class CreatorParams:
    room_count_range: tuple[int, int] = (8, 16)
    room_w_range: tuple[int, int] = (4, 6)
    room_h_range: tuple[int, int] = (4, 8)
    max_separation_iters: int = 100
    ca_wall_prob: float = 0.45
    ca_floor_cap: float = 0.75
    ca_reseed_wall_prob: float = 0.2
    ca_max_initial_steps: int = 10
    digger_floor_target_range: tuple[int, int] = (75, 95)
    digger_turn_prob_step: float = 0.05


DEFAULT_PARAMS = CreatorParams()


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------

def prune_islands(grid: LayoutGrid) -> LayoutGrid:
    """Keep only the largest 4-connected floor region; ties by scan order."""
    cells = bytearray(grid.cells)
    best: set[int] = set()
    seen: set[int] = set()
    for start in range(N_CELLS):
        if cells[start] != Tile.FLOOR or start in seen:
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
                    if j not in seen and cells[j] == Tile.FLOOR:
                        seen.add(j)
                        comp.add(j)
                        stack.append(j)
        if len(comp) > len(best):
            best = comp
    for i in range(N_CELLS):
        cells[i] = Tile.FLOOR if i in best else Tile.WALL
    return LayoutGrid(bytes(cells))


def _interior(x: int, y: int) -> bool:
    return 1 <= x < WIDTH - 1 and 1 <= y < HEIGHT - 1


# --------------------------------------------------------------------------
# constraint creator: rooms + separation
# --------------------------------------------------------------------------

def _spawn_rooms(rng: RandomStream, params: CreatorParams) -> list[Room]:
    count = rng.randint(*params.room_count_range)
    rooms = []
    for _ in range(count):
        w = rng.randint(*params.room_w_range)
        h = rng.randint(*params.room_h_range)
        x = rng.randint(1, WIDTH - 1 - w)
        y = rng.randint(1, HEIGHT - 1 - h)
        rooms.append(Room(x, y, w, h))
    return rooms


def separate_rooms_step(rooms: list[Room], rng: RandomStream) -> list[Room]:
    """One separation iteration: each colliding room takes a 1-tile step.

    The step goes along the dominant axis of the summed center offsets
    from the rooms it collides with (horizontal first on ties with a
    coin flip when the offset is exactly zero).  Rooms may leave the
    interior; out-of-bounds area is simply never rasterized.
    """
    moved = []
    for i, room in enumerate(rooms):
        ox = 0.0
        oy = 0.0
        colliding = False
        cx, cy = room.center()
        for j, other in enumerate(rooms):
            if i != j and room.overlaps(other):
                colliding = True
                ocx, ocy = other.center()
                ox += cx - ocx
                oy += cy - ocy
        if not colliding:
            moved.append(room)
            continue
        if ox == 0.0 and oy == 0.0:
            # perfectly stacked: pick a random axis direction
            if rng.random() < 0.5:
                ox = 1.0 if rng.random() < 0.5 else -1.0
            else:
                oy = 1.0 if rng.random() < 0.5 else -1.0
        if abs(ox) >= abs(oy):
            dx = 1 if ox > 0 else -1
            moved.append(Room(room.x + dx, room.y, room.w, room.h))
        else:
            dy = 1 if oy > 0 else -1
            moved.append(Room(room.x, room.y + dy, room.w, room.h))
    return moved


def _separate_rooms(rooms: list[Room], rng: RandomStream, params: CreatorParams) -> tuple[list[Room], int]:
    """Iterate separation steps to convergence; returns (rooms, iterations)."""
    iters = 0
    while iters < params.max_separation_iters:
        settled = all(r.in_bounds() for r in rooms) and not any(
            a.overlaps(b) for i, a in enumerate(rooms) for b in rooms[i + 1 :]
        )
        if settled:
            break
        rooms = separate_rooms_step(rooms, rng)
        iters += 1
    return rooms, iters


def create_constraint_layout(rng: RandomStream, params: CreatorParams = DEFAULT_PARAMS) -> LayoutGrid:
    rooms = _spawn_rooms(rng, params)
    rooms, _ = _separate_rooms(rooms, rng, params)
    cells = bytearray(N_CELLS)
    for room in rooms:
        for y in range(room.y, room.y + room.h):
            for x in range(room.x, room.x + room.w):
                if _interior(x, y):
                    cells[cell_index(x, y)] = Tile.FLOOR
    return prune_islands(LayoutGrid(bytes(cells)))


# --------------------------------------------------------------------------
# cellular-automata creator
# --------------------------------------------------------------------------

def ca_step(grid: LayoutGrid) -> LayoutGrid:
    """One smoothing pass: a cell becomes Wall iff >=5 of its 8 neighbors
    are Wall, and Floor otherwise.  Off-grid neighbors count as Wall and
    the border ring never changes."""
    old = grid.cells
    new = bytearray(N_CELLS)
    for y in range(1, HEIGHT - 1):
        for x in range(1, WIDTH - 1):
            walls = 0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if dx == 0 and dy == 0:
                        continue
                    if old[cell_index(x + dx, y + dy)] == Tile.WALL:
                        walls += 1
            new[cell_index(x, y)] = Tile.WALL if walls >= 5 else Tile.FLOOR
    return LayoutGrid(bytes(new))


def create_cellular_layout(rng: RandomStream, params: CreatorParams = DEFAULT_PARAMS) -> LayoutGrid:
    cells = bytearray(N_CELLS)
    for y in range(1, HEIGHT - 1):
        for x in range(1, WIDTH - 1):
            if rng.random() >= params.ca_wall_prob:
                cells[cell_index(x, y)] = Tile.FLOOR
    grid = LayoutGrid(bytes(cells))

    for _ in range(params.ca_max_initial_steps):
        smoothed = ca_step(grid)
        if smoothed == grid:
            break
        grid = smoothed

    floor_cap = int(params.ca_floor_cap * (WIDTH - 2) * (HEIGHT - 2))
    while grid.floor_count() > floor_cap:
        reseeded = bytearray(grid.cells)
        for i, c in enumerate(reseeded):
            if c == Tile.FLOOR and rng.random() < params.ca_reseed_wall_prob:
                reseeded[i] = Tile.WALL
        grid = ca_step(LayoutGrid(bytes(reseeded)))

    return prune_islands(grid)


# --------------------------------------------------------------------------
# agent (digger) creator
# --------------------------------------------------------------------------

_DIRS = ((0, -1), (0, 1), (1, 0), (-1, 0))  # N, S, E, W


def create_agent_layout(rng: RandomStream, params: CreatorParams = DEFAULT_PARAMS) -> LayoutGrid:
    """Digger walk: carve, step, and turn ever more eagerly.

    The turn probability starts at zero and grows by 5% with every step
    taken; when a turn fires the digger picks uniformly among the other
    three directions.  Steps that would leave the interior force a turn
    to a random in-bounds direction.  Digging stops once the number of
    carved floor tiles reaches a target drawn from 75-95.
    """
    target = rng.randint(*params.digger_floor_target_range)
    cells = bytearray(N_CELLS)
    x = rng.randint(1, WIDTH - 2)
    y = rng.randint(1, HEIGHT - 2)
    cells[cell_index(x, y)] = Tile.FLOOR
    carved = 1
    direction = rng.randint(0, 3)
    turn_prob = 0.0

    while carved < target:
        if rng.random() < turn_prob:
            choices = [d for d in range(4) if d != direction]
            direction = rng.choice(choices)
        dx, dy = _DIRS[direction]
        if not _interior(x + dx, y + dy):
            in_bounds = [
                d for d, (ddx, ddy) in enumerate(_DIRS) if _interior(x + ddx, y + ddy)
            ]
            direction = rng.choice(in_bounds)
            dx, dy = _DIRS[direction]
        x += dx
        y += dy
        turn_prob += params.digger_turn_prob_step
        i = cell_index(x, y)
        if cells[i] == Tile.WALL:
            cells[i] = Tile.FLOOR
            carved += 1

    return prune_islands(LayoutGrid(bytes(cells)))


CREATORS = {
    "cc": create_constraint_layout,
    "cac": create_cellular_layout,
    "ac": create_agent_layout,
}
