"""Step 2 of the pipeline: distribute game objects onto a finished layout.

Three interchangeable furnishers share one element budget:

* ``furnish_constraint`` — computes the layout diameter, anchors the
  entrance/exit near its endpoints, then places every element by scanning
  all candidate cells that satisfy its placement rule and picking one
  uniformly at random.
* ``furnish_cellular`` — sweeps the empty floor cells in a fresh random
  order each pass, placing the first element kind whose neighborhood
  predicate holds at the visited cell, until the budget is filled or 20
  passes elapse.
* ``furnish_agent`` — drops everything uniformly at random, then lets
  each object greedily hill-climb its own placement heuristic for 45
  turns of one-step-lookahead movement.

Whenever a rule admits no candidate the furnishers fall back to a uniform
empty floor cell and count one relaxation, so the budget is always placed
exactly; a grid with no floor at all is a hard error.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    WIDTH,
    EntityKind,
    LayoutGrid,
    Level,
    Placement,
)
from .paths import (  # noqa: F401  (re-exported spatial utilities)
    CHEBYSHEV,
    EUCLID,
    GridIndex,
    LongestPathResult,
    canonical_path,
    diameter,
    get_index,
    line_of_sight,
    shortest_path_distance,
)
from .rng import RandomStream


class FurnishError(ValueError):
    """Raised when a grid cannot hold the requested budget at all."""


@dataclass(frozen=True)
class Budget:
    """Element counts per level.

    Totals 21 without portals, 23 with; monsters stay under half the
    total, potions over half the monsters and under twice the treasures.
    """

    treasures: int = 3
    potions: int = 5
    portals: int = 2
    traps: int = 2
    goblins: int = 4
    goblin_mages: int = 1
    blobs: int = 2
    ogres: int = 1
    minitaurs: int = 1

    @classmethod
    def sample(cls, rng: RandomStream) -> "Budget":
        """Draw a budget; the portal pair is present with probability 0.5."""
        return cls(portals=2 if rng.random() < 0.5 else 0)

    def count(self, kind: EntityKind) -> int:
        return {
            EntityKind.ENTRANCE: 1,
            EntityKind.EXIT: 1,
            EntityKind.TREASURE: self.treasures,
            EntityKind.POTION: self.potions,
            EntityKind.PORTAL: self.portals,
            EntityKind.TRAP: self.traps,
            EntityKind.GOBLIN: self.goblins,
            EntityKind.GOBLIN_MAGE: self.goblin_mages,
            EntityKind.BLOB: self.blobs,
            EntityKind.OGRE: self.ogres,
            EntityKind.MINITAUR: self.minitaurs,
        }[kind]

    def total(self) -> int:
        return sum(self.count(k) for k in _PLACEMENT_ORDER_KINDS)


DEFAULT_BUDGET = Budget()

_PLACEMENT_ORDER_KINDS = (
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


@dataclass
class FurnishReport:
    level: Level
    relaxations: int
    passes: int


def _cell(pos: tuple[int, int]) -> int:
    return pos[1] * WIDTH + pos[0]


def _pos(cell: int) -> tuple[int, int]:
    return (cell % WIDTH, cell // WIDTH)


def _wall4(index: GridIndex, cell: int) -> int:
    return int((index.neighbors[cell] < 0).sum())


# --------------------------------------------------------------------------
# constraint furnisher
# --------------------------------------------------------------------------

def furnish_constraint(
    grid: LayoutGrid, rng: RandomStream, budget: Budget = DEFAULT_BUDGET
) -> FurnishReport:
    """Place elements in a fixed order, each uniformly over its rule's cells.

    Rules (path distance unless line of sight is stated, in which case the
    band is Euclidean along the sight line):

    * Entrance within 8 tiles of one diameter endpoint, Exit within 5 of
      the other (endpoint assignment is a coin flip).
    * Portals: one 5-10 from the entrance, the other 5-10 from the exit,
      at least 10 apart; drawn uniformly over all valid pairs.
    * Treasures against walls (>=2 of 8 neighbors; cells with >=3 win).
    * Potions anywhere empty; traps within 1 tile (Chebyshev) of the
      entrance->exit shortest path.
    * Goblins with a wall at their side (4-neighborhood); the mage
      adjacent to a goblin; ogres 4-8 from a treasure in LOS; blobs 4-8
      from a potion in LOS; the minitaur 4-8 path-tiles from the entrance.

    An empty candidate set relaxes that element to any empty floor cell
    and counts one relaxation.
    """
    index = get_index(grid)
    floor = [_cell(p) for p in grid.floor_cells()]
    if not floor:
        raise FurnishError("grid has no floor cells")

    occupied: dict[int, EntityKind] = {}
    relaxations = 0

    def empty() -> list[int]:
        return [c for c in floor if c not in occupied]

    def place(kind: EntityKind, candidates: list[int]) -> int:
        nonlocal relaxations
        pool = [c for c in candidates if c not in occupied]
        if not pool:
            pool = empty()
            relaxations += 1
        cell = rng.choice(pool)
        occupied[cell] = kind
        return cell

    dia = index.diameter
    end_a, end_b = _cell(dia.a), _cell(dia.b)
    if rng.random() < 0.5:
        ent_anchor, exit_anchor = end_a, end_b
    else:
        ent_anchor, exit_anchor = end_b, end_a

    dist = index.dist
    entrance = place(EntityKind.ENTRANCE, [c for c in floor if 0 <= dist[c, ent_anchor] <= 8])
    exit_ = place(EntityKind.EXIT, [c for c in floor if 0 <= dist[c, exit_anchor] <= 5])

    if budget.portals:
        near_ent = [c for c in empty() if 5 <= dist[c, entrance] <= 10]
        near_exit = [c for c in empty() if 5 <= dist[c, exit_] <= 10]
        pairs = [
            (p, q)
            for p in near_ent
            for q in near_exit
            if p != q and dist[p, q] >= 10
        ]
        if pairs:
            p, q = rng.choice(pairs)
            occupied[p] = EntityKind.PORTAL
            occupied[q] = EntityKind.PORTAL
        else:
            relaxations += 1
            pool = empty()
            p = rng.choice(pool)
            occupied[p] = EntityKind.PORTAL
            pool = empty()
            q = rng.choice(pool)
            occupied[q] = EntityKind.PORTAL

    for _ in range(budget.treasures):
        cands = [c for c in empty() if index.wall8[c] >= 2]
        preferred = [c for c in cands if index.wall8[c] >= 3]
        place(EntityKind.TREASURE, preferred if preferred else cands)

    for _ in range(budget.potions):
        place(EntityKind.POTION, empty())

    path_cells = {_cell(p) for p in canonical_path(grid, _pos(entrance), _pos(exit_))}
    trap_zone = [
        c for c in floor if any(CHEBYSHEV[c, pc] <= 1 for pc in path_cells)
    ]
    for _ in range(budget.traps):
        place(EntityKind.TRAP, trap_zone)

    for _ in range(budget.goblins):
        place(EntityKind.GOBLIN, [c for c in empty() if _wall4(index, c) >= 1])

    goblin_cells = [c for c, k in occupied.items() if k is EntityKind.GOBLIN]
    for _ in range(budget.goblin_mages):
        cands = [
            c
            for c in empty()
            if any(int(index.neighbors[g, k]) == c for g in goblin_cells for k in range(4))
        ]
        place(EntityKind.GOBLIN_MAGE, cands)

    treasure_cells = [c for c, k in occupied.items() if k is EntityKind.TREASURE]
    for _ in range(budget.ogres):
        cands = [
            c
            for c in empty()
            if any(
                index.los[c, t] and 4.0 <= EUCLID[c, t] <= 8.0 for t in treasure_cells
            )
        ]
        place(EntityKind.OGRE, cands)

    potion_cells = [c for c, k in occupied.items() if k is EntityKind.POTION]
    for _ in range(budget.blobs):
        cands = [
            c
            for c in empty()
            if any(index.los[c, p] and 4.0 <= EUCLID[c, p] <= 8.0 for p in potion_cells)
        ]
        place(EntityKind.BLOB, cands)

    for _ in range(budget.minitaurs):
        place(EntityKind.MINITAUR, [c for c in empty() if 4 <= dist[c, entrance] <= 8])

    placements = [Placement(k, _pos(c)) for c, k in occupied.items()]
    return FurnishReport(Level(grid, placements), relaxations, passes=1)


# --------------------------------------------------------------------------
# cellular furnisher
# --------------------------------------------------------------------------

# Kind priority at each visited cell, most restrictive first.
_CAF_PRIORITY = (
    EntityKind.ENTRANCE,
    EntityKind.EXIT,
    EntityKind.PORTAL,
    EntityKind.TREASURE,
    EntityKind.TRAP,
    EntityKind.GOBLIN,
    EntityKind.GOBLIN_MAGE,
    EntityKind.OGRE,
    EntityKind.BLOB,
    EntityKind.MINITAUR,
    EntityKind.POTION,
)

_MAX_CAF_PASSES = 20


def furnish_cellular(
    grid: LayoutGrid,
    rng: RandomStream,
    budget: Budget = DEFAULT_BUDGET,
    history: list | None = None,
) -> FurnishReport:
    """Sweep empty cells in random order, placing by neighborhood rules.

    At each visited cell the kinds are tried in a fixed priority order and
    the first whose predicate holds (and whose cap is not yet met) is
    placed.  Neighborhoods are Chebyshev squares: treasures want >=3 of 8
    wall neighbors, traps >=5 of 8 walls-or-objects, goblins >=4 wall
    neighbors and no goblin within 3, the mage a goblin within 3, ogres
    zero wall neighbors, blobs a potion within 3, the minitaur the
    entrance within 3, the entrance/exit each other farther than 5, each
    portal its anchor (entrance resp. exit) within 3, and potions at most
    3 objects among their 8 neighbors.

    After 20 passes any still-missing elements land on uniform empty
    cells, one relaxation each, so the budget is met exactly.

    ``history`` (tests only) records (pass_no, kind, cell) per placement.
    """
    index = get_index(grid)
    floor = [_cell(p) for p in grid.floor_cells()]
    if not floor:
        raise FurnishError("grid has no floor cells")

    occupied: dict[int, EntityKind] = {}
    counts = {k: 0 for k in _CAF_PRIORITY}
    caps = {k: budget.count(k) for k in _CAF_PRIORITY}
    relaxations = 0

    def placed(kind: EntityKind) -> list[int]:
        return [c for c, k in occupied.items() if k is kind]

    def within(cell: int, kind: EntityKind, radius: int) -> bool:
        return any(CHEBYSHEV[cell, c] <= radius for c in placed(kind))

    def occupied8(cell: int) -> int:
        return sum(1 for c in occupied if CHEBYSHEV[cell, c] == 1)

    def predicate(cell: int, kind: EntityKind) -> bool:
        if kind is EntityKind.ENTRANCE:
            return not within(cell, EntityKind.EXIT, 5)
        if kind is EntityKind.EXIT:
            return not within(cell, EntityKind.ENTRANCE, 5)
        if kind is EntityKind.PORTAL:
            anchor = EntityKind.ENTRANCE if counts[EntityKind.PORTAL] == 0 else EntityKind.EXIT
            return bool(placed(anchor)) and within(cell, anchor, 3)
        if kind is EntityKind.TREASURE:
            return index.wall8[cell] >= 3
        if kind is EntityKind.TRAP:
            return index.wall8[cell] + occupied8(cell) >= 5
        if kind is EntityKind.GOBLIN:
            return index.wall8[cell] >= 4 and not within(cell, EntityKind.GOBLIN, 3)
        if kind is EntityKind.GOBLIN_MAGE:
            return within(cell, EntityKind.GOBLIN, 3)
        if kind is EntityKind.OGRE:
            return index.wall8[cell] == 0
        if kind is EntityKind.BLOB:
            return within(cell, EntityKind.POTION, 3)
        if kind is EntityKind.MINITAUR:
            return within(cell, EntityKind.ENTRANCE, 3)
        return occupied8(cell) <= 3  # potion

    passes = 0
    while passes < _MAX_CAF_PASSES and any(counts[k] < caps[k] for k in _CAF_PRIORITY):
        passes += 1
        order = [c for c in floor if c not in occupied]
        rng.shuffle(order)
        for cell in order:
            for kind in _CAF_PRIORITY:
                if counts[kind] >= caps[kind]:
                    continue
                if predicate(cell, kind):
                    occupied[cell] = kind
                    counts[kind] += 1
                    if history is not None:
                        history.append((passes, kind, cell))
                    break

    for kind in _CAF_PRIORITY:
        while counts[kind] < caps[kind]:
            pool = [c for c in floor if c not in occupied]
            if not pool:
                raise FurnishError("no empty floor cells left for fallback placement")
            cell = rng.choice(pool)
            occupied[cell] = kind
            counts[kind] += 1
            relaxations += 1
            if history is not None:
                history.append((-1, kind, cell))

    placements = [Placement(k, _pos(c)) for c, k in occupied.items()]
    return FurnishReport(Level(grid, placements), relaxations, passes)


# --------------------------------------------------------------------------
# agent furnisher
# --------------------------------------------------------------------------

_AF_TURNS = 45


def _nearest(index: GridIndex, cell: int, targets: list[int]):
    """Euclidean distance to the nearest LOS-visible target; None if none."""
    best = None
    for t in targets:
        if index.los[cell, t]:
            d = float(EUCLID[cell, t])
            if best is None or d < best:
                best = d
    return best


def _af_score(index: GridIndex, objects: list[tuple[EntityKind, int]], i: int, cell: int) -> float:
    """Placement heuristic for object i standing at cell (higher is better).

    Potions are not scored here: their moves are random draws.
    """
    kind = objects[i][0]
    dist = index.dist

    def cells_of(*kinds: EntityKind, exclude_self: bool = True) -> list[int]:
        return [
            p
            for j, (k, p) in enumerate(objects)
            if k in kinds and (not exclude_self or j != i)
        ]

    def path_to(kind2: EntityKind) -> float:
        targets = cells_of(kind2)
        if not targets:
            return 0.0
        return float(min(max(int(dist[cell, t]), 0) for t in targets))

    if kind is EntityKind.ENTRANCE:
        return path_to(EntityKind.EXIT)
    if kind is EntityKind.EXIT:
        return path_to(EntityKind.ENTRANCE)
    if kind is EntityKind.PORTAL:
        opts = []
        for k2 in (EntityKind.PORTAL, EntityKind.ENTRANCE, EntityKind.EXIT):
            for t in cells_of(k2):
                opts.append(max(int(dist[cell, t]), 0))
        return float(min(opts)) if opts else 0.0
    if kind is EntityKind.TREASURE:
        g = _nearest(index, cell, cells_of(EntityKind.GOBLIN))
        return -g if g is not None else 0.0
    if kind is EntityKind.TRAP:
        visible = sum(
            1 for t in cells_of(EntityKind.TRAP, EntityKind.GOBLIN) if index.los[cell, t]
        )
        t = _nearest(index, cell, cells_of(EntityKind.TREASURE))
        return -float(visible) - (t if t is not None else 0.0)
    if kind is EntityKind.GOBLIN:
        g = _nearest(index, cell, cells_of(EntityKind.GOBLIN))
        return g if g is not None else 0.0
    if kind is EntityKind.GOBLIN_MAGE:
        g = _nearest(index, cell, cells_of(EntityKind.GOBLIN))
        m = _nearest(index, cell, cells_of(EntityKind.GOBLIN_MAGE))
        return (-g if g is not None else 0.0) + (m if m is not None else 0.0)
    if kind is EntityKind.OGRE:
        o = _nearest(index, cell, cells_of(EntityKind.OGRE))
        t = _nearest(index, cell, cells_of(EntityKind.TREASURE))
        score = o if (o is not None and o < 6.0) else 0.0
        if t is not None:
            score -= abs(t - 4.0)
        return score
    if kind is EntityKind.BLOB:
        d = _nearest(index, cell, cells_of(EntityKind.BLOB, EntityKind.POTION))
        return -max(0.0, d - 4.0) if d is not None else 0.0
    if kind is EntityKind.MINITAUR:
        return float(
            min(
                min((max(int(dist[cell, t]), 0) for t in cells_of(EntityKind.ENTRANCE)), default=0),
                min((max(int(dist[cell, t]), 0) for t in cells_of(EntityKind.EXIT)), default=0),
            )
        )
    raise ValueError(f"no deterministic score for {kind}")


def furnish_agent(
    grid: LayoutGrid,
    rng: RandomStream,
    budget: Budget = DEFAULT_BUDGET,
    history: list | None = None,
) -> FurnishReport:
    """Drop everything at random, then 45 turns of greedy self-placement.

    Objects act in placement order; each evaluates staying put plus the
    empty floor cells among its 4 neighbors and takes the best-scoring
    move (ties: stay, then N,S,E,W).  Potions score every candidate with
    a fresh random draw, i.e. they wander.

    ``history`` (tests only) records, per move considered, the tuple
    (turn, object index, kind, positions-before, chosen cell).
    """
    index = get_index(grid)
    floor = [_cell(p) for p in grid.floor_cells()]
    total = 2 + sum(
        budget.count(k) for k in _PLACEMENT_ORDER_KINDS[2:]
    )
    if len(floor) < total:
        raise FurnishError(
            f"budget needs {total} floor cells, grid has {len(floor)}"
        )

    objects: list[tuple[EntityKind, int]] = []
    occupied: set[int] = set()
    for kind in _PLACEMENT_ORDER_KINDS:
        for _ in range(budget.count(kind)):
            pool = [c for c in floor if c not in occupied]
            cell = rng.choice(pool)
            occupied.add(cell)
            objects.append((kind, cell))

    for turn in range(_AF_TURNS):
        for i, (kind, pos) in enumerate(objects):
            candidates = [pos]
            for k in range(4):
                v = int(index.neighbors[pos, k])
                if v >= 0 and v not in occupied:
                    candidates.append(v)
            if kind is EntityKind.POTION:
                scores = [rng.random() for _ in candidates]
            else:
                scores = [_af_score(index, objects, i, c) for c in candidates]
            best = 0
            for j in range(1, len(candidates)):
                if scores[j] > scores[best]:
                    best = j
            chosen = candidates[best]
            if history is not None:
                history.append(
                    (turn, i, kind, tuple(p for _, p in objects), chosen)
                )
            if chosen != pos:
                occupied.discard(pos)
                occupied.add(chosen)
                objects[i] = (kind, chosen)

    placements = [Placement(k, _pos(c)) for k, c in objects]
    return FurnishReport(Level(grid, placements), relaxations=0, passes=_AF_TURNS)


FURNISHERS = {
    "cf": furnish_constraint,
    "caf": furnish_cellular,
    "af": furnish_agent,
}
