"""Deterministic forward model: hero phase, monster phase, bookkeeping.

One call to :func:`step` advances the game a full turn: the hero moves or
bump-attacks, every monster acts in its fixed order, and the turn counter
ticks.  States are immutable values; the mutable flat-array representation
lives in :mod:`._kernel` and the codecs here are the only translation
layer, so the scripted API and the batch search paths can never disagree.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Mapping

import numpy as np

from . import _kernel as K
from .model import WIDTH, EntityKind, LayoutGrid, Level, cell_index, validate_level
from .paths import get_index


class Action(IntEnum):
    NORTH = 0
    SOUTH = 1
    EAST = 2
    WEST = 3


class Outcome(IntEnum):
    ONGOING = K.OUT_ONGOING
    WIN = K.OUT_WIN
    DEATH = K.OUT_DEATH
    STEP_LIMIT = K.OUT_STEPLIMIT


_KERNEL_KIND = {
    EntityKind.GOBLIN: K.MK_GOBLIN,
    EntityKind.GOBLIN_MAGE: K.MK_MAGE,
    EntityKind.BLOB: K.MK_BLOB,
    EntityKind.OGRE: K.MK_OGRE,
    EntityKind.MINITAUR: K.MK_MINITAUR,
}
_KIND_FROM_KERNEL = {v: k for k, v in _KERNEL_KIND.items()}


@dataclass(frozen=True)
class RuleConfig:
    """All numeric game parameters, loadable from a flat key=value file."""

    hero_max_hp: int = 20
    hero_attack: int = 2
    goblin_hp: int = 2
    goblin_attack: int = 1
    mage_hp: int = 2
    mage_bolt_damage: int = 1
    mage_range: int = 3
    blob_hp: int = 2
    blob_attack: int = 2
    blob_hp_gain: int = 2
    blob_attack_gain: int = 1
    ogre_hp: int = 4
    ogre_attack: int = 3
    minitaur_hp: int = 6
    minitaur_attack: int = 3
    minitaur_stun_rounds: int = 3
    trap_damage: int = 2
    potion_heal: int = 5
    hero_step_limit: int = 200

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not isinstance(value, int) or value <= 0:
                raise ValueError(f"rule {name} must be a positive integer, got {value!r}")

    def to_array(self) -> np.ndarray:
        return np.array(
            [
                self.hero_max_hp,
                self.hero_attack,
                self.goblin_hp,
                self.goblin_attack,
                self.mage_hp,
                self.mage_bolt_damage,
                self.mage_range,
                self.blob_hp,
                self.blob_attack,
                self.blob_hp_gain,
                self.blob_attack_gain,
                self.ogre_hp,
                self.ogre_attack,
                self.minitaur_hp,
                self.minitaur_attack,
                self.minitaur_stun_rounds,
                self.trap_damage,
                self.potion_heal,
                self.hero_step_limit,
            ],
            np.int32,
        )

    @classmethod
    def from_text(cls, text: str) -> "RuleConfig":
        known = set(cls.__dataclass_fields__)
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"rules line {lineno}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ValueError(f"rules line {lineno}: unknown key {key!r}")
            try:
                values[key] = int(val.strip())
            except ValueError:
                raise ValueError(f"rules line {lineno}: {key} needs an integer, got {val.strip()!r}") from None
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "RuleConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def load_default_rules() -> RuleConfig:
    """Parse the packaged ``rules.default`` file."""
    text = importlib.resources.files("dungeonforge").joinpath("rules.default").read_text()
    return RuleConfig.from_text(text)


DEFAULT_RULES = RuleConfig()


@dataclass(frozen=True)
class MonsterState:
    kind: EntityKind
    position: tuple[int, int]
    hp: int
    attack: int
    stun_remaining: int = 0
    power_level: int = 0
    alive: bool = True


@dataclass(frozen=True)
class Hero:
    position: tuple[int, int]
    hp: int


@dataclass(frozen=True)
class GameState:
    grid: LayoutGrid
    hero: Hero
    monsters: tuple[MonsterState, ...]
    # Uncollected positions per consumable kind; portals are never consumed.
    remaining: Mapping[EntityKind, frozenset]
    emptied_treasures: frozenset
    kills: int
    treasures_collected: int
    turn: int
    outcome: Outcome
    level_consts: np.ndarray = field(compare=False, repr=False)

    @property
    def monsters_total(self) -> int:
        return int(self.level_consts[K.LVL_MONSTERS_TOTAL])

    @property
    def treasures_total(self) -> int:
        return int(self.level_consts[K.LVL_TREASURES_TOTAL])


def _pos(cell: int) -> tuple[int, int]:
    return (cell % WIDTH, cell // WIDTH)


def state_to_array(state: GameState) -> np.ndarray:
    """Encode a GameState into the kernel's flat int32 layout."""
    arr = np.zeros(K.STATE_SIZE, np.int32)
    arr[K.IDX_HERO_POS] = cell_index(*state.hero.position)
    arr[K.IDX_HERO_HP] = state.hero.hp
    arr[K.IDX_KILLS] = state.kills
    arr[K.IDX_COLLECTED] = state.treasures_collected
    arr[K.IDX_TURN] = state.turn
    arr[K.IDX_OUTCOME] = int(state.outcome)
    arr[K.IDX_NMON] = len(state.monsters)
    for pos in state.remaining[EntityKind.TREASURE]:
        arr[K.ITEMS_OFF + cell_index(*pos)] = K.IT_TREASURE
    for pos in state.remaining[EntityKind.POTION]:
        arr[K.ITEMS_OFF + cell_index(*pos)] = K.IT_POTION
    for pos in state.remaining[EntityKind.TRAP]:
        arr[K.ITEMS_OFF + cell_index(*pos)] = K.IT_TRAP
    for pos in state.emptied_treasures:
        arr[K.ITEMS_OFF + cell_index(*pos)] = K.IT_EMPTIED
    for i, m in enumerate(state.monsters):
        off = K.MON_OFF + i * K.MON_STRIDE
        arr[off + K.M_KIND] = _KERNEL_KIND[m.kind]
        arr[off + K.M_POS] = cell_index(*m.position)
        arr[off + K.M_HP] = m.hp
        arr[off + K.M_ATK] = m.attack
        arr[off + K.M_STUN] = m.stun_remaining
        arr[off + K.M_ALIVE] = 1 if m.alive else 0
        arr[off + K.M_POWER] = m.power_level
    return arr


def state_from_array(arr: np.ndarray, template: GameState) -> GameState:
    """Decode the kernel layout back into a GameState.

    Static context (grid, portal set, level constants) comes from
    ``template``; everything dynamic is read from ``arr``.
    """
    treasures, potions, traps, emptied = [], [], [], []
    for c in range(K.N):
        v = int(arr[K.ITEMS_OFF + c])
        if v == K.IT_TREASURE:
            treasures.append(_pos(c))
        elif v == K.IT_POTION:
            potions.append(_pos(c))
        elif v == K.IT_TRAP:
            traps.append(_pos(c))
        elif v == K.IT_EMPTIED:
            emptied.append(_pos(c))
    monsters = []
    for i in range(int(arr[K.IDX_NMON])):
        off = K.MON_OFF + i * K.MON_STRIDE
        monsters.append(
            MonsterState(
                kind=_KIND_FROM_KERNEL[int(arr[off + K.M_KIND])],
                position=_pos(int(arr[off + K.M_POS])),
                hp=int(arr[off + K.M_HP]),
                attack=int(arr[off + K.M_ATK]),
                stun_remaining=int(arr[off + K.M_STUN]),
                power_level=int(arr[off + K.M_POWER]),
                alive=bool(arr[off + K.M_ALIVE]),
            )
        )
    return GameState(
        grid=template.grid,
        hero=Hero(_pos(int(arr[K.IDX_HERO_POS])), max(0, int(arr[K.IDX_HERO_HP]))),
        monsters=tuple(monsters),
        remaining={
            EntityKind.TREASURE: frozenset(treasures),
            EntityKind.POTION: frozenset(potions),
            EntityKind.TRAP: frozenset(traps),
            EntityKind.PORTAL: template.remaining[EntityKind.PORTAL],
        },
        emptied_treasures=frozenset(emptied),
        kills=int(arr[K.IDX_KILLS]),
        treasures_collected=int(arr[K.IDX_COLLECTED]),
        turn=int(arr[K.IDX_TURN]),
        outcome=Outcome(int(arr[K.IDX_OUTCOME])),
        level_consts=template.level_consts,
    )


def level_consts(level: Level, monsters_total: int, treasures_total: int) -> np.ndarray:
    index = get_index(level.grid)
    portals = sorted(cell_index(*p.position) for p in level.placements_by_kind(EntityKind.PORTAL))
    dia = index.diameter
    return np.array(
        [
            cell_index(*level.entrance()),
            cell_index(*level.exit()),
            portals[0] if portals else -1,
            portals[1] if portals else -1,
            dia.length,
            monsters_total,
            treasures_total,
        ],
        np.int32,
    )


def _monster_stats(kind: EntityKind, rules: RuleConfig) -> tuple[int, int]:
    return {
        EntityKind.GOBLIN: (rules.goblin_hp, rules.goblin_attack),
        EntityKind.GOBLIN_MAGE: (rules.mage_hp, 0),
        EntityKind.BLOB: (rules.blob_hp, rules.blob_attack),
        EntityKind.OGRE: (rules.ogre_hp, rules.ogre_attack),
        EntityKind.MINITAUR: (rules.minitaur_hp, rules.minitaur_attack),
    }[kind]


def initial_state(level: Level, rules: RuleConfig = DEFAULT_RULES) -> GameState:
    """Hero at the entrance with full HP, monsters in reading order, turn 0.

    Monster turn order is the (y, x) sort of spawn positions and stays
    fixed for the whole game.  A hero walled in on all four sides gets an
    immediate StepLimit outcome (no playable move exists).
    """
    errors = validate_level(level)
    if errors:
        raise ValueError("invalid level: " + "; ".join(errors))

    spawns = [p for p in level.placements if p.kind in _KERNEL_KIND]
    spawns.sort(key=lambda p: (p.position[1], p.position[0]))
    monsters = tuple(
        MonsterState(p.kind, p.position, *_monster_stats(p.kind, rules)) for p in spawns
    )
    remaining = {
        EntityKind.TREASURE: frozenset(
            p.position for p in level.placements_by_kind(EntityKind.TREASURE)
        ),
        EntityKind.POTION: frozenset(
            p.position for p in level.placements_by_kind(EntityKind.POTION)
        ),
        EntityKind.TRAP: frozenset(
            p.position for p in level.placements_by_kind(EntityKind.TRAP)
        ),
        EntityKind.PORTAL: frozenset(
            p.position for p in level.placements_by_kind(EntityKind.PORTAL)
        ),
    }
    consts = level_consts(level, len(monsters), len(remaining[EntityKind.TREASURE]))

    index = get_index(level.grid)
    entrance_cell = cell_index(*level.entrance())
    enclosed = all(int(index.neighbors[entrance_cell, k]) < 0 for k in range(4))

    return GameState(
        grid=level.grid,
        hero=Hero(level.entrance(), rules.hero_max_hp),
        monsters=monsters,
        remaining=remaining,
        emptied_treasures=frozenset(),
        kills=0,
        treasures_collected=0,
        turn=0,
        outcome=Outcome.STEP_LIMIT if enclosed else Outcome.ONGOING,
        level_consts=consts,
    )


def legal_actions(state: GameState) -> set[Action]:
    """Directions whose target cell is floor; moving into a monster attacks."""
    if state.outcome is not Outcome.ONGOING:
        raise ValueError(f"legal_actions on terminal state ({state.outcome.name})")
    index = get_index(state.grid)
    cell = cell_index(*state.hero.position)
    return {Action(k) for k in range(4) if int(index.neighbors[cell, k]) >= 0}


def is_terminal(state: GameState) -> Outcome:
    return state.outcome


def step(state: GameState, action: Action, rules: RuleConfig = DEFAULT_RULES) -> GameState:
    """Apply one full turn and return the successor state."""
    if state.outcome is not Outcome.ONGOING:
        raise ValueError(f"step on terminal state ({state.outcome.name})")
    index = get_index(state.grid)
    cell = cell_index(*state.hero.position)
    if int(index.neighbors[cell, int(action)]) < 0:
        raise ValueError(f"illegal action {Action(action).name} from {state.hero.position}")
    arr = state_to_array(state)
    K.step_kernel(
        arr, int(action), index.neighbors, index.dist, index.los,
        rules.to_array(), state.level_consts,
    )
    return state_from_array(arr, state)
