"""Automated playtesters: UCT search driven by per-persona utilities.

Three personas score terminal/horizon states differently — the runner
wants the exit fast, the monster killer wants kills, the treasure
collector wants pickups — and otherwise share the same vanilla UCT
machinery (UCB1 selection, single-child expansion, uniform rollouts with
a no-immediate-backtrack filter, mean-value backpropagation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernel as K
from .engine import (
    DEFAULT_RULES,
    Action,
    GameState,
    Outcome,
    RuleConfig,
    initial_state,
    state_from_array,
    state_to_array,
)
from .model import Level
from .paths import get_index
from .rng import RandomStream


class PersonaKind(Enum):
    RUNNER = "runner"
    MONSTER_KILLER = "monster_killer"
    TREASURE_COLLECTOR = "treasure_collector"


_KERNEL_PERSONA = {
    PersonaKind.RUNNER: K.P_RUNNER,
    PersonaKind.MONSTER_KILLER: K.P_KILLER,
    PersonaKind.TREASURE_COLLECTOR: K.P_COLLECTOR,
}


@dataclass
class PersonaParams:
    iterations_per_move: int = 1000
    rollout_depth: int = 20
    exploration_constant: float = 1.41
    rng: RandomStream = field(default_factory=lambda: RandomStream(0, "persona"))

    def __post_init__(self):
        if self.iterations_per_move < 1:
            raise ValueError("iterations_per_move must be >= 1")
        if self.rollout_depth < 0:
            raise ValueError("rollout_depth must be >= 0")


@dataclass(frozen=True)
class PlayTrace:
    level: Level
    persona: PersonaKind
    actions: tuple[Action, ...]
    outcome: Outcome
    steps: int
    kills: int
    treasures_collected: int
    final_hp: int


def persona_value(
    persona: PersonaKind,
    state: GameState,
    level_totals: dict,
    rules: RuleConfig = DEFAULT_RULES,
) -> float:
    """Utility of a state in [0, 1] from one persona's point of view.

    Runner: Win pays 1 − 0.5·turns/step_limit, Death pays 0, anything
    unfinished pays a small exit-proximity credit (weight 0.02, scaled by
    the grid diameter) that decays as turns burn — so any win beats any
    amount of loitering, and fast wins beat slow ones.  Killer/collector:
    half the completion ratio of their pet metric plus 0.5 for a win
    minus 0.5 for a death, clamped.  A zero total makes that ratio term
    pay its full weight.
    """
    index = get_index(state.grid)
    lvl = state.level_consts.copy()
    lvl[K.LVL_MONSTERS_TOTAL] = int(level_totals["monsters"])
    lvl[K.LVL_TREASURES_TOTAL] = int(level_totals["treasures"])
    return float(
        K.persona_value_kernel(
            state_to_array(state),
            _KERNEL_PERSONA[persona],
            index.dist,
            rules.to_array(),
            lvl,
        )
    )


def mcts_select_action(
    state: GameState,
    persona: PersonaKind,
    params: PersonaParams,
    rules: RuleConfig = DEFAULT_RULES,
) -> Action:
    """Plan one hero move: UCT with ``iterations_per_move`` iterations.

    Returns the most-visited root child; ties break in N, S, E, W order.
    Each call draws one 64-bit seed from ``params.rng``, so repeated
    calls explore differently but a fixed stream replays identically.
    """
    if state.outcome is not Outcome.ONGOING:
        raise ValueError(f"mcts_select_action on terminal state ({state.outcome.name})")
    index = get_index(state.grid)
    action = int(
        K.mcts_search(
            state_to_array(state),
            _KERNEL_PERSONA[persona],
            params.iterations_per_move,
            params.rollout_depth,
            params.exploration_constant,
            params.rng.getrandbits(63),
            index.neighbors,
            index.dist,
            index.los,
            rules.to_array(),
            state.level_consts,
        )
    )
    if action < 0:
        raise ValueError("no legal actions to select from")
    return Action(action)


def run_persona(
    level: Level,
    persona: PersonaKind,
    params: PersonaParams | None = None,
    rules: RuleConfig = DEFAULT_RULES,
) -> PlayTrace:
    """Play a level start to finish, planning every move with UCT."""
    if params is None:
        params = PersonaParams()
    start = initial_state(level, rules)
    index = get_index(level.grid)
    rules_arr = rules.to_array()
    kp = _KERNEL_PERSONA[persona]

    arr = state_to_array(start)
    actions: list[Action] = []
    while int(arr[K.IDX_OUTCOME]) == K.OUT_ONGOING:
        act = int(
            K.mcts_search(
                arr, kp,
                params.iterations_per_move, params.rollout_depth,
                params.exploration_constant, params.rng.getrandbits(63),
                index.neighbors, index.dist, index.los,
                rules_arr, start.level_consts,
            )
        )
        if act < 0:  # walled in; unreachable on levels that pass validation
            break
        K.step_kernel(
            arr, act, index.neighbors, index.dist, index.los,
            rules_arr, start.level_consts,
        )
        actions.append(Action(act))

    final = state_from_array(arr, start)
    return PlayTrace(
        level=level,
        persona=persona,
        actions=tuple(actions),
        outcome=final.outcome,
        steps=final.turn,
        kills=final.kills,
        treasures_collected=final.treasures_collected,
        final_hp=final.hero.hp,
    )


PERSONAS = {
    "runner": PersonaKind.RUNNER,
    "mk": PersonaKind.MONSTER_KILLER,
    "tc": PersonaKind.TREASURE_COLLECTOR,
}
