"""Seedable two-step dungeon pipeline: layouts, furnishing, play, analysis."""

from .analysis import (
    MetricsRecord,
    SummaryStat,
    aggregate,
    export_tables,
    layout_metrics,
    level_metrics,
    play_metrics,
    wall_chunks,
    welch_t,
)
from .creators import CREATORS, CreatorParams, Room
from .engine import (
    Action,
    GameState,
    MonsterState,
    Outcome,
    RuleConfig,
    initial_state,
    is_terminal,
    legal_actions,
    load_default_rules,
    step,
)
from .furnish import FURNISHERS, Budget, FurnishError, FurnishReport
from .model import (
    EntityKind,
    LayoutGrid,
    Level,
    LevelParseError,
    Placement,
    Provenance,
    Tile,
    parse_level,
    serialize_level,
    validate_layout,
    validate_level,
)
from .paths import (
    GridIndex,
    LongestPathResult,
    canonical_path,
    diameter,
    line_of_sight,
    shortest_path_distance,
)
from .personas import (
    PERSONAS,
    PersonaKind,
    PersonaParams,
    PlayTrace,
    mcts_select_action,
    persona_value,
    run_persona,
)
from .rng import RandomStream

__version__ = "0.1.0"
