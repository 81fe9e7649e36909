"""The opponent population: MCTS, pattern, random and Kuhn strategy bots."""

from .cfr import (
    CfrSolver,
    CfrStrategyProfile,
    best_response,
    cfr_train,
    expected_value,
    exploitability,
)
from .kuhn_bots import ARCHETYPES, kuhn_archetype_act
from .mcts import mcts_select
from .minimax import minimax_value, move_values, optimal_moves
from .population import (
    NO_OPPONENT,
    PATTERN_ORDERINGS,
    Archetype,
    OpponentSpec,
    PopulationConfig,
    default_population,
    opponent_act,
    parse_opponent,
    sample_opponent,
)


def preferred_pattern_act(ordering_id: int, cells):
    spec = OpponentSpec(Archetype.PATTERN, {"ordering_id": ordering_id})
    return spec.ttt_move_distribution(cells)[0][0]


__all__ = [
    "ARCHETYPES",
    "Archetype",
    "CfrSolver",
    "CfrStrategyProfile",
    "NO_OPPONENT",
    "OpponentSpec",
    "PATTERN_ORDERINGS",
    "PopulationConfig",
    "best_response",
    "cfr_train",
    "default_population",
    "expected_value",
    "exploitability",
    "kuhn_archetype_act",
    "mcts_select",
    "minimax_value",
    "move_values",
    "opponent_act",
    "optimal_moves",
    "parse_opponent",
    "preferred_pattern_act",
    "sample_opponent",
]
