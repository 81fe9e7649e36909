"""Game environments behind one contract.

Every environment exposes ``reset(seed) -> state``, ``step(state, action) ->
StepOutcome``, ``admissible(state)``, ``observe(state)`` and ``render(state)``.
States are frozen dataclasses, so they can be copied and shipped freely.
"""

from __future__ import annotations

from .base import (
    ConfigError,
    ContractViolation,
    EnvKind,
    GenerationExhausted,
    Observation,
    Result,
    StepOutcome,
)
from .kuhn import KuhnEnv, KuhnState, kuhn_payoff
from .sokoban import SokobanEnv, SokobanRoom, SokobanState, generate_room, room_from_text, solve
from .tictactoe import TicTacToeEnv, TicTacToeState

_ENVS = {
    EnvKind.TICTACTOE: TicTacToeEnv,
    EnvKind.KUHN: KuhnEnv,
    EnvKind.SOKOBAN: SokobanEnv,
}


def make_env(kind, **params):
    kind = EnvKind(kind)
    try:
        return _ENVS[kind](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind.value}: {exc}") from None


def reset(kind, params: dict | None = None, seed: int = 0):
    """Build the environment and return ``(env, state, observation)``."""
    env = make_env(kind, **(params or {}))
    state = env.reset(seed)
    return env, state, env.observe(state)


def step(env, state, action) -> StepOutcome:
    return env.step(state, action)


def admissible_actions(env, state) -> list:
    return env.admissible(state)


def render(env, state) -> str:
    return env.render(state)


__all__ = [
    "ConfigError",
    "ContractViolation",
    "EnvKind",
    "GenerationExhausted",
    "KuhnEnv",
    "KuhnState",
    "Observation",
    "Result",
    "SokobanEnv",
    "SokobanRoom",
    "SokobanState",
    "StepOutcome",
    "TicTacToeEnv",
    "TicTacToeState",
    "admissible_actions",
    "generate_room",
    "kuhn_payoff",
    "make_env",
    "render",
    "reset",
    "room_from_text",
    "solve",
    "step",
]
