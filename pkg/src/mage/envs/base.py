from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Mapping


class EnvKind(str, enum.Enum):
    TICTACTOE = "tictactoe"
    KUHN = "kuhn"
    SOKOBAN = "sokoban"


class Result(str, enum.Enum):
    ONGOING = "ongoing"
    WIN = "win"
    LOSS = "loss"
    DRAW = "draw"
    TIMEOUT = "timeout"


class ConfigError(ValueError):
    """Invalid environment or run configuration."""


class ContractViolation(RuntimeError):
    """A precondition of an environment operation was broken."""


class GenerationExhausted(RuntimeError):
    """Procedural generation gave up after its attempt budget."""


@dataclass(frozen=True)
class Observation:
    text: str
    structured: Mapping[str, Any]
    turn_index: int
    admissible: tuple = ()


@dataclass(frozen=True)
class StepOutcome:
    state: Any
    next_obs: Observation
    terminal: bool
    result: Result
    invalid: bool = False
