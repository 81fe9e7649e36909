"""Tic-Tac-Toe on a 3x3 board with 1-indexed (row, col) actions."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .base import ConfigError, ContractViolation, Observation, Result, StepOutcome

EMPTY, X, O = 0, 1, 2
SYMBOLS = {EMPTY: ".", X: "X", O: "O"}
_FROM_SYMBOL = {v: k for k, v in SYMBOLS.items()}

LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),
    (0, 3, 6), (1, 4, 7), (2, 5, 8),
    (0, 4, 8), (2, 4, 6),
)

ALL_CELLS = tuple((r, c) for r in range(1, 4) for c in range(1, 4))


def other(mark: int) -> int:
    return O if mark == X else X


def to_index(action) -> int:
    r, c = action
    return (int(r) - 1) * 3 + (int(c) - 1)


def to_action(index: int) -> tuple[int, int]:
    return (index // 3 + 1, index % 3 + 1)


def winner(cells) -> int:
    """Mark with three in a row, or EMPTY."""
    for a, b, c in LINES:
        if cells[a] != EMPTY and cells[a] == cells[b] == cells[c]:
            return cells[a]
    return EMPTY


def is_full(cells) -> bool:
    return all(v != EMPTY for v in cells)


def empty_cells(cells) -> list[int]:
    return [i for i, v in enumerate(cells) if v == EMPTY]


def mover(cells) -> int:
    nx = sum(1 for v in cells if v == X)
    no = sum(1 for v in cells if v == O)
    return X if nx == no else O


def render_board(cells) -> str:
    return "\n".join(
        " ".join(SYMBOLS[cells[r * 3 + c]] for c in range(3)) for r in range(3)
    )


def parse_board(text: str) -> tuple[int, ...]:
    rows = [line.split() for line in text.strip().splitlines()]
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise ConfigError(f"expected a 3x3 grid, got {text!r}")
    try:
        return tuple(_FROM_SYMBOL[s] for row in rows for s in row)
    except KeyError as exc:
        raise ConfigError(f"unknown cell symbol {exc.args[0]!r}") from None


@dataclass(frozen=True)
class TicTacToeState:
    cells: tuple[int, ...] = (EMPTY,) * 9
    to_move: int = X
    agent_mark: int = X
    turn: int = 0
    invalid_count: int = 0
    max_turns: int = 8
    result: Result = Result.ONGOING
    moves: tuple[tuple[int, int], ...] = ()

    @property
    def terminal(self) -> bool:
        return self.result is not Result.ONGOING

    @property
    def agent_to_move(self) -> bool:
        return self.to_move == self.agent_mark


class TicTacToeEnv:
    kind = "tictactoe"

    def __init__(self, board_size: int = 3, agent_first: bool = True, max_turns: int = 8):
        if board_size != 3:
            raise ConfigError("only 3x3 Tic-Tac-Toe is supported")
        if max_turns < 1:
            raise ConfigError("max_turns must be >= 1")
        self.board_size = board_size
        self.agent_first = agent_first
        self.max_turns = max_turns

    def reset(self, seed: int = 0) -> TicTacToeState:
        # deterministic start; seed kept for a uniform reset signature
        return TicTacToeState(
            agent_mark=X if self.agent_first else O, max_turns=self.max_turns
        )

    def admissible(self, state: TicTacToeState) -> list[tuple[int, int]]:
        if state.terminal:
            raise ContractViolation("no admissible actions in a terminal state")
        return [to_action(i) for i in empty_cells(state.cells)]

    def _legal(self, state: TicTacToeState, action) -> bool:
        try:
            r, c = action
            if not (1 <= int(r) <= 3 and 1 <= int(c) <= 3):
                return False
        except (TypeError, ValueError):
            return False
        return state.cells[to_index(action)] == EMPTY

    def step(self, state: TicTacToeState, action) -> StepOutcome:
        if state.terminal:
            raise ContractViolation("step() called on a terminal Tic-Tac-Toe state")
        by_agent = state.agent_to_move
        if not self._legal(state, action):
            if not by_agent:
                raise ContractViolation(f"opponent played illegal move {action!r}")
            nxt = replace(state, turn=state.turn + 1, invalid_count=state.invalid_count + 1)
            if nxt.turn >= nxt.max_turns:
                nxt = replace(nxt, result=Result.TIMEOUT)
            return StepOutcome(nxt, self.observe(nxt), nxt.terminal, nxt.result, invalid=True)

        idx = to_index(action)
        cells = list(state.cells)
        cells[idx] = state.to_move
        cells = tuple(cells)
        result = Result.ONGOING
        w = winner(cells)
        if w != EMPTY:
            result = Result.WIN if w == state.agent_mark else Result.LOSS
        elif is_full(cells):
            result = Result.DRAW
        turn = state.turn + 1 if by_agent else state.turn
        if result is Result.ONGOING and by_agent and turn >= state.max_turns:
            result = Result.TIMEOUT
        nxt = replace(
            state,
            cells=cells,
            to_move=other(state.to_move),
            turn=turn,
            result=result,
            moves=state.moves + ((state.to_move, idx),),
        )
        return StepOutcome(nxt, self.observe(nxt), nxt.terminal, result)

    def render(self, state: TicTacToeState) -> str:
        return render_board(state.cells)

    def structured(self, state: TicTacToeState) -> dict:
        return {"cells": list(state.cells), "to_move": state.to_move}

    def observe(self, state: TicTacToeState) -> Observation:
        adm = () if state.terminal else tuple(self.admissible(state))
        return Observation(
            text=self.render(state),
            structured=self.structured(state),
            turn_index=state.turn + 1,
            admissible=adm,
        )

    def prompt_vars(self, state: TicTacToeState) -> dict:
        return {
            "board_size": self.board_size,
            "player_symbol": SYMBOLS[state.agent_mark],
            "opponent_symbol": SYMBOLS[other(state.agent_mark)],
        }
