"""Exact Tic-Tac-Toe search: alpha-beta negamax over the full game tree."""

from __future__ import annotations

import numpy as np

from .._jit import njit
from ..envs.tictactoe import EMPTY, X, to_action

_LINES = np.array(
    [[0, 1, 2], [3, 4, 5], [6, 7, 8], [0, 3, 6], [1, 4, 7], [2, 5, 8], [0, 4, 8], [2, 4, 6]],
    dtype=np.int64,
)

# Recursive kernels cannot be reloaded from numba's on-disk cache (the reloaded
# recursion symbol goes unresolved), so this module compiles fresh each process.
@njit(cache=False)
def board_winner(board, lines):
    for k in range(lines.shape[0]):
        a = board[lines[k, 0]]
        if a != 0 and a == board[lines[k, 1]] and a == board[lines[k, 2]]:
            return a
    return 0


@njit(cache=False)
def _negamax(board, player, alpha, beta, lines):
    # value for `player` to move; previous mover may have just won
    w = board_winner(board, lines)
    if w != 0:
        return 1 if w == player else -1
    best = -2
    any_move = False
    for i in range(9):
        if board[i] != 0:
            continue
        any_move = True
        board[i] = player
        v = -_negamax(board, 3 - player, -beta, -alpha, lines)
        board[i] = 0
        if v > best:
            best = v
        if best > alpha:
            alpha = best
        if alpha >= beta:
            break
    if not any_move:
        return 0
    return best


@njit(cache=False)
def _root_search(board, player, lines):
    """Best value and first (row-major) move achieving it; move -1 if terminal."""
    w = board_winner(board, lines)
    if w != 0:
        return (1 if w == player else -1), -1
    best = -2
    move = -1
    alpha = -2
    for i in range(9):
        if board[i] != 0:
            continue
        board[i] = player
        v = -_negamax(board, 3 - player, -2, -alpha, lines)
        board[i] = 0
        if v > best:
            best = v
            move = i
            alpha = v
            if best == 1:
                break
    if move == -1:
        return 0, -1
    return best, move


@njit(cache=False)
def _move_values(board, player, lines):
    out = np.full(9, -9, dtype=np.int64)
    for i in range(9):
        if board[i] != 0:
            continue
        board[i] = player
        out[i] = -_negamax(board, 3 - player, -2, 2, lines)
        board[i] = 0
    return out


def _as_board(cells) -> np.ndarray:
    return np.asarray(cells, dtype=np.int64).copy()


def minimax_value(cells, to_move: int = X):
    """Exact value for the side to move (+1 win, 0 draw, -1 loss) and an optimal action.

    Ties between equally valued moves go to the first cell in row-major order.
    The action is None when the board is already decided or full.
    """
    value, move = _root_search(_as_board(cells), int(to_move), _LINES)
    return int(value), (None if move < 0 else to_action(int(move)))


def move_values(cells, to_move: int = X) -> dict:
    """Exact value of every legal move, keyed by 1-indexed (row, col)."""
    vals = _move_values(_as_board(cells), int(to_move), _LINES)
    return {to_action(i): int(vals[i]) for i in range(9) if cells[i] == EMPTY}


def optimal_moves(cells, to_move: int = X) -> list:
    vals = move_values(cells, to_move)
    if not vals:
        return []
    best = max(vals.values())
    return [a for a, v in vals.items() if v == best]
