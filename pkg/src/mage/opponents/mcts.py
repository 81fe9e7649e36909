"""UCT Monte Carlo tree search for Tic-Tac-Toe opponents.

The tree is rebuilt on every call.  All randomness comes from a pre-drawn
array of uniforms, so the numba kernel and the plain-Python fallback make
identical choices for the same generator state.
"""

from __future__ import annotations

import math

import numpy as np

from .._jit import njit
from ..envs.tictactoe import to_action
from .minimax import _LINES, board_winner

DRAWS_PER_SIM = 10


@njit
def _uct_search(root_board, to_move, num_sims, uniforms, c, lines):
    max_nodes = num_sims + 1
    children = np.full((max_nodes, 9), -1, dtype=np.int64)
    n_children = np.zeros(max_nodes, dtype=np.int64)
    visits = np.zeros(max_nodes, dtype=np.float64)
    value = np.zeros(max_nodes, dtype=np.float64)
    # mark of the player who moved into the node
    mover = np.zeros(max_nodes, dtype=np.int64)
    mover[0] = 3 - to_move
    n_nodes = 1
    path = np.zeros(11, dtype=np.int64)
    board = np.zeros(9, dtype=np.int64)
    ptr = 0

    for _ in range(num_sims):
        for i in range(9):
            board[i] = root_board[i]
        node = 0
        depth = 0
        path[0] = 0
        player = to_move
        winner = board_winner(board, lines)
        n_empty = 0
        for i in range(9):
            if board[i] == 0:
                n_empty += 1

        # selection
        while winner == 0 and n_empty > 0 and n_children[node] == n_empty:
            best_score = -1.0
            best_child = -1
            best_move = -1
            log_n = math.log(visits[node])
            for m in range(9):
                ch = children[node, m]
                if ch < 0:
                    continue
                score = value[ch] / visits[ch] + c * math.sqrt(log_n / visits[ch])
                if score > best_score:
                    best_score = score
                    best_child = ch
                    best_move = m
            board[best_move] = player
            player = 3 - player
            node = best_child
            depth += 1
            path[depth] = node
            n_empty -= 1
            winner = board_winner(board, lines)

        # expansion
        if winner == 0 and n_empty > 0:
            k = int(uniforms[ptr] * (n_empty - n_children[node]))
            ptr += 1
            for m in range(9):
                if board[m] == 0 and children[node, m] < 0:
                    if k == 0:
                        new = n_nodes
                        n_nodes += 1
                        children[node, m] = new
                        n_children[node] += 1
                        mover[new] = player
                        board[m] = player
                        player = 3 - player
                        node = new
                        depth += 1
                        path[depth] = node
                        n_empty -= 1
                        winner = board_winner(board, lines)
                        break
                    k -= 1

        # uniform random playout
        while winner == 0 and n_empty > 0:
            k = int(uniforms[ptr] * n_empty)
            ptr += 1
            for m in range(9):
                if board[m] == 0:
                    if k == 0:
                        board[m] = player
                        break
                    k -= 1
            player = 3 - player
            n_empty -= 1
            winner = board_winner(board, lines)

        for d in range(depth + 1):
            nd = path[d]
            visits[nd] += 1.0
            if winner == 0:
                value[nd] += 0.5
            elif winner == mover[nd]:
                value[nd] += 1.0

    best = -1
    best_visits = -1.0
    for m in range(9):
        ch = children[0, m]
        if ch >= 0 and visits[ch] > best_visits:
            best_visits = visits[ch]
            best = m
    return best


def mcts_select(cells, to_move: int, num_simulations: int, rng: np.random.Generator,
                exploration: float = math.sqrt(2.0)):
    """UCT move for ``to_move``; returns a 1-indexed (row, col)."""
    if num_simulations < 1:
        raise ValueError("num_simulations must be >= 1")
    board = np.asarray(cells, dtype=np.int64)
    if board_winner(board, _LINES) != 0 or not (board == 0).any():
        raise ValueError("mcts_select needs a non-terminal board")
    uniforms = rng.random(num_simulations * DRAWS_PER_SIM)
    move = _uct_search(board, int(to_move), int(num_simulations), uniforms,
                       float(exploration), _LINES)
    return to_action(int(move))
