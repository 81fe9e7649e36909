"""Hand-built action features for the linear softmax policy.

Every featurizer maps a :class:`PolicyContext` to a fixed candidate list, an
admissibility mask and a ``(num_candidates, dim)`` matrix whose row ``a`` is
phi(context, a).  Three kinds of columns appear in each env:

* state-action indicators, split into a copy used while the memory is still
  empty and a copy used once it holds a real reflection, so first-episode and
  later-episode behaviour have separate weights;
* tactical features that score a candidate from the current state alone;
* digest features read from earlier episodes' reflections (how this action
  fared at this same state before, and what the opponent has been doing).
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict

import numpy as np

from ..advantage import anchor_hex
from ..envs import EnvKind
from ..envs import kuhn
from ..envs import sokoban as sk
from ..envs import tictactoe as ttt
from ..rollout import action_json


def _action_key(action) -> str:
    return json.dumps(action_json(action))


def visit_table(digests) -> dict:
    """(anchor, action key) -> [score sum, visit count] over earlier episodes."""
    table: dict = defaultdict(lambda: [0.0, 0])
    for d in digests:
        for anchor, key, _invalid in d.get("visits", ()):
            cell = table[(anchor, key)]
            cell[0] += d["score"]
            cell[1] += 1
    return table


def _history_stats(table, anchor, action) -> tuple[float, float]:
    cell = table.get((anchor, _action_key(action)))
    if not cell:
        return 0.0, 0.0
    return cell[0] / cell[1], min(cell[1], 2) / 2.0


class KuhnFeaturizer:
    name = "kuhn-v1"
    n_infosets = len(kuhn.INFO_SETS)
    _A = 2 * 12 * 2
    _B = 7
    _C = 6
    dim = _A + 2 * _B + 2 * _C

    def candidates(self, ctx) -> list:
        return list(kuhn.ACTIONS)

    def mask(self, ctx) -> np.ndarray:
        adm = set(ctx.admissible)
        return np.array([a in adm for a in kuhn.ACTIONS])

    @staticmethod
    def opponent_profile(digests) -> np.ndarray:
        """Centred opening-bet rate, centred call rate, bluff seen, trap seen, coverage."""
        open_bet = open_all = call = facing = 0
        bluff = trap = 0.0
        for d in digests:
            o = d.get("opponent") or {}
            open_bet += o.get("open_bet", 0)
            open_all += o.get("open_bet", 0) + o.get("open_pass", 0)
            call += o.get("call", 0)
            facing += o.get("call", 0) + o.get("fold", 0)
            card, line = o.get("showdown_card"), o.get("showdown_line") or ""
            if card in ("J", "Q") and line.startswith("B"):
                bluff = 1.0
            if card == "K" and line.startswith("P"):
                trap = 1.0
        open_rate = open_bet / open_all - 0.5 if open_all else 0.0
        call_rate = call / facing - 0.5 if facing else 0.0
        return np.array([open_rate, call_rate, bluff, trap, min(len(digests), 2) / 2.0])

    def matrix(self, ctx) -> np.ndarray:
        s = ctx.current.structured
        card = "JQK".index(s["card"])
        info = kuhn.INFO_SET_INDEX[s["card"] + s["history"]]
        digests = ctx.memory.digests()
        has_mem = 1.0 if digests else 0.0
        table = visit_table(digests)
        anchor = anchor_hex(s)
        opp = self.opponent_profile(digests)
        phi = np.zeros((2, self.dim))
        for a, action in enumerate(kuhn.ACTIONS):
            base = a * 24 + info * 2
            phi[a, base] = 1.0 - has_mem
            phi[a, base + 1] = has_mem
            prev, tried = _history_stats(table, anchor, action)
            off = self._A + a * self._B
            phi[a, off:off + self._B] = (prev, tried, opp[0], opp[1], opp[2], opp[3], opp[4])
            off = self._A + 2 * self._B + a * self._C + card * 2
            phi[a, off] = opp[0]
            phi[a, off + 1] = opp[1]
        return phi


def _line_counts(cells, idx, mark):
    """Open lines through ``idx`` holding only ``mark`` pieces, and those with two."""
    open_lines = twos = 0
    for line in ttt.LINES:
        if idx not in line:
            continue
        vals = [cells[i] for i in line if i != idx]
        if all(v in (ttt.EMPTY, mark) for v in vals):
            open_lines += 1
            if sum(v == mark for v in vals) == 2:
                twos += 1
    return open_lines, twos


def _fork_after(cells, idx, mark) -> bool:
    board = list(cells)
    board[idx] = mark
    threats = 0
    for line in ttt.LINES:
        vals = [board[i] for i in line]
        if vals.count(mark) == 2 and vals.count(ttt.EMPTY) == 1:
            threats += 1
    return threats >= 2


class TicTacToeFeaturizer:
    name = "tictactoe-v1"
    _A = 9 * 2
    _T = 9
    _D = 4
    dim = _A + _T + _D

    def candidates(self, ctx) -> list:
        return list(ttt.ALL_CELLS)

    def mask(self, ctx) -> np.ndarray:
        adm = {tuple(a) for a in ctx.admissible}
        return np.array([a in adm for a in ttt.ALL_CELLS])

    def matrix(self, ctx) -> np.ndarray:
        s = ctx.current.structured
        cells = tuple(s["cells"])
        me = s["to_move"]
        opp = ttt.other(me)
        digests = ctx.memory.digests()
        has_mem = 1.0 if digests else 0.0
        table = visit_table(digests)
        anchor = anchor_hex(s)
        advised, warned = set(), set()
        for d in digests:
            b = d.get("blunder")
            if b and b["anchor"] == anchor:
                advised.add(tuple(b["best"]))
                warned.add(tuple(b["played"]))
        phi = np.zeros((9, self.dim))
        for i, action in enumerate(ttt.ALL_CELLS):
            if cells[i] != ttt.EMPTY:
                continue
            phi[i, i * 2] = 1.0 - has_mem
            phi[i, i * 2 + 1] = has_mem
            my_open, my_twos = _line_counts(cells, i, me)
            op_open, op_twos = _line_counts(cells, i, opp)
            t = self._A
            phi[i, t + 0] = 1.0 if my_twos else 0.0
            phi[i, t + 1] = 1.0 if op_twos else 0.0
            phi[i, t + 2] = 1.0 if _fork_after(cells, i, me) else 0.0
            phi[i, t + 3] = 1.0 if _fork_after(cells, i, opp) else 0.0
            phi[i, t + 4] = 1.0 if i == 4 else 0.0
            phi[i, t + 5] = 1.0 if i in (0, 2, 6, 8) else 0.0
            phi[i, t + 6] = 1.0 if i in (1, 3, 5, 7) else 0.0
            phi[i, t + 7] = my_open / 4.0
            phi[i, t + 8] = op_open / 4.0
            prev, tried = _history_stats(table, anchor, action)
            d0 = self._A + self._T
            phi[i, d0:d0 + self._D] = (prev, tried, action in advised, action in warned)
        return phi


def _box_distance(room: sk.SokobanRoom) -> float:
    targets = list(room.targets)
    return float(sum(min(abs(b[0] - t[0]) + abs(b[1] - t[1]) for t in targets) for b in room.boxes))


def _player_gap(room: sk.SokobanRoom) -> float:
    loose = [b for b in room.boxes if b not in room.targets]
    if not loose:
        return 0.0
    p = room.player
    return float(min(abs(b[0] - p[0]) + abs(b[1] - p[1]) for b in loose))


class SokobanFeaturizer:
    name = "sokoban-v1"
    _S = 7
    _F = 4 * 2
    _D = 2
    dim = _S + _F + _D

    def __init__(self, actions_per_turn: int = 3):
        self.actions_per_turn = actions_per_turn
        self._cands = list(itertools.product(sk.MOVES, repeat=actions_per_turn))

    def candidates(self, ctx) -> list:
        return list(self._cands)

    def mask(self, ctx) -> np.ndarray:
        adm = set(ctx.admissible)
        return np.array([all(m in adm for m in c) for c in self._cands])

    def matrix(self, ctx) -> np.ndarray:
        s = ctx.current.structured
        room = sk.room_from_text("\n".join(s["rows"]))
        digests = ctx.memory.digests()
        has_mem = 1.0 if digests else 0.0
        table = visit_table(digests)
        anchor = anchor_hex(s)
        size = float(room.size)
        on0 = len(room.boxes & room.targets)
        dist0 = _box_distance(room)
        gap0 = _player_gap(room)
        phi = np.zeros((len(self._cands), self.dim))
        for i, seq in enumerate(self._cands):
            nxt = sk.apply_moves(room, seq)
            if nxt is None:
                phi[i, 0] = 1.0
            else:
                on1 = len(nxt.boxes & nxt.targets)
                phi[i, 1] = (on1 - on0)
                phi[i, 2] = 1.0 if nxt.solved else 0.0
                phi[i, 3] = 1.0 if sk.is_deadlocked(nxt) else 0.0
                phi[i, 4] = len(nxt.boxes - room.boxes) / self.actions_per_turn
                phi[i, 5] = (dist0 - _box_distance(nxt)) / size
                phi[i, 6] = (gap0 - _player_gap(nxt)) / size
            first = sk.MOVES.index(seq[0])
            phi[i, self._S + first * 2] = 1.0 - has_mem
            phi[i, self._S + first * 2 + 1] = has_mem
            prev, tried = _history_stats(table, anchor, seq)
            phi[i, self._S + self._F] = prev
            phi[i, self._S + self._F + 1] = tried
        return phi


def make_featurizer(kind, actions_per_turn: int = 3):
    kind = EnvKind(kind)
    if kind is EnvKind.KUHN:
        return KuhnFeaturizer()
    if kind is EnvKind.TICTACTOE:
        return TicTacToeFeaturizer()
    return SokobanFeaturizer(actions_per_turn)
