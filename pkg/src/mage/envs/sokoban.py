"""Sokoban rooms: reverse-play generation, push-optimal BFS solver, text I/O."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .base import (
    ConfigError,
    ContractViolation,
    GenerationExhausted,
    Observation,
    Result,
    StepOutcome,
)

WALL, FLOOR, TARGET, BOX, PLAYER, BOX_ON_TARGET, PLAYER_ON_TARGET = (
    "#", "_", "O", "X", "P", "√", "S",
)
SYMBOLS = (WALL, FLOOR, TARGET, BOX, PLAYER, BOX_ON_TARGET, PLAYER_ON_TARGET)

DIRECTIONS = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}
MOVES = tuple(DIRECTIONS)

Cell = tuple[int, int]


def _add(p: Cell, d: Cell) -> Cell:
    return (p[0] + d[0], p[1] + d[1])


def _sub(p: Cell, d: Cell) -> Cell:
    return (p[0] - d[0], p[1] - d[1])


@dataclass(frozen=True)
class SokobanRoom:
    size: int
    walls: frozenset
    targets: frozenset
    boxes: frozenset
    player: Cell
    steps_taken: int = 0

    @property
    def num_boxes(self) -> int:
        return len(self.boxes)

    @property
    def solved(self) -> bool:
        return self.boxes == self.targets

    def free(self, cell: Cell) -> bool:
        return cell not in self.walls and cell not in self.boxes

    def rows(self) -> list[str]:
        out = []
        for r in range(self.size):
            row = []
            for c in range(self.size):
                p = (r, c)
                if p in self.walls:
                    row.append(WALL)
                elif p in self.boxes:
                    row.append(BOX_ON_TARGET if p in self.targets else BOX)
                elif p == self.player:
                    row.append(PLAYER_ON_TARGET if p in self.targets else PLAYER)
                elif p in self.targets:
                    row.append(TARGET)
                else:
                    row.append(FLOOR)
            out.append("".join(row))
        return out

    def to_text(self) -> str:
        return "\n".join(self.rows())


def room_from_text(text: str) -> SokobanRoom:
    lines = [ln for ln in text.strip("\n").splitlines() if ln.strip()]
    size = len(lines)
    if size < 3 or any(len(ln) != size for ln in lines):
        raise ConfigError("Sokoban text must be a square grid, one row per line")
    walls, targets, boxes, players = set(), set(), set(), []
    for r, ln in enumerate(lines):
        for c, ch in enumerate(ln):
            p = (r, c)
            if ch == WALL:
                walls.add(p)
            elif ch == TARGET:
                targets.add(p)
            elif ch == BOX:
                boxes.add(p)
            elif ch == BOX_ON_TARGET:
                boxes.add(p)
                targets.add(p)
            elif ch == PLAYER:
                players.append(p)
            elif ch == PLAYER_ON_TARGET:
                players.append(p)
                targets.add(p)
            elif ch != FLOOR:
                raise ConfigError(f"unknown Sokoban symbol {ch!r}")
    if len(players) != 1:
        raise ConfigError(f"expected exactly one player, found {len(players)}")
    if len(boxes) != len(targets) or not boxes:
        raise ConfigError("boxes and targets must be balanced and non-empty")
    return SokobanRoom(size, frozenset(walls), frozenset(targets), frozenset(boxes), players[0])


def is_deadlocked(room: SokobanRoom) -> bool:
    """Cheap, sound deadlock test: dead corners and frozen 2x2 blocks."""
    walls, boxes, targets = room.walls, room.boxes, room.targets
    for b in boxes:
        if b in targets:
            continue
        r, c = b
        vert = (r - 1, c) in walls or (r + 1, c) in walls
        horiz = (r, c - 1) in walls or (r, c + 1) in walls
        if vert and horiz:
            return True
    blocked = walls | boxes
    for b in boxes:
        r, c = b
        for dr in (-1, 0):
            for dc in (-1, 0):
                block = [(r + dr + i, c + dc + j) for i in (0, 1) for j in (0, 1)]
                if all(p in blocked for p in block) and any(
                    p in boxes and p not in targets for p in block
                ):
                    return True
    return False


def _reachable(walls, boxes, start: Cell) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        for d in DIRECTIONS.values():
            q = _add(p, d)
            if q not in seen and q not in walls and q not in boxes:
                seen.add(q)
                queue.append(q)
    return seen


def solve(room: SokobanRoom, max_pushes: int = 21) -> list | None:
    """Push-optimal BFS. Returns the list of pushes (box, direction) or None."""
    start_reach = _reachable(room.walls, room.boxes, room.player)
    start = (room.boxes, min(start_reach))
    if room.boxes == room.targets:
        return []
    parent = {start: None}
    frontier = [(room.boxes, start_reach, start)]
    for _depth in range(max_pushes):
        nxt_frontier = []
        for boxes, reach, key in frontier:
            for b in sorted(boxes):
                for name, d in DIRECTIONS.items():
                    if _sub(b, d) not in reach:
                        continue
                    dest = _add(b, d)
                    if dest in room.walls or dest in boxes:
                        continue
                    nb = (boxes - {b}) | {dest}
                    probe = replace(room, boxes=nb, player=b)
                    if dest not in room.targets and is_deadlocked(probe):
                        continue
                    nreach = _reachable(room.walls, nb, b)
                    nkey = (nb, min(nreach))
                    if nkey in parent:
                        continue
                    parent[nkey] = (key, (b, name))
                    if nb == room.targets:
                        path = []
                        k = nkey
                        while parent[k] is not None:
                            k, push = parent[k]
                            path.append(push)
                        return path[::-1]
                    nxt_frontier.append((nb, nreach, nkey))
        if not nxt_frontier:
            return None
        frontier = nxt_frontier
    return None


def _carve_topology(size: int, rng: np.random.Generator, min_floor: int) -> set:
    interior = [(r, c) for r in range(1, size - 1) for c in range(1, size - 1)]
    p = interior[int(rng.integers(len(interior)))]
    floor = {p}
    dirs = list(DIRECTIONS.values())
    d = dirs[int(rng.integers(4))]
    guard = 0
    while len(floor) < min_floor and guard < 10_000:
        guard += 1
        if rng.random() < 0.35:
            d = dirs[int(rng.integers(4))]
        q = _add(p, d)
        if 1 <= q[0] <= size - 2 and 1 <= q[1] <= size - 2:
            p = q
            floor.add(p)
    return floor


def _reverse_play(room: SokobanRoom, depth: int, rng: np.random.Generator):
    boxes = set(room.boxes)
    player = room.player
    best = None
    best_score = (0, 0)
    pulls = 0
    dirs = list(DIRECTIONS.values())
    for _ in range(depth):
        d = dirs[int(rng.integers(4))]
        dest = _add(player, d)
        if dest in room.walls or dest in boxes:
            continue
        behind = _sub(player, d)
        if behind in boxes and rng.random() < 0.75:
            boxes.remove(behind)
            boxes.add(player)
            pulls += 1
        player = dest
        off = sum(1 for b in boxes if b not in room.targets)
        if off == len(boxes) and (off, pulls) > best_score:
            best_score = (off, pulls)
            best = (frozenset(boxes), player)
    return best


def generate_room(
    size: int = 6,
    num_boxes: int = 2,
    search_depth: int = 100,
    max_solution_steps: int = 21,
    seed: int = 0,
    max_attempts: int = 500,
) -> SokobanRoom:
    """Reverse-play room generator; every emitted room is solver-certified."""
    interior_area = (size - 2) ** 2
    if size < 4:
        raise ConfigError("Sokoban size must be >= 4")
    if not 1 <= num_boxes <= interior_area // 4:
        raise ConfigError(f"num_boxes must be in [1, {interior_area // 4}] for size {size}")
    if max_solution_steps < num_boxes:
        raise ConfigError("max_solution_steps must be >= num_boxes")
    rng = np.random.default_rng(seed)
    all_cells = {(r, c) for r in range(size) for c in range(size)}
    min_floor = max(num_boxes * 3 + 2, int(0.6 * interior_area))
    for _ in range(max_attempts):
        floor = _carve_topology(size, rng, min_floor)
        cells = sorted(floor)
        picks = rng.choice(len(cells), size=num_boxes + 1, replace=False)
        targets = frozenset(cells[i] for i in picks[:num_boxes])
        player = cells[picks[-1]]
        solved = SokobanRoom(size, frozenset(all_cells - floor), targets, targets, player)
        found = _reverse_play(solved, search_depth, rng)
        if found is None:
            continue
        room = replace(solved, boxes=found[0], player=found[1])
        if is_deadlocked(room):
            continue
        plan = solve(room, max_pushes=max_solution_steps)
        if plan:
            return room
    raise GenerationExhausted(
        f"no solvable {size}x{size} room with {num_boxes} boxes after {max_attempts} attempts"
    )


def apply_moves(room: SokobanRoom, moves) -> SokobanRoom | None:
    """Play moves in order; None if any move is blocked."""
    boxes = set(room.boxes)
    player = room.player
    for m in moves:
        d = DIRECTIONS[m]
        dest = _add(player, d)
        if dest in room.walls:
            return None
        if dest in boxes:
            beyond = _add(dest, d)
            if beyond in room.walls or beyond in boxes:
                return None
            boxes.remove(dest)
            boxes.add(beyond)
        player = dest
    return replace(room, boxes=frozenset(boxes), player=player,
                   steps_taken=room.steps_taken + len(moves))


def normalize_action(action, limit: int):
    if isinstance(action, str):
        action = (action,)
    try:
        moves = tuple(str(m).strip().lower() for m in action)
    except TypeError:
        return None
    if not 1 <= len(moves) <= limit or any(m not in DIRECTIONS for m in moves):
        return None
    return moves


@dataclass(frozen=True)
class SokobanState:
    room: SokobanRoom
    turn: int = 0
    invalid_count: int = 0
    max_turns: int = 7
    result: Result = Result.ONGOING
    actions_per_turn: int = 3
    history: tuple = field(default=(), compare=False)

    @property
    def terminal(self) -> bool:
        return self.result is not Result.ONGOING

    agent_to_move = True


class SokobanEnv:
    kind = "sokoban"

    def __init__(
        self,
        size: int = 6,
        num_boxes: int = 2,
        search_depth: int = 100,
        max_solution_steps: int = 21,
        max_turns: int = 7,
        actions_per_turn: int = 3,
        deadlock_is_loss: bool = True,
    ):
        if size < 4:
            raise ConfigError("Sokoban size must be >= 4")
        if not 1 <= num_boxes <= (size - 2) ** 2 // 4:
            raise ConfigError(f"num_boxes={num_boxes} out of range for size {size}")
        if max_solution_steps < num_boxes:
            raise ConfigError("max_solution_steps must be >= num_boxes")
        if max_turns < 1 or actions_per_turn < 1:
            raise ConfigError("max_turns and actions_per_turn must be >= 1")
        self.size = size
        self.num_boxes = num_boxes
        self.search_depth = search_depth
        self.max_solution_steps = max_solution_steps
        self.max_turns = max_turns
        self.actions_per_turn = actions_per_turn
        self.deadlock_is_loss = deadlock_is_loss

    def reset(self, seed: int = 0) -> SokobanState:
        room = generate_room(
            self.size, self.num_boxes, self.search_depth, self.max_solution_steps, seed
        )
        return self.from_room(room)

    def from_room(self, room: SokobanRoom) -> SokobanState:
        return SokobanState(room, max_turns=self.max_turns, actions_per_turn=self.actions_per_turn)

    def admissible(self, state: SokobanState) -> list[str]:
        if state.terminal:
            raise ContractViolation("no admissible actions in a terminal state")
        return list(MOVES)

    def step(self, state: SokobanState, action) -> StepOutcome:
        if state.terminal:
            raise ContractViolation("step() called on a terminal Sokoban state")
        moves = normalize_action(action, state.actions_per_turn)
        room = apply_moves(state.room, moves) if moves is not None else None
        turn = state.turn + 1
        if room is None:
            result = Result.TIMEOUT if turn >= state.max_turns else Result.ONGOING
            nxt = replace(state, turn=turn, invalid_count=state.invalid_count + 1, result=result)
            return StepOutcome(nxt, self.observe(nxt), nxt.terminal, result, invalid=True)
        if room.solved:
            result = Result.WIN
        elif self.deadlock_is_loss and is_deadlocked(room):
            result = Result.LOSS
        elif turn >= state.max_turns:
            result = Result.TIMEOUT
        else:
            result = Result.ONGOING
        nxt = replace(state, room=room, turn=turn, result=result,
                      history=state.history + (moves,))
        return StepOutcome(nxt, self.observe(nxt), nxt.terminal, result)

    def render(self, state: SokobanState) -> str:
        return state.room.to_text()

    def structured(self, state: SokobanState) -> dict:
        return {"rows": state.room.rows()}

    def observe(self, state: SokobanState) -> Observation:
        adm = () if state.terminal else tuple(MOVES)
        return Observation(
            text=self.render(state),
            structured=self.structured(state),
            turn_index=state.turn + 1,
            admissible=adm,
        )

    def prompt_vars(self, state: SokobanState) -> dict:
        return {"num_actions_per_turn": state.actions_per_turn}
