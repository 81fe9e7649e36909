"""Single-hand Kuhn poker: 3-card deck, 1-chip ante, one bet size."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .base import ConfigError, ContractViolation, Observation, Result, StepOutcome

PASS, BET = "PASS", "BET"
ACTIONS = (PASS, BET)
CARDS = ("J", "Q", "K")
TERMINAL_HISTORIES = ("PP", "PBP", "PBB", "BP", "BB")
DECISION_HISTORIES = ("", "P", "B", "PB")
# all 6 ordered deals of two distinct cards
DEALS = tuple((a, b) for a in range(3) for b in range(3) if a != b)

_LETTER = {PASS: "P", BET: "B"}


def is_terminal(history: str) -> bool:
    return history in TERMINAL_HISTORIES


def player_to_act(history: str) -> int:
    return len(history) % 2


def kuhn_payoff(cards, history: str) -> int:
    """Net chips won by player 0 at a terminal history."""
    if history not in TERMINAL_HISTORIES:
        raise ContractViolation(f"history {history!r} is not terminal")
    if history == "BP":
        return 1
    if history == "PBP":
        return -1
    stake = 2 if history.endswith("BB") else 1
    return stake if cards[0] > cards[1] else -stake


def contributions(history: str) -> tuple[int, int]:
    chips = [1, 1]
    for i, a in enumerate(history):
        if a == "B":
            chips[i % 2] += 1
        elif "B" in history[:i]:
            break
    return chips[0], chips[1]


def info_set(card: int, history: str) -> str:
    return CARDS[card] + history


# info sets are card-major within each decision history
INFO_SETS = tuple(info_set(c, h) for h in DECISION_HISTORIES for c in range(3))
INFO_SET_INDEX = {k: i for i, k in enumerate(INFO_SETS)}


def parse_action(action) -> str:
    if action in ACTIONS:
        return action
    if isinstance(action, str) and action.strip().upper() in ACTIONS:
        return action.strip().upper()
    raise ValueError(f"not a Kuhn action: {action!r}")


@dataclass(frozen=True)
class KuhnState:
    cards: tuple[int, int]
    history: str = ""
    agent_seat: int = 0
    turn: int = 0
    invalid_count: int = 0
    max_turns: int = 6
    result: Result = Result.ONGOING

    @property
    def terminal(self) -> bool:
        return self.result is not Result.ONGOING

    @property
    def to_move(self) -> int:
        return player_to_act(self.history)

    @property
    def agent_to_move(self) -> bool:
        return self.to_move == self.agent_seat

    @property
    def pot_contributions(self) -> tuple[int, int]:
        return contributions(self.history)

    def agent_payoff(self) -> int:
        u0 = kuhn_payoff(self.cards, self.history)
        return u0 if self.agent_seat == 0 else -u0


class KuhnEnv:
    kind = "kuhn"

    def __init__(self, max_turns: int = 6, agent_seat: int | None = None):
        if max_turns < 1:
            raise ConfigError("max_turns must be >= 1")
        if agent_seat not in (None, 0, 1):
            raise ConfigError("agent_seat must be 0, 1 or None (random)")
        self.max_turns = max_turns
        self.agent_seat = agent_seat

    def reset(self, seed: int = 0) -> KuhnState:
        rng = np.random.default_rng(seed)
        deal = DEALS[int(rng.integers(len(DEALS)))]
        seat = int(rng.integers(2)) if self.agent_seat is None else self.agent_seat
        return KuhnState(cards=deal, agent_seat=seat, max_turns=self.max_turns)

    def admissible(self, state: KuhnState) -> list[str]:
        if state.terminal:
            raise ContractViolation("no admissible actions in a terminal state")
        return list(ACTIONS)

    def step(self, state: KuhnState, action) -> StepOutcome:
        if state.terminal:
            raise ContractViolation("step() called on a terminal Kuhn state")
        by_agent = state.agent_to_move
        try:
            act = parse_action(action)
        except ValueError:
            if not by_agent:
                raise ContractViolation(f"opponent played illegal action {action!r}") from None
            nxt = replace(state, turn=state.turn + 1, invalid_count=state.invalid_count + 1)
            if nxt.turn >= nxt.max_turns:
                nxt = replace(nxt, result=Result.TIMEOUT)
            return StepOutcome(nxt, self.observe(nxt), nxt.terminal, nxt.result, invalid=True)

        history = state.history + _LETTER[act]
        turn = state.turn + 1 if by_agent else state.turn
        result = Result.ONGOING
        if is_terminal(history):
            u0 = kuhn_payoff(state.cards, history)
            mine = u0 if state.agent_seat == 0 else -u0
            result = Result.WIN if mine > 0 else Result.LOSS
        elif by_agent and turn >= state.max_turns:
            result = Result.TIMEOUT
        nxt = replace(state, history=history, turn=turn, result=result)
        return StepOutcome(nxt, self.observe(nxt), nxt.terminal, result)

    def render(self, state: KuhnState, seat: int | None = None) -> str:
        seat = state.agent_seat if seat is None else seat
        names = {"P": "PASS", "B": "BET"}
        moves = ", ".join(
            f"Player {i % 2}: {names[a]}" for i, a in enumerate(state.history)
        ) or "none"
        lines = [
            f"You are Player {seat}. Your card: {CARDS[state.cards[seat]]}.",
            f"Betting so far: {moves}.",
        ]
        c0, c1 = state.pot_contributions
        lines.append(f"Pot: {c0 + c1} chips (Player 0: {c0}, Player 1: {c1}).")
        if state.terminal and state.result is not Result.TIMEOUT:
            if "BB" in state.history or state.history == "PP":
                lines.append(f"Showdown: opponent held {CARDS[state.cards[1 - seat]]}.")
            lines.append(f"Result: {state.result.value}.")
        return "\n".join(lines)

    def structured(self, state: KuhnState) -> dict:
        seat = state.agent_seat
        return {
            "card": CARDS[state.cards[seat]],
            "history": state.history,
            "seat": seat,
        }

    def observe(self, state: KuhnState) -> Observation:
        adm = () if state.terminal else tuple(ACTIONS)
        return Observation(
            text=self.render(state),
            structured=self.structured(state),
            turn_index=state.turn + 1,
            admissible=adm,
        )

    def prompt_vars(self, state: KuhnState) -> dict:
        return {
            "agent_player_id": state.agent_seat,
            "opponent_player_id": 1 - state.agent_seat,
        }
