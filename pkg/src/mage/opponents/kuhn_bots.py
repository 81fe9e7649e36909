"""Fixed-strategy Kuhn opponents.

Each archetype is a table of BET probabilities per information set.  The
numbers for the three named archetypes are modelling choices and can be
overridden through ``OpponentSpec.params``.
"""

from __future__ import annotations

import numpy as np

from ..envs.kuhn import BET, PASS

# (first-to-act bet probs by card J,Q,K), (facing-a-bet call probs by card)
ARCHETYPES = {
    "conservative": ((0.0, 0.0, 1.0), (0.0, 0.0, 1.0)),
    "aggressive": ((1.0, 1.0, 1.0), (1.0, 1.0, 1.0)),
    "intermediate": ((0.25, 0.5, 1.0), (0.0, 0.5, 1.0)),
    "random": ((0.5, 0.5, 0.5), (0.5, 0.5, 0.5)),
}

_CARD = {"J": 0, "Q": 1, "K": 2}


def archetype_bet_prob(table, info_set: str) -> float:
    """BET probability of an archetype table at an info set like ``"QPB"``."""
    card, history = _CARD[info_set[0]], info_set[1:]
    opening, calling = table
    facing_bet = history.endswith("B")
    return float(calling[card] if facing_bet else opening[card])


def kuhn_archetype_act(table, info_set: str, rng: np.random.Generator) -> str:
    p = archetype_bet_prob(table, info_set)
    if p <= 0.0:
        return PASS
    if p >= 1.0:
        return BET
    return BET if rng.random() < p else PASS
