"""Vanilla CFR for Kuhn poker plus exact best-response evaluation.

Information sets are indexed ``history_id * 3 + card`` with histories
``("", "P", "B", "PB")`` and cards J=0, Q=1, K=2, matching
``mage.envs.kuhn.INFO_SETS``.  Column 0 is PASS, column 1 is BET.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .._jit import njit
from ..envs.kuhn import (
    DEALS,
    INFO_SET_INDEX,
    INFO_SETS,
    is_terminal,
    kuhn_payoff,
    player_to_act,
)

NUM_INFO_SETS = 12


@njit
def _regret_matching(regret, out):
    for i in range(regret.shape[0]):
        a = max(regret[i, 0], 0.0)
        b = max(regret[i, 1], 0.0)
        s = a + b
        if s > 0.0:
            out[i, 0] = a / s
            out[i, 1] = b / s
        else:
            out[i, 0] = 0.5
            out[i, 1] = 0.5


@njit
def _cfr_iterations(regret, strategy_sum, iterations):
    """Simultaneous-update vanilla CFR sweeps over all six deals, in place."""
    sigma = np.empty((12, 2))
    chance = 1.0 / 6.0
    for _ in range(iterations):
        _regret_matching(regret, sigma)
        for c0 in range(3):
            for c1 in range(3):
                if c0 == c1:
                    continue
                sd = 1.0 if c0 > c1 else -1.0
                i_root = c0
                i_p = 3 + c1
                i_b = 6 + c1
                i_pb = 9 + c0
                u_pp = sd
                u_pbp = -1.0
                u_pbb = 2.0 * sd
                u_bp = 1.0
                u_bb = 2.0 * sd

                s0 = sigma[i_pb, 0]
                s1 = sigma[i_pb, 1]
                v_pb = s0 * u_pbp + s1 * u_pbb
                t0 = sigma[i_p, 0]
                t1 = sigma[i_p, 1]
                v_p = t0 * u_pp + t1 * v_pb
                w0 = sigma[i_b, 0]
                w1 = sigma[i_b, 1]
                v_b = w0 * u_bp + w1 * u_bb
                r0 = sigma[i_root, 0]
                r1 = sigma[i_root, 1]
                v = r0 * v_p + r1 * v_b

                # player 0 regrets (player 0 utilities)
                regret[i_root, 0] += chance * (v_p - v)
                regret[i_root, 1] += chance * (v_b - v)
                regret[i_pb, 0] += chance * t1 * (u_pbp - v_pb)
                regret[i_pb, 1] += chance * t1 * (u_pbb - v_pb)
                # player 1 regrets (negated utilities)
                regret[i_p, 0] += chance * r0 * (v_p - u_pp)
                regret[i_p, 1] += chance * r0 * (v_p - v_pb)
                regret[i_b, 0] += chance * r1 * (v_b - u_bp)
                regret[i_b, 1] += chance * r1 * (v_b - u_bb)

                strategy_sum[i_root, 0] += chance * r0
                strategy_sum[i_root, 1] += chance * r1
                strategy_sum[i_pb, 0] += chance * r0 * s0
                strategy_sum[i_pb, 1] += chance * r0 * s1
                strategy_sum[i_p, 0] += chance * t0
                strategy_sum[i_p, 1] += chance * t1
                strategy_sum[i_b, 0] += chance * w0
                strategy_sum[i_b, 1] += chance * w1


def _average(strategy_sum: np.ndarray) -> np.ndarray:
    totals = strategy_sum.sum(axis=1, keepdims=True)
    avg = np.full_like(strategy_sum, 0.5)
    np.divide(strategy_sum, totals, out=avg, where=totals > 0)
    return avg


@dataclass(frozen=True)
class CfrStrategyProfile:
    """Behaviour strategy for both seats: ``probs[i] = (p(PASS), p(BET))``."""

    probs: np.ndarray
    iterations_trained: int = 0
    exploitability: float = float("nan")

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (NUM_INFO_SETS, 2):
            raise ValueError(f"profile must have shape (12, 2), got {probs.shape}")
        if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-9) or (probs < 0).any():
            raise ValueError("every information set needs a probability distribution")
        object.__setattr__(self, "probs", probs)

    def bet_prob(self, info_set: str) -> float:
        return float(self.probs[INFO_SET_INDEX[info_set], 1])

    def to_text(self) -> str:
        lines = [f"# kuhn cfr profile iterations={self.iterations_trained} "
                 f"exploitability={float(self.exploitability)!r}"]
        for name, (p, b) in zip(INFO_SETS, self.probs):
            lines.append(f"{name:<4} {float(p)!r} {float(b)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CfrStrategyProfile":
        probs = np.zeros((NUM_INFO_SETS, 2))
        meta = {}
        seen = set()
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            name, p, b = line.split()
            probs[INFO_SET_INDEX[name]] = (float(p), float(b))
            seen.add(name)
        if len(seen) != NUM_INFO_SETS:
            raise ValueError("profile text must list all 12 information sets")
        return cls(probs, int(meta.get("iterations", 0)),
                   float(meta.get("exploitability", "nan")))


class CfrSolver:
    """Stateful wrapper so training can be resumed and checkpointed."""

    def __init__(self):
        self.regret = np.zeros((NUM_INFO_SETS, 2))
        self.strategy_sum = np.zeros((NUM_INFO_SETS, 2))
        self.iterations = 0

    def run(self, iterations: int) -> "CfrSolver":
        if iterations < 1:
            raise ValueError("iterations must be >= 1")
        _cfr_iterations(self.regret, self.strategy_sum, int(iterations))
        self.iterations += int(iterations)
        return self

    def average_strategy(self) -> np.ndarray:
        return _average(self.strategy_sum)

    def profile(self) -> CfrStrategyProfile:
        avg = self.average_strategy()
        return CfrStrategyProfile(avg, self.iterations, exploitability(avg))


def cfr_train(iterations: int) -> CfrStrategyProfile:
    return CfrSolver().run(iterations).profile()


@lru_cache(maxsize=8)
def cached_profile(iterations: int) -> CfrStrategyProfile:
    return cfr_train(iterations)


# ---------------------------------------------------------------------------
# exact tree evaluation (plain Python, independent of the CFR kernel)

Policy = Callable[[str], float]  # info set -> probability of BET


def _as_policy(profile) -> Policy:
    if callable(profile):
        return profile
    probs = np.asarray(getattr(profile, "probs", profile), dtype=np.float64)
    return lambda key: float(probs[INFO_SET_INDEX[key], 1])


def expected_value(profile_p0, profile_p1=None) -> float:
    """Expected chips for player 0 when both seats follow the given policies."""
    pol = (_as_policy(profile_p0), _as_policy(profile_p1 if profile_p1 is not None else profile_p0))

    def walk(cards, history):
        if is_terminal(history):
            return kuhn_payoff(cards, history)
        p = player_to_act(history)
        bet = pol[p]("JQK"[cards[p]] + history)
        return (1 - bet) * walk(cards, history + "P") + bet * walk(cards, history + "B")

    return sum(walk(d, "") for d in DEALS) / len(DEALS)


def best_response(opponent, br_seat: int, utility: Callable | None = None):
    """Exact best response of ``br_seat`` against a fixed opponent policy.

    ``utility(cards, history, seat)`` scores terminal histories for the
    responder; the default is net chips.  Returns ``(value, bet_probs)`` where
    ``bet_probs`` maps each responder info set to 0.0 or 1.0.  Ties prefer PASS.
    """
    opp = _as_policy(opponent)
    if utility is None:
        def utility(cards, history, seat):
            u0 = kuhn_payoff(cards, history)
            return u0 if seat == 0 else -u0

    choice: dict[str, float] = {}

    def walk(cards, history):
        # value for the responder at this node given fixed deeper choices
        if is_terminal(history):
            return utility(cards, history, br_seat)
        p = player_to_act(history)
        key = "JQK"[cards[p]] + history
        if p == br_seat:
            bet = choice[key]
        else:
            bet = opp(key)
        out = 0.0
        if bet < 1.0:
            out += (1 - bet) * walk(cards, history + "P")
        if bet > 0.0:
            out += bet * walk(cards, history + "B")
        return out

    def reach(cards, history):
        # opponent-and-chance reach of a responder decision node
        prob = 1.0
        for i, a in enumerate(history):
            p = i % 2
            if p == br_seat:
                continue
            bet = opp("JQK"[cards[p]] + history[:i])
            prob *= bet if a == "B" else 1 - bet
        return prob

    my_histories = [h for h in ("PB", "B", "P", "") if player_to_act(h) == br_seat]
    for history in my_histories:  # deepest first
        for card in range(3):
            key = "JQK"[card] + history
            totals = [0.0, 0.0]
            for cards in DEALS:
                if cards[br_seat] != card:
                    continue
                w = reach(cards, history)
                if w == 0.0:
                    continue
                for j, a in enumerate("PB"):
                    totals[j] += w * walk(cards, history + a)
            choice[key] = 1.0 if totals[1] > totals[0] + 1e-15 else 0.0
    value = sum(walk(d, "") for d in DEALS) / len(DEALS)
    return value, choice


def exploitability(profile) -> float:
    """Mean best-response gain against ``profile`` over both seats (chips/hand)."""
    v0, _ = best_response(profile, 0)
    v1, _ = best_response(profile, 1)
    return (v0 + v1) / 2.0
