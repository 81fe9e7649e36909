import json
import os
import subprocess
import sys
from functools import lru_cache

import numpy as np
import pytest

from mage.envs import ConfigError, make_env
from mage.envs import kuhn, tictactoe as ttt
from mage.opponents import (
    Archetype,
    CfrStrategyProfile,
    OpponentSpec,
    PopulationConfig,
    best_response,
    cfr_train,
    default_population,
    expected_value,
    exploitability,
    kuhn_archetype_act,
    ARCHETYPES,
    mcts_select,
    minimax_value,
    move_values,
    opponent_act,
    parse_opponent,
    preferred_pattern_act,
    sample_opponent,
)
from mage.opponents.kuhn_bots import archetype_bet_prob


def board(text):
    return ttt.parse_board(text)


# ---------------------------------------------------------------- minimax


@lru_cache(maxsize=None)
def negamax(cells, to_move):
    w = ttt.winner(cells)
    if w != ttt.EMPTY:
        return 1 if w == to_move else -1
    if ttt.is_full(cells):
        return 0
    best = -2
    for i in ttt.empty_cells(cells):
        b = list(cells)
        b[i] = to_move
        best = max(best, -negamax(tuple(b), ttt.other(to_move)))
    return best


def _positions():
    seen, stack = set(), [(ttt.EMPTY,) * 9]
    while stack:
        c = stack.pop()
        if c in seen:
            continue
        seen.add(c)
        if ttt.winner(c) != ttt.EMPTY or ttt.is_full(c):
            continue
        m = ttt.mover(c)
        for i in ttt.empty_cells(c):
            b = list(c)
            b[i] = m
            stack.append(tuple(b))
    return sorted(seen)


def test_minimax_matches_brute_force_on_every_position():
    for cells in _positions():
        to_move = ttt.mover(cells)
        value, move = minimax_value(cells, to_move)
        want = negamax(cells, to_move)
        if ttt.winner(cells) != ttt.EMPTY:
            # decided boards score from the winner's side
            assert value in (-1, 1) and move is None
            continue
        assert value == want
        if not ttt.is_full(cells):
            b = list(cells)
            b[ttt.to_index(move)] = to_move
            assert -negamax(tuple(b), ttt.other(to_move)) == want


def test_minimax_examples():
    assert minimax_value(board(". . .\n. . .\n. . ."), ttt.X)[0] == 0
    assert minimax_value(board("X O .\n. X .\n. . ."), ttt.X)[0] == 1
    assert minimax_value(board("X X X\nO O .\n. . ."), ttt.O)[0] == -1


def test_move_values_agree_with_negamax():
    cells = board("X . .\n. O .\n. . X")
    vals = move_values(cells, ttt.O)
    for (r, c), v in vals.items():
        b = list(cells)
        b[ttt.to_index((r, c))] = ttt.O
        assert v == -negamax(tuple(b), ttt.X)


# ---------------------------------------------------------------- mcts


def test_mcts_completes_its_own_line():
    cells = board("O O .\nX X .\nX . .")
    rng = np.random.default_rng(0)
    assert mcts_select(cells, ttt.O, 1000, rng) == (1, 3)


def test_mcts_blocks_the_threat():
    cells = board("X X .\n. O .\n. . .")
    rng = np.random.default_rng(1)
    assert mcts_select(cells, ttt.O, 1000, rng) == (1, 3)


def test_mcts_single_simulation_is_legal():
    rng = np.random.default_rng(2)
    for _ in range(20):
        r, c = mcts_select((ttt.EMPTY,) * 9, ttt.X, 1, rng)
        assert 1 <= r <= 3 and 1 <= c <= 3


def test_mcts_is_seed_deterministic():
    cells = board("X . .\n. . .\n. . .")
    a = [mcts_select(cells, ttt.O, 200, np.random.default_rng(s)) for s in range(5)]
    b = [mcts_select(cells, ttt.O, 200, np.random.default_rng(s)) for s in range(5)]
    assert a == b


def test_mcts_rejects_terminal_board():
    with pytest.raises(ValueError):
        mcts_select(board("X X X\nO O .\n. . ."), ttt.O, 10, np.random.default_rng(0))


# ---------------------------------------------------------------- pattern / random ttt


def test_pattern_orderings():
    empty = (ttt.EMPTY,) * 9
    assert preferred_pattern_act(0, empty) == (2, 2)
    assert preferred_pattern_act(0, board(". . .\n. X .\n. . .")) == (1, 1)
    assert preferred_pattern_act(1, empty) == (1, 1)


def test_random_ttt_is_uniform_over_empty_cells():
    env = make_env("tictactoe")
    state = env.step(env.reset(), (2, 2)).state
    spec = OpponentSpec(Archetype.RANDOM_TTT)
    rng = np.random.default_rng(5)
    counts = {}
    for _ in range(8000):
        a = opponent_act(spec, env, state, rng)
        counts[a] = counts.get(a, 0) + 1
    assert (2, 2) not in counts and len(counts) == 8
    for c in counts.values():
        assert abs(c / 8000 - 1 / 8) < 0.015


# ---------------------------------------------------------------- kuhn bots


def test_archetype_examples():
    rng = np.random.default_rng(0)
    assert kuhn_archetype_act(ARCHETYPES["conservative"], "JPB", rng) == "PASS"
    assert kuhn_archetype_act(ARCHETYPES["conservative"], "JB", rng) == "PASS"
    assert kuhn_archetype_act(ARCHETYPES["aggressive"], "J", rng) == "BET"
    draws = [kuhn_archetype_act(ARCHETYPES["intermediate"], "Q", rng) for _ in range(100_000)]
    assert abs(draws.count("BET") / 1e5 - 0.5) < 0.01


def test_archetype_table_lookup():
    t = ARCHETYPES["intermediate"]
    assert archetype_bet_prob(t, "J") == 0.25
    assert archetype_bet_prob(t, "QB") == 0.5
    assert archetype_bet_prob(t, "KPB") == 1.0
    assert archetype_bet_prob(t, "QP") == 0.5  # second to act after a check opens like first


# ---------------------------------------------------------------- cfr / best response


def test_cfr_exploitability_shrinks():
    values = [cfr_train(n).exploitability for n in (100, 1000, 10_000)]
    assert values[0] > values[1] > values[2]
    assert values[2] < 1e-2


def test_converged_cfr_calls_with_king():
    # the averaged strategy approaches the pure call from its uniform start
    profile = cfr_train(100_000)
    assert profile.bet_prob("KB") == pytest.approx(1.0, abs=1e-4)
    assert profile.bet_prob("KPB") == pytest.approx(1.0, abs=1e-4)
    assert profile.bet_prob("JB") == pytest.approx(0.0, abs=1e-3)


def test_uniform_profile_is_exploitable():
    uniform = np.full((12, 2), 0.5)
    assert exploitability(uniform) > 0.1


def _always_bet_br_by_hand(seat):
    # a plan is fixed per own card; the opponent always bets whenever it acts
    plans = {0: {"B": "BB", "PP": "PBP", "PB": "PBB"}, 1: {"P": "BP", "B": "BB"}}[seat]
    total = 0.0
    for card in range(3):
        deals = [d for d in kuhn.DEALS if d[seat] == card]
        best = -np.inf
        for history in plans.values():
            u = sum(kuhn.kuhn_payoff(d, history) * (1 if seat == 0 else -1) for d in deals)
            best = max(best, u)
        total += best
    return total / len(kuhn.DEALS)


def test_always_bet_best_response_matches_hand_enumeration():
    always_bet = np.tile([0.0, 1.0], (12, 1))
    v0, _ = best_response(always_bet, 0)
    v1, _ = best_response(always_bet, 1)
    assert v0 == pytest.approx(_always_bet_br_by_hand(0), abs=1e-12)
    assert v1 == pytest.approx(_always_bet_br_by_hand(1), abs=1e-12)
    assert exploitability(always_bet) == pytest.approx((v0 + v1) / 2, abs=1e-12)


def test_profile_text_round_trip():
    p = cfr_train(500)
    q = CfrStrategyProfile.from_text(p.to_text())
    assert np.array_equal(p.probs, q.probs)
    assert q.iterations_trained == 500


def test_expected_value_of_equilibrium():
    assert expected_value(cfr_train(20_000)) == pytest.approx(-1 / 18, abs=3e-3)


# ---------------------------------------------------------------- population


def test_single_entry_population():
    pop = PopulationConfig(((OpponentSpec(Archetype.KUHN_AGGRESSIVE), 1.0),))
    rng = np.random.default_rng(0)
    assert {sample_opponent(pop, rng).id for _ in range(50)} == {"kuhn-aggressive"}


def test_population_sampling_frequencies():
    specs = [OpponentSpec(Archetype.KUHN_CONSERVATIVE), OpponentSpec(Archetype.KUHN_AGGRESSIVE),
             OpponentSpec(Archetype.KUHN_INTERMEDIATE)]
    pop = PopulationConfig(tuple(zip(specs, (0.25, 0.25, 0.5))))
    rng = np.random.default_rng(11)
    draws = [sample_opponent(pop, rng).id for _ in range(100_000)]
    for spec, w in zip(specs, (0.25, 0.25, 0.5)):
        assert abs(draws.count(spec.id) / 1e5 - w) < 0.01


def test_population_validation():
    with pytest.raises(ConfigError):
        PopulationConfig(())
    with pytest.raises(ConfigError):
        PopulationConfig(((OpponentSpec(Archetype.RANDOM_KUHN), 0.5),))
    with pytest.raises(ConfigError):
        OpponentSpec(Archetype.PATTERN, {"ordering_id": 42})
    with pytest.raises(ConfigError):
        parse_opponent("grandmaster")


def test_default_populations():
    ttt_ids = [s.id for s in default_population("tictactoe").specs]
    assert ttt_ids == ["mcts-100", "pattern-0", "pattern-1", "random-ttt"]
    assert [s.id for s in default_population("tictactoe", "fixed").specs] == ["mcts-100"]
    assert len(default_population("kuhn").specs) == 3
    assert [s.id for s in default_population("sokoban").specs] == ["none"]


def test_opponent_ids_round_trip():
    for text in ("mcts-1000", "pattern-0", "kuhn-conservative", "random-ttt", "kuhn-cfr-5000"):
        spec = parse_opponent(text)
        assert spec.id == text
        assert OpponentSpec.from_dict(spec.to_dict()) == spec


# ---------------------------------------------------------------- kernel fallback

_PROBE = """
import json, numpy as np
from mage._jit import NUMBA_OK
from mage.opponents import cfr_train, mcts_select, minimax_value
p = cfr_train(300)
moves = [mcts_select((1,0,0,0,2,0,0,0,0), 1, 150, np.random.default_rng(s)) for s in range(6)]
print(json.dumps({"numba": NUMBA_OK, "cfr": p.probs.tolist(),
                  "mcts": moves, "mm": minimax_value((1,2,0,0,1,0,0,0,0), 1)[0]}))
"""


def _probe(disable: bool) -> dict:
    env = dict(os.environ)
    env["MAGE_DISABLE_NUMBA"] = "1" if disable else "0"
    out = subprocess.run([sys.executable, "-c", _PROBE], env=env, capture_output=True,
                         text=True, check=True, timeout=300)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_pure_python_fallback_matches_compiled_kernels():
    fast, slow = _probe(False), _probe(True)
    assert slow["numba"] is False
    assert fast["mcts"] == slow["mcts"]
    assert fast["mm"] == slow["mm"]
    np.testing.assert_allclose(fast["cfr"], slow["cfr"], rtol=0, atol=1e-12)
