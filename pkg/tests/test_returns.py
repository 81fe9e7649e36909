from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mage.envs import Result
from mage.returns import (
    ReturnConfig,
    RewardConfig,
    compose_episode_reward,
    differential_meta_reward,
    length_penalty,
    meta_reward_vector,
    reward_defaults,
    stepwise_returns,
    stepwise_rewards,
    terminal_rewards,
)


def direct_returns(rewards, lengths, gs, gt):
    """G_{n,t} by explicit summation over later episodes, with G_{m,0} := G_{m,1}."""
    N = len(rewards)

    def G(n, t):
        own = gs ** (lengths[n] - t) * rewards[n]
        return own + sum(gt ** (m - n) * G(m, 1) for m in range(n + 1, N))

    return [np.array([G(n, t) for t in range(1, lengths[n] + 1)]) for n in range(N)]


def test_length_penalty_examples():
    assert length_penalty(2048, 4096) == 0.0
    assert length_penalty(4096, 4096) == 1.0
    assert length_penalty(0.75 * 4096, 4096) == 0.5
    assert length_penalty(10_000, 4096) == 1.0


@given(st.floats(0, 10_000), st.floats(0, 10_000))
def test_length_penalty_monotone(a, b):
    lo, hi = sorted((a, b))
    assert length_penalty(lo, 4096) <= length_penalty(hi, 4096)


def test_length_penalty_continuous_at_knots():
    for x in (2048.0, 4096.0):
        assert length_penalty(x - 1e-9, 4096) == pytest.approx(length_penalty(x, 4096), abs=1e-9)


def test_compose_examples():
    cfg = RewardConfig()
    assert compose_episode_reward(Result.WIN, 0, (), cfg) == 10
    assert compose_episode_reward(Result.LOSS, 2, (), cfg) == -11
    assert compose_episode_reward(Result.DRAW, 0, (4096,), cfg) == -2


def test_timeout_is_failure_only_for_sokoban():
    assert compose_episode_reward(Result.TIMEOUT, 0, (), reward_defaults("sokoban")) == -10
    assert compose_episode_reward(Result.TIMEOUT, 0, (), reward_defaults("tictactoe")) == 0


def test_differential_examples():
    assert differential_meta_reward([10]) == [10]
    assert differential_meta_reward([-10, 10, 10]) == [-10, 20, 0]
    with pytest.raises(ValueError):
        differential_meta_reward([])


def test_stepwise_reward_examples():
    assert stepwise_rewards(20, 3) == [0, 0, 20]
    assert stepwise_rewards(0, 1) == [0]
    with pytest.raises(ValueError):
        stepwise_rewards(1.0, 0)


def test_stepwise_return_examples():
    cfg = ReturnConfig(0.95, 0.6)
    g = stepwise_returns([10], [2], cfg)
    assert g[0].tolist() == pytest.approx([9.5, 10.0], abs=1e-12)
    g = stepwise_returns([0, 10], [3, 3], cfg)
    assert g[1][0] == pytest.approx(9.025, abs=1e-12)
    assert g[0].tolist() == pytest.approx([5.415] * 3, abs=1e-12)


def test_zero_gamma_traj_is_single_episode():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 6))
        r = rng.normal(size=n).tolist()
        lens = rng.integers(1, 11, size=n).tolist()
        a = stepwise_returns(r, lens, ReturnConfig(0.9, 0.0))
        b = stepwise_returns(r, lens, ReturnConfig(0.9, 0.6, variant="single_episode"))
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


def test_recursion_matches_direct_summation():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        n = int(rng.integers(1, 6))
        r = rng.normal(scale=10, size=n).tolist()
        lens = rng.integers(1, 11, size=n).tolist()
        gs, gt = float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.0, 1.0))
        got = stepwise_returns(r, lens, ReturnConfig(gs, gt))
        want = direct_returns(r, lens, gs, gt)
        for x, y in zip(got, want):
            np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)


def test_extra_discount_convention():
    cfg = ReturnConfig(0.95, 0.6, episode_start="extra_discount")
    g = stepwise_returns([0, 10], [3, 3], cfg)
    assert g[0][0] == pytest.approx(0.6 * 0.95 ** 3 * 10, abs=1e-12)


def test_telescoping_exact():
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        n = int(rng.integers(1, 8))
        ret = [Fraction(int(v), 4) for v in rng.integers(-80, 81, size=n)]
        assert sum(differential_meta_reward(ret)) == ret[-1]


@given(st.lists(st.integers(-20, 20), min_size=1, max_size=5), st.integers(1, 10))
def test_telescoping_integers(rets, _):
    assert sum(differential_meta_reward(rets)) == rets[-1]


@given(st.lists(st.floats(-20, 20), min_size=2, max_size=5),
       st.lists(st.integers(1, 10), min_size=5, max_size=5),
       st.floats(0.01, 5.0), st.floats(0.05, 1.0))
def test_final_return_raises_every_step_return(rets, lens, bump, gt):
    cfg = ReturnConfig(0.95, gt)
    lens = lens[:len(rets)]
    before = meta_reward_vector(rets, lens, cfg).step_returns
    after = meta_reward_vector(rets[:-1] + [rets[-1] + bump], lens, cfg).step_returns
    for a, b in zip(before, after):
        assert all(y > x for x, y in zip(a, b))


def test_variants_place_rewards():
    assert terminal_rewards([1, 4, 2], "differential") == [1, 3, -2]
    assert terminal_rewards([1, 4, 2], "cumulative") == [1, 4, 2]
    vec = meta_reward_vector([1, 4, 2], [1, 1, 1], ReturnConfig(1.0, 0.5, variant="single_episode"))
    assert [g[0] for g in vec.step_returns] == [1, 4, 2]


def test_config_validation():
    with pytest.raises(ValueError):
        ReturnConfig(gamma_step=0.0)
    with pytest.raises(ValueError):
        ReturnConfig(variant="bogus")
    with pytest.raises(ValueError):
        RewardConfig(invalid_penalty=-1)
