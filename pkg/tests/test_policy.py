import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mage.envs import Result, make_env
from mage.envs import tictactoe as ttt
from mage.policy import (
    LinearSoftmaxPolicy,
    NumericalError,
    PolicyParams,
    apply_update,
    masked_log_softmax,
)
from mage.policy.features import KuhnFeaturizer
from mage.policy.linear import grad_from_cache, sample_index
from mage.rollout import (
    ContextMemory,
    EpisodeTrajectory,
    StepRecord,
    append_memory,
    build_context,
    generate_reflection,
    task_description,
)

from helpers import collect_contexts, random_theta

KINDS = ["kuhn", "tictactoe", "sokoban"]


@pytest.fixture(scope="module", params=KINDS)
def kind_contexts(request):
    return request.param, collect_contexts(request.param, 100, seed=KINDS.index(request.param))


def test_zero_theta_is_uniform(kind_contexts):
    kind, contexts = kind_contexts
    pol = LinearSoftmaxPolicy.zeros(kind)
    for ctx in contexts[:20]:
        cands, _, probs, logp = pol.distribution(ctx)
        mask = pol.featurizer.mask(ctx)
        k = int(mask.sum())
        np.testing.assert_allclose(probs[mask], 1.0 / k, atol=1e-12)
        d = pol.act(ctx, np.random.default_rng(0))
        assert d.log_prob == pytest.approx(-np.log(k), abs=1e-12)


def test_masking_soundness(kind_contexts):
    kind, contexts = kind_contexts
    base = LinearSoftmaxPolicy.zeros(kind)
    rng = np.random.default_rng(1)
    for ctx in contexts:
        pol = base.with_params(random_theta(base, rng, scale=3.0))
        _, _, probs, _ = pol.distribution(ctx)
        mask = pol.featurizer.mask(ctx)
        assert abs(probs[mask].sum() - 1.0) <= 1e-12
        assert np.all(probs[~mask] == 0.0)


def test_gradient_matches_central_differences(kind_contexts):
    kind, contexts = kind_contexts
    base = LinearSoftmaxPolicy.zeros(kind)
    rng = np.random.default_rng(2)
    h = 1e-5
    worst = 0.0
    for ctx in contexts:
        theta = random_theta(base, rng).theta
        pol = base.with_params(PolicyParams(theta, base.params.feature_dim, kind,
                                            base.params.featurizer))
        cands, mask, phi = pol.featurize(ctx)
        valid = np.flatnonzero(mask)
        i = int(valid[rng.integers(len(valid))])
        g = pol.logprob_grad(ctx, cands[i])
        fd = np.zeros_like(theta)
        for j in range(theta.size):
            e = np.zeros_like(theta)
            e[j] = h
            up = masked_log_softmax(phi @ (theta + e), mask)[i]
            dn = masked_log_softmax(phi @ (theta - e), mask)[i]
            fd[j] = (up - dn) / (2 * h)
        denom = max(np.linalg.norm(g) + np.linalg.norm(fd), 1e-12)
        rel = np.linalg.norm(g - fd) / denom
        if np.linalg.norm(g) + np.linalg.norm(fd) < 1e-9:
            rel = 0.0
        worst = max(worst, rel)
    assert worst < 1e-5


def test_logprob_uses_the_same_features(kind_contexts):
    kind, contexts = kind_contexts
    base = LinearSoftmaxPolicy.zeros(kind)
    rng = np.random.default_rng(3)
    for ctx in contexts[:10]:
        pol = base.with_params(random_theta(base, rng))
        d = pol.act(ctx, rng)
        assert pol.log_prob(ctx, d.action) == pytest.approx(d.log_prob, abs=1e-12)
        np.testing.assert_allclose(pol.logprob_grad(ctx, d.action), grad_from_cache(*d.cache),
                                   atol=1e-12)


def test_update_direction(kind_contexts):
    kind, contexts = kind_contexts
    base = LinearSoftmaxPolicy.zeros(kind)
    rng = np.random.default_rng(4)
    for ctx in contexts[:30]:
        pol = base.with_params(random_theta(base, rng))
        cands, mask, _ = pol.featurize(ctx)
        if mask.sum() < 2:
            continue
        a = pol.act(ctx, rng).action
        before = pol.log_prob(ctx, a)
        g = pol.logprob_grad(ctx, a)
        for sign in (1.0, -1.0):
            after = pol.with_params(apply_update(pol.params, sign * g, 0.05)).log_prob(ctx, a)
            assert (after - before) * sign > 0


def test_featurize_deterministic_and_empty_digest_block(kind_contexts):
    kind, contexts = kind_contexts
    pol = LinearSoftmaxPolicy.zeros(kind)
    for ctx in contexts:
        a = pol.featurize(ctx)[2]
        b = pol.featurize(ctx)[2]
        assert np.array_equal(a, b)
        if len(ctx.memory) == 1:  # first episode: only the empty reflection
            if kind == "kuhn":
                f = pol.featurizer
                assert not a[:, f._A:].any()
            elif kind == "tictactoe":
                f = pol.featurizer
                assert not a[:, f._A + f._T:].any()
            else:
                f = pol.featurizer
                assert not a[:, f._S + f._F:].any()


def _ttt_ctx(cells):
    env = make_env("tictactoe")
    state = ttt.TicTacToeState(cells=tuple(cells), to_move=ttt.mover(cells), agent_mark=ttt.mover(cells))
    obs = env.observe(state)
    return build_context("tictactoe", task_description("tictactoe"), ContextMemory(), [obs],
                         obs.admissible, episode_index=1)


def test_one_admissible_action():
    ctx = _ttt_ctx((1, 2, 1, 1, 2, 2, 2, 1, 0))
    pol = LinearSoftmaxPolicy.zeros("tictactoe")
    pol = pol.with_params(random_theta(pol, np.random.default_rng(0)))
    d = pol.act(ctx, np.random.default_rng(0))
    assert d.action == (3, 3) and d.log_prob == 0.0
    assert not pol.logprob_grad(ctx, (3, 3)).any()


def test_two_action_gradient_at_zero():
    ctx = _ttt_ctx((1, 2, 1, 1, 2, 2, 0, 1, 0))
    pol = LinearSoftmaxPolicy.zeros("tictactoe")
    cands, _, phi = pol.featurize(ctx)
    a, b = cands.index((3, 1)), cands.index((3, 3))
    np.testing.assert_allclose(pol.logprob_grad(ctx, (3, 1)), phi[a] - 0.5 * (phi[a] + phi[b]),
                               atol=1e-15)


def test_losing_action_gets_negative_digest_feature():
    env = make_env("kuhn", agent_seat=0)
    seed = next(s for s in range(100) if env.reset(s).cards == (0, 2))  # J vs K
    state = env.reset(seed)
    obs = env.observe(state)
    state = env.step(state, "BET").state
    state = env.step(state, "BET").state  # opponent calls with the king
    assert state.result is Result.LOSS
    ep = EpisodeTrajectory(1, (StepRecord(obs, "BET"),), state.result, 0, env.observe(state))
    memory = append_memory(ContextMemory(), generate_reflection(ep, "kuhn"))
    ctx = build_context("kuhn", "", memory, [obs], obs.admissible, episode_index=2)
    f = KuhnFeaturizer()
    phi = f.matrix(ctx)
    bet = 1
    assert phi[bet, f._A + bet * f._B] < 0   # how BET fared here before
    assert phi[0, f._A] == 0                 # PASS was never tried


def test_apply_update_contract():
    pol = LinearSoftmaxPolicy.zeros("kuhn")
    p = random_theta(pol, np.random.default_rng(5))
    g = np.random.default_rng(6).normal(size=p.feature_dim)
    assert np.array_equal(apply_update(p, g, 0.0).theta, p.theta)
    assert np.array_equal(apply_update(p, np.zeros_like(g), 1.0).theta, p.theta)
    new = apply_update(p, g, 0.1)
    np.testing.assert_allclose(new.theta, p.theta + 0.1 * g)
    with pytest.raises(ValueError):
        apply_update(p, g[:-1], 0.1)
    g[3] = np.nan
    with pytest.raises(NumericalError):
        apply_update(p, g, 0.1)
    with pytest.raises(ValueError):
        p.theta[0] = 1.0  # parameters are immutable


def test_checkpoint_round_trip(tmp_path):
    for kind in KINDS:
        pol = LinearSoftmaxPolicy.zeros(kind)
        p = random_theta(pol, np.random.default_rng(7))
        path = tmp_path / f"{kind}.txt"
        p.save(path)
        q = PolicyParams.load(path)
        assert np.array_equal(p.theta, q.theta)
        assert (q.env_kind, q.feature_dim, q.featurizer) == (p.env_kind, p.feature_dim, p.featurizer)
        assert path.read_text() == q.to_text()
    with pytest.raises(ValueError):
        PolicyParams.from_text("garbage")


@given(st.lists(st.floats(-30, 30), min_size=2, max_size=12), st.data())
def test_masked_softmax_properties(logits, data):
    z = np.array(logits)
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=len(z), max_size=len(z))))
    if not mask.any():
        with pytest.raises(ValueError):
            masked_log_softmax(z, mask)
        return
    p = np.exp(masked_log_softmax(z, mask))
    assert abs(p.sum() - 1) < 1e-12 and np.all(p[~mask] == 0)
    u = data.draw(st.floats(0, 1, exclude_max=True))
    assert mask[sample_index(p, u)]
