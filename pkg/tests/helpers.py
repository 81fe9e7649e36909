"""Shared builders for tests: recorded contexts from real rollouts."""

import numpy as np

from mage.envs import make_env
from mage.opponents import OpponentSpec, parse_opponent
from mage.policy import LinearSoftmaxPolicy
from mage.rollout import no_opponent, run_meta_episode


class Recorder:
    """Wraps a policy and keeps every context it is asked about."""

    def __init__(self, policy):
        self.policy = policy
        self.contexts = []

    def act(self, ctx, rng):
        self.contexts.append(ctx)
        return self.policy.act(ctx, rng)


OPPONENTS = {"kuhn": "kuhn-intermediate", "tictactoe": "random-ttt", "sokoban": None}


def random_theta(policy, rng, scale=0.5):
    from mage.policy import PolicyParams

    p = policy.params
    return PolicyParams(rng.normal(scale=scale, size=p.feature_dim), p.feature_dim,
                        p.env_kind, p.featurizer)


def collect_contexts(kind, count, seed=0, env_params=None):
    rng = np.random.default_rng(seed)
    env = make_env(kind, **(env_params or {}))
    opp = no_opponent() if OPPONENTS[kind] is None else parse_opponent(OPPONENTS[kind])
    base = LinearSoftmaxPolicy.zeros(kind)
    contexts = []
    i = 0
    while len(contexts) < count:
        rec = Recorder(base.with_params(random_theta(base, rng)))
        run_meta_episode(rec, opp, env, 3, seed * 1000 + i)
        contexts.extend(rec.contexts)
        i += 1
    return contexts[:count]
