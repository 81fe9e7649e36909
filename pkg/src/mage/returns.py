"""Episode rewards, differential meta-rewards and dual-discount step returns."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .envs import EnvKind, Result


class ReturnVariant(str, enum.Enum):
    DIFFERENTIAL = "differential"
    CUMULATIVE = "cumulative"
    SINGLE_EPISODE = "single_episode"


@dataclass(frozen=True)
class RewardConfig:
    task_win: float = 10.0
    task_loss: float = -10.0
    task_neutral: float = 0.0
    invalid_penalty: float = 0.5
    length_coeff: float = 2.0
    max_response_length: int = 4096
    # unsolved-by-cap counts as failure (Sokoban) or as neutral (games)
    timeout_is_failure: bool = False

    def __post_init__(self):
        if self.invalid_penalty < 0 or self.length_coeff < 0 or self.max_response_length <= 0:
            raise ValueError("penalties must be >= 0 and max_response_length > 0")


def reward_defaults(kind) -> RewardConfig:
    kind = EnvKind(kind)
    if kind is EnvKind.SOKOBAN:
        return RewardConfig(length_coeff=1.0, max_response_length=4096, timeout_is_failure=True)
    if kind is EnvKind.TICTACTOE:
        return RewardConfig(length_coeff=2.0, max_response_length=3072)
    return RewardConfig(length_coeff=2.0, max_response_length=4096)


@dataclass(frozen=True)
class ReturnConfig:
    gamma_step: float = 0.95
    gamma_traj: float = 0.6
    variant: ReturnVariant = ReturnVariant.DIFFERENTIAL
    # "first_decision": G_{m,0} := G_{m,1};  "extra_discount": one more gamma_step factor
    episode_start: str = "first_decision"

    def __post_init__(self):
        object.__setattr__(self, "variant", ReturnVariant(self.variant))
        if not (0.0 < self.gamma_step <= 1.0) or not (0.0 <= self.gamma_traj <= 1.0):
            raise ValueError("gamma_step must be in (0, 1] and gamma_traj in [0, 1]")
        if self.episode_start not in ("first_decision", "extra_discount"):
            raise ValueError(f"unknown episode_start {self.episode_start!r}")


@dataclass(frozen=True)
class MetaRewardVector:
    episode_returns: tuple
    meta_rewards: tuple
    step_returns: tuple  # per episode, a tuple of G_{n,t} for t = 1..T_n

    def to_dict(self) -> dict:
        return {
            "episode_returns": list(self.episode_returns),
            "meta_rewards": list(self.meta_rewards),
            "step_returns": [list(g) for g in self.step_returns],
        }


def length_penalty(length: float, max_length: float) -> float:
    half = 0.5 * max_length
    if length < half:
        return 0.0
    if length >= max_length:
        return 1.0
    return (length - half) / (max_length - half)


def task_reward(outcome, cfg: RewardConfig) -> float:
    outcome = Result(outcome)
    if outcome is Result.WIN:
        return cfg.task_win
    if outcome is Result.LOSS:
        return cfg.task_loss
    if outcome is Result.TIMEOUT and cfg.timeout_is_failure:
        return cfg.task_loss
    return cfg.task_neutral


def compose_episode_reward(outcome, invalid_count: int, response_lengths, cfg: RewardConfig) -> float:
    if invalid_count < 0:
        raise ValueError("invalid_count must be >= 0")
    penalty = sum(length_penalty(n, cfg.max_response_length) for n in response_lengths)
    return task_reward(outcome, cfg) - cfg.invalid_penalty * invalid_count - cfg.length_coeff * penalty


def differential_meta_reward(episode_returns) -> list[float]:
    if len(episode_returns) == 0:
        raise ValueError("need at least one episode return")
    prev = 0  # int keeps exact numeric types (Fraction) exact
    out = []
    for r in episode_returns:
        out.append(r - prev)
        prev = r
    return out


def terminal_rewards(episode_returns, variant) -> list[float]:
    """The reward placed on each episode's last step under a return variant."""
    if ReturnVariant(variant) is ReturnVariant.DIFFERENTIAL:
        return differential_meta_reward(episode_returns)
    return [float(r) for r in episode_returns]


def stepwise_rewards(meta_reward: float, length: int) -> list[float]:
    if length < 1:
        raise ValueError("episodes have at least one step")
    return [0.0] * (length - 1) + [meta_reward]


def stepwise_returns(rewards, lengths, cfg: ReturnConfig) -> list[np.ndarray]:
    """G_{n,t} for every episode, by a backward sweep over episodes.

    ``rewards`` are the terminal rewards from :func:`terminal_rewards`.
    The cross-episode term is dropped for the single-episode variant.
    """
    if len(rewards) != len(lengths):
        raise ValueError("rewards and lengths must align")
    gs, gt = cfg.gamma_step, cfg.gamma_traj
    cross_on = cfg.variant is not ReturnVariant.SINGLE_EPISODE and gt > 0.0
    extra = 1 if cfg.episode_start == "extra_discount" else 0
    n_eps = len(rewards)
    out: list[np.ndarray] = [None] * n_eps
    carry = 0.0  # sum_{m>n} gt^{m-n} G_{m,0}
    for n in range(n_eps - 1, -1, -1):
        T = int(lengths[n])
        if T < 1:
            raise ValueError("episodes have at least one step")
        cross = carry if cross_on else 0.0
        powers = gs ** np.arange(T - 1, -1, -1, dtype=np.float64)
        out[n] = powers * rewards[n] + cross
        start = gs ** (T - 1 + extra) * rewards[n] + cross
        carry = gt * (start + carry)
    return out


def meta_reward_vector(episode_returns, lengths, cfg: ReturnConfig) -> MetaRewardVector:
    rewards = terminal_rewards(episode_returns, cfg.variant)
    returns = stepwise_returns(rewards, lengths, cfg)
    return MetaRewardVector(
        tuple(float(r) for r in episode_returns),
        tuple(float(r) for r in rewards),
        tuple(tuple(float(g) for g in ep) for ep in returns),
    )
