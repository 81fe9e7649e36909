"""Linear softmax policy over featurized (context, action) pairs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..envs import EnvKind
from .features import make_featurizer

CHECKPOINT_HEADER = "# mage-policy v1"


class NumericalError(ArithmeticError):
    """Non-finite values reached the parameters or the loss."""


@dataclass(frozen=True)
class PolicyParams:
    theta: np.ndarray
    feature_dim: int
    env_kind: EnvKind
    featurizer: str = ""

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64).reshape(-1)
        if theta.shape[0] != self.feature_dim:
            raise ValueError(f"theta has {theta.shape[0]} entries, expected {self.feature_dim}")
        if not np.all(np.isfinite(theta)):
            raise NumericalError("policy parameters contain non-finite entries")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "env_kind", EnvKind(self.env_kind))

    @classmethod
    def zeros(cls, featurizer, env_kind) -> "PolicyParams":
        return cls(np.zeros(featurizer.dim), featurizer.dim, env_kind, featurizer.name)

    def to_text(self) -> str:
        lines = [
            CHECKPOINT_HEADER,
            f"env_kind {self.env_kind.value}",
            f"featurizer {self.featurizer}",
            f"feature_dim {self.feature_dim}",
        ]
        lines.extend(repr(float(v)) for v in self.theta)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PolicyParams":
        lines = [ln.strip() for ln in text.strip().splitlines()]
        if not lines or lines[0] != CHECKPOINT_HEADER:
            raise ValueError("not a policy checkpoint (bad header)")
        meta = {}
        for ln in lines[1:4]:
            key, _, val = ln.partition(" ")
            meta[key] = val
        dim = int(meta["feature_dim"])
        theta = np.array([float(v) for v in lines[4:]], dtype=np.float64)
        return cls(theta, dim, EnvKind(meta["env_kind"]), meta.get("featurizer", ""))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PolicyParams":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ActionDecision:
    action: Any
    log_prob: float | None
    raw_text: str | None = None
    response_length: int | None = None
    flagged_invalid: bool = False
    # (feature matrix, chosen row, probabilities), reused by the trainer
    cache: Any = field(default=None, compare=False, repr=False)


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        raise ValueError("no admissible action")
    out = np.full(logits.shape, -np.inf)
    z = logits[mask]
    z = z - z.max()
    out[mask] = z - np.log(np.exp(z).sum())
    return out


def sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF pick; zero-probability rows are never returned."""
    cdf = np.cumsum(probs)
    i = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    nz = np.flatnonzero(probs > 0)
    if i > nz[-1]:
        i = int(nz[-1])
    return i


class LinearSoftmaxPolicy:
    def __init__(self, params: PolicyParams, featurizer=None):
        self.featurizer = featurizer or make_featurizer(params.env_kind)
        if self.featurizer.dim != params.feature_dim:
            raise ValueError("featurizer width does not match the parameters")
        self.params = params

    @classmethod
    def zeros(cls, kind, actions_per_turn: int = 3) -> "LinearSoftmaxPolicy":
        feat = make_featurizer(kind, actions_per_turn)
        return cls(PolicyParams.zeros(feat, kind), feat)

    def featurize(self, ctx):
        """(candidates, admissible mask, feature matrix) for a context."""
        f = self.featurizer
        return f.candidates(ctx), f.mask(ctx), f.matrix(ctx)

    def distribution(self, ctx, theta=None):
        cands, mask, phi = self.featurize(ctx)
        theta = self.params.theta if theta is None else theta
        logp = masked_log_softmax(phi @ theta, mask)
        return cands, phi, np.exp(logp), logp

    def act(self, ctx, rng) -> ActionDecision:
        cands, phi, probs, logp = self.distribution(ctx)
        i = sample_index(probs, float(rng.random()))
        return ActionDecision(cands[i], float(logp[i]), cache=(phi, i, probs))

    def log_prob(self, ctx, action, theta=None) -> float:
        cands, _, _, logp = self.distribution(ctx, theta)
        return float(logp[cands.index(action)])

    def logprob_grad(self, ctx, action, theta=None) -> np.ndarray:
        cands, phi, probs, _ = self.distribution(ctx, theta)
        i = cands.index(action)
        if probs[i] == 0.0:
            raise ValueError(f"action {action!r} is not admissible here")
        return grad_from_cache(phi, i, probs)

    def with_params(self, params: PolicyParams) -> "LinearSoftmaxPolicy":
        return LinearSoftmaxPolicy(params, self.featurizer)


def grad_from_cache(phi: np.ndarray, i: int, probs: np.ndarray) -> np.ndarray:
    return phi[i] - probs @ phi


def apply_update(params: PolicyParams, grad, learning_rate: float) -> PolicyParams:
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != params.theta.shape:
        raise ValueError(f"gradient shape {g.shape} != parameter shape {params.theta.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericalError("non-finite gradient entries; update aborted")
    with np.errstate(over="ignore", invalid="ignore"):
        theta = params.theta + learning_rate * g
    return PolicyParams(theta, params.feature_dim, params.env_kind, params.featurizer)
