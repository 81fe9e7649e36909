"""Outer training loop: population sampling, rollout, advantages and updates."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .advantage import (
    AdvantageRecord,
    Grouping,
    NormMode,
    anchor_hex,
    combine_advantages,
    episode_level_advantages,
    normalize_groups,
)
from .config import RunConfig
from .envs import ConfigError, make_env
from .metrics import MetricsRow, metrics_rows
from .opponents import PopulationConfig, default_population, parse_opponent, sample_opponent
from .opponents.population import OpponentSpec
from .policy.linear import LinearSoftmaxPolicy, NumericalError, PolicyParams, apply_update
from .returns import (
    ReturnVariant,
    compose_episode_reward,
    meta_reward_vector,
    stepwise_rewards,
)
from .rollout import MetaEpisode, ReflectionConfig, run_meta_episode

log = logging.getLogger(__name__)


def build_population(cfg: RunConfig) -> PopulationConfig:
    pop = cfg.population
    if isinstance(pop, str):
        return default_population(cfg.env, pop)
    if not isinstance(pop, list):
        raise ConfigError("population must be a variant name or a list of entries")
    entries = []
    for item in pop:
        if not isinstance(item, dict) or "opponent" not in item:
            raise ConfigError(f"bad population entry {item!r}")
        spec = item["opponent"]
        spec = parse_opponent(spec) if isinstance(spec, str) else OpponentSpec.from_dict(spec)
        entries.append((spec, float(item.get("weight", 1.0 / len(pop)))))
    return PopulationConfig(tuple(entries))


def build_env(cfg: RunConfig):
    try:
        return make_env(cfg.env, **cfg.env_params)
    except TypeError as exc:
        raise ConfigError(f"bad env_params for {cfg.env}: {exc}") from exc


def reflection_config(cfg: RunConfig, client=None) -> ReflectionConfig:
    return ReflectionConfig(cfg.reflection, cfg.use_memory, cfg.reflect_after_success, client)


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def episode_seeds(*parts: int, n: int) -> tuple:
    return tuple(int(s) for s in np.random.SeedSequence([int(p) for p in parts]).generate_state(n))


# ---------------------------------------------------------------------------
# rollout


@dataclass
class Batch:
    metas: list
    groups: list  # rollout-group index of each meta-episode
    episode_returns: list  # per meta-episode, R(tau_n) for n = 1..N

    @property
    def num_steps(self) -> int:
        return sum(len(ep.steps) for me in self.metas for ep in me.episodes)


def episode_returns(me: MetaEpisode, reward_cfg) -> list[float]:
    return [compose_episode_reward(ep.outcome, ep.invalid_count, ep.response_lengths, reward_cfg)
            for ep in me.episodes]


def with_rewards(me: MetaEpisode, returns, ret_cfg) -> MetaEpisode:
    """Attach the reward vector and place each episode's reward on its last step."""
    lengths = [len(ep.steps) for ep in me.episodes]
    vec = meta_reward_vector(returns, lengths, ret_cfg)
    episodes = []
    for ep, r in zip(me.episodes, vec.meta_rewards):
        if ep.steps:
            rewards = stepwise_rewards(r, len(ep.steps))
            ep = replace(ep, steps=tuple(replace(s, reward=float(x)) for s, x in zip(ep.steps, rewards)))
        episodes.append(ep)
    return replace(me, episodes=tuple(episodes), rewards=vec)


def rollout_batch(cfg: RunConfig, policy, env, population, epoch: int, reflection=None) -> Batch:
    """``groups_per_epoch`` groups of ``group_size`` meta-episodes; one opponent per group.

    Members of a group share per-episode env seeds, so they face the same task
    instances and differ only in policy and opponent randomness.
    """
    reward_cfg, ret_cfg = cfg.reward_config(), cfg.return_config()
    reflection = reflection or reflection_config(cfg)
    opp_rng = np.random.default_rng([cfg.seed, epoch, 0])
    metas, groups, rets = [], [], []
    for g in range(cfg.groups_per_epoch):
        opponent = sample_opponent(population, opp_rng)
        seeds = episode_seeds(cfg.seed, epoch, g, 7, n=cfg.N)
        for slot in range(cfg.group_size):
            me = run_meta_episode(policy, opponent, env, cfg.N, derive_seed(cfg.seed, epoch, g, slot),
                                  env_seeds=seeds, reflection=reflection)
            rets.append(episode_returns(me, reward_cfg))
            metas.append(with_rewards(me, rets[-1], ret_cfg))
            groups.append(g)
    return Batch(metas, groups, rets)


# ---------------------------------------------------------------------------
# advantages


@dataclass
class StepTable:
    """Flat per-step view of a batch, aligned across all arrays."""
    meta: np.ndarray
    episode: np.ndarray
    step: np.ndarray
    raw_return: np.ndarray
    episode_adv: np.ndarray
    step_adv: np.ndarray
    advantage: np.ndarray
    records: list


def episode_objectives(batch: Batch, variant) -> np.ndarray:
    """Per meta-episode objective: R(tau_N) for differential (telescoped), sum for cumulative.

    For single-episode returns this is the (meta-episodes, N) matrix of R(tau_n).
    """
    R = np.array(batch.episode_returns, dtype=np.float64)
    variant = ReturnVariant(variant)
    if variant is ReturnVariant.DIFFERENTIAL:
        return R[:, -1]
    if variant is ReturnVariant.CUMULATIVE:
        return R.sum(axis=1)
    return R


def compute_advantages(cfg: RunConfig, batch: Batch) -> StepTable:
    ret_cfg = cfg.return_config()
    mode = NormMode(cfg.norm)
    ep_grouping = Grouping(cfg.episode_grouping or cfg.grouping)
    st_grouping = Grouping(cfg.step_grouping or cfg.grouping)

    objectives = episode_objectives(batch, ret_cfg.variant)
    if ep_grouping is Grouping.STATIONARY:
        keys = list(batch.groups)
    else:
        keys = [0] * len(batch.metas)
    if objectives.ndim == 1:
        ep_adv = episode_level_advantages(objectives, keys, mode)
        ep_adv = np.repeat(ep_adv[:, None], cfg.N, axis=1)
    else:
        ep_adv = np.zeros_like(objectives)
        for n in range(objectives.shape[1]):
            ep_adv[:, n] = episode_level_advantages(objectives[:, n], keys, mode)

    records, meta_i, ep_i, step_i, e_col = [], [], [], [], []
    for m, me in enumerate(batch.metas):
        vec = me.rewards
        if vec is None:
            lengths = [len(ep.steps) for ep in me.episodes]
            vec = meta_reward_vector(batch.episode_returns[m], lengths, ret_cfg)
        for n, ep in enumerate(me.episodes):
            for t, st in enumerate(ep.steps):
                records.append(AdvantageRecord(
                    f"{me.seed:x}", n + 1, t + 1, vec.step_returns[n][t],
                    opponent_id=me.opponent.id, anchor=anchor_hex(st.obs.structured),
                ))
                meta_i.append(m)
                ep_i.append(n)
                step_i.append(t)
                e_col.append(ep_adv[m, n])
    if cfg.step_weight != 0.0 and records:
        st_adv = normalize_groups(records, st_grouping, cfg.anchor_scope, mode)
    else:
        st_adv = np.zeros(len(records))
        for r in records:
            r.advantage = 0.0
    e_col = np.asarray(e_col, dtype=np.float64)
    return StepTable(
        np.asarray(meta_i, dtype=np.int64), np.asarray(ep_i, dtype=np.int64),
        np.asarray(step_i, dtype=np.int64), np.array([r.raw_return for r in records]),
        e_col, st_adv, combine_advantages(e_col, st_adv, cfg.step_weight), records,
    )


# ---------------------------------------------------------------------------
# loss


def stack_caches(batch: Batch):
    """(Phi, chosen index, probs, log-prob) stacked over every step of the batch."""
    caches = [st.cache for me in batch.metas for ep in me.episodes for st in ep.steps]
    logp = np.array([st.log_prob for me in batch.metas for ep in me.episodes for st in ep.steps],
                    dtype=np.float64)
    if any(c is None for c in caches):
        raise ValueError("every step needs a policy cache; remote policies cannot be trained")
    phi = np.stack([c[0] for c in caches])
    idx = np.array([c[1] for c in caches], dtype=np.int64)
    probs = np.stack([c[2] for c in caches])
    return phi, idx, probs, logp


def compute_loss(phi, idx, probs, logp, adv, num_meta: int):
    """Loss -sum A log pi / num_meta and the ascent direction of sum A log pi / num_meta."""
    adv = np.asarray(adv, dtype=np.float64)
    if adv.shape != logp.shape or phi.shape[0] != adv.shape[0]:
        raise ValueError(f"advantages {adv.shape} do not align with {phi.shape[0]} steps")
    if num_meta < 1:
        raise ValueError("num_meta must be >= 1")
    if adv.size == 0:
        return 0.0, np.zeros(phi.shape[-1] if phi.ndim == 3 else 0)
    chosen = phi[np.arange(len(idx)), idx]
    expected = np.einsum("sk,skd->sd", probs, phi)
    grad = np.einsum("s,sd->d", adv, chosen - expected) / num_meta
    loss = -float(adv @ logp) / num_meta
    return loss, grad


def compute_loss_reference(phi, idx, probs, logp, adv, num_meta: int):
    """Step-by-step loop used as an oracle for :func:`compute_loss`."""
    loss = 0.0
    grad = np.zeros(phi.shape[-1])
    for s in range(len(adv)):
        loss -= adv[s] * logp[s]
        g = phi[s, idx[s]].copy()
        for k in range(phi.shape[1]):
            g -= probs[s, k] * phi[s, k]
        grad += adv[s] * g
    return loss / num_meta, grad / num_meta


# ---------------------------------------------------------------------------
# output


class RunWriter:
    """Serializes metrics, checkpoints and trajectory logs for one run directory."""

    def __init__(self, out_dir, cfg: RunConfig):
        self.root = Path(out_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "checkpoints").mkdir(exist_ok=True)
        self.cfg = cfg
        self.metrics_path = self.root / "metrics.csv"
        self.metrics_path.unlink(missing_ok=True)
        self._columns = None
        self.traj_path = self.root / "trajectories.jsonl"
        self._traj_bytes = 0
        self._traj_cap = int(cfg.trajectory_max_mb * 1024 * 1024)
        if cfg.trajectories:
            self.traj_path.write_text("", encoding="utf-8")
        self.adv_path = self.root / "advantages.csv"
        if cfg.advantage_dump:
            self.adv_path.write_text(
                "epoch,meta_episode_id,n,t,opponent_id,anchor_key,G,A\n", encoding="utf-8")
        (self.root / "config.yaml").write_text(cfg.dump(), encoding="utf-8")

    def write_rows(self, rows: list[MetricsRow], phase: str = "train") -> None:
        for row in rows:
            d = {"phase": phase}
            d.update(row.to_dict())
            if self._columns is None:
                self._columns = list(d)
                with self.metrics_path.open("w", newline="", encoding="utf-8") as fh:
                    csv.writer(fh).writerow(self._columns)
            with self.metrics_path.open("a", newline="", encoding="utf-8") as fh:
                csv.writer(fh).writerow([_fmt(d.get(c, "")) for c in self._columns])

    def write_checkpoint(self, params: PolicyParams, name: str) -> Path:
        path = self.root / "checkpoints" / f"{name}.txt"
        params.save(path)
        return path

    def write_trajectories(self, epoch: int, batch: Batch) -> None:
        if not self.cfg.trajectories:
            return
        buf = io.StringIO()
        for me in batch.metas:
            d = me.to_dict()
            d["epoch"] = epoch
            buf.write(json.dumps(d, sort_keys=True, separators=(",", ":")) + "\n")
        blob = buf.getvalue()
        if self._traj_bytes + len(blob) > self._traj_cap:
            log.warning("trajectory log reached %.1f MB; further epochs are not logged",
                        self.cfg.trajectory_max_mb)
            self.cfg.trajectories = False
            return
        self._traj_bytes += len(blob)
        with self.traj_path.open("a", encoding="utf-8") as fh:
            fh.write(blob)

    def write_advantages(self, epoch: int, table: StepTable) -> None:
        if not self.cfg.advantage_dump:
            return
        with self.adv_path.open("a", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            for r, a in zip(table.records, table.advantage):
                w.writerow([epoch, r.meta_episode_id, r.episode_index, r.step, r.opponent_id,
                            r.anchor, repr(float(r.raw_return)), repr(float(a))])


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    params: PolicyParams
    rows: list
    out_dir: Path | None


def initial_params(cfg: RunConfig) -> LinearSoftmaxPolicy:
    ckpt = (cfg.policy or {}).get("checkpoint")
    apt = int(cfg.env_params.get("actions_per_turn", 3))
    if ckpt:
        params = PolicyParams.load(ckpt)
        if params.env_kind is not cfg.kind:
            raise ConfigError(f"checkpoint is for {params.env_kind.value}, config says {cfg.env}")
        pol = LinearSoftmaxPolicy.zeros(cfg.env, apt)
        return pol.with_params(params)
    return LinearSoftmaxPolicy.zeros(cfg.env, apt)


def train_step(cfg: RunConfig, policy: LinearSoftmaxPolicy, batch: Batch, out_dir=None):
    table = compute_advantages(cfg, batch)
    phi, idx, probs, logp = stack_caches(batch)
    loss, grad = compute_loss(phi, idx, probs, logp, table.advantage, len(batch.metas))
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        _dump_failure(out_dir, batch, table, loss)
        raise NumericalError(f"non-finite loss/gradient (loss={loss})")
    try:
        params = apply_update(policy.params, grad, cfg.learning_rate)
    except NumericalError:
        _dump_failure(out_dir, batch, table, loss)
        raise
    return params, table, loss


def _dump_failure(out_dir, batch: Batch, table: StepTable, loss) -> None:
    if out_dir is None:
        return
    path = Path(out_dir) / "numerical_failure.json"
    path.write_text(json.dumps({
        "loss": repr(loss),
        "episode_returns": batch.episode_returns,
        "advantages": [repr(float(a)) for a in table.advantage],
        "raw_returns": [repr(float(g)) for g in table.raw_return],
        "meta_episodes": [me.to_dict() for me in batch.metas],
    }, indent=1, sort_keys=True), encoding="utf-8")
    log.error("numerical failure; batch dumped to %s", path)


def train(cfg: RunConfig, out_dir=None, progress: bool = False) -> TrainResult:
    env = build_env(cfg)
    population = build_population(cfg)
    for spec in population.specs:
        if spec.env_kind not in (None, cfg.kind):
            raise ConfigError(f"opponent {spec.id} does not play {cfg.env}")
    if (cfg.policy or {}).get("type", "parametric") != "parametric":
        raise ConfigError("only the parametric policy can be trained")
    policy = initial_params(cfg)
    writer = RunWriter(out_dir, cfg) if out_dir is not None else None
    rows = []
    reflection = reflection_config(cfg)
    for epoch in range(1, cfg.epochs + 1):
        batch = rollout_batch(cfg, policy, env, population, epoch, reflection)
        params, table, loss = train_step(cfg, policy, batch, out_dir)
        epoch_rows = metrics_rows(epoch, batch.metas, batch.episode_returns)
        rows.extend(epoch_rows)
        if writer:
            writer.write_rows(epoch_rows)
            writer.write_trajectories(epoch, batch)
            writer.write_advantages(epoch, table)
            if cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
                writer.write_checkpoint(params, f"epoch_{epoch:04d}")
        if progress and (epoch % 10 == 0 or epoch == cfg.epochs):
            total = epoch_rows[-1]
            log.info("epoch %d loss %.4f success %s", epoch, loss,
                     " ".join(f"{s:.3f}" for s in total.success))
        policy = policy.with_params(params)
        if cfg.eval_every and writer and epoch % cfg.eval_every == 0:
            from .evaluation import evaluate
            writer.write_rows(evaluate(cfg, policy, population.specs, cfg.eval_meta_episodes,
                                       seed=cfg.seed, epoch=epoch, env=env), phase="eval")
    if writer:
        writer.write_checkpoint(policy.params, "final")
    return TrainResult(policy.params, rows, Path(out_dir) if out_dir is not None else None)


__all__ = [
    "Batch", "RunWriter", "StepTable", "TrainResult", "build_env", "build_population",
    "compute_advantages", "compute_loss", "compute_loss_reference", "derive_seed",
    "episode_objectives", "rollout_batch", "stack_caches", "train", "train_step",
]
