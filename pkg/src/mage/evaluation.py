"""Frozen-policy evaluation, best-response ceilings, ablations and frequency export."""

from __future__ import annotations

import csv
import dataclasses
import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .advantage import anchor_hex
from .config import RunConfig, config_diff
from .envs import ConfigError, EnvKind
from .envs import tictactoe as ttt
from .envs.kuhn import kuhn_payoff
from .metrics import metrics_rows
from .opponents import Archetype, OpponentSpec, mcts_select
from .opponents.cfr import best_response
from .rollout import action_json, run_meta_episode
from .trainer import (
    build_env,
    build_population,
    derive_seed,
    episode_returns,
    reflection_config,
    train,
    with_rewards,
)


@lru_cache(maxsize=4)
def _kuhn_seed_pools(env_seat, per_combo: int) -> dict:
    """Env seeds grouped by the (deal, agent seat) they produce."""
    from .envs import make_env
    from .envs.kuhn import DEALS

    env = make_env("kuhn", agent_seat=env_seat)
    seats = (0, 1) if env_seat is None else (env_seat,)
    pools: dict = {(d, seat): [] for d in DEALS for seat in seats}
    s = 0
    while min(len(v) for v in pools.values()) < per_combo:
        st = env.reset(s)
        pool = pools[(st.cards, st.agent_seat)]
        if len(pool) < per_combo:
            pool.append(s)
        s += 1
    return {k: tuple(v) for k, v in pools.items()}


def stratified_env_seeds(env, count: int, N: int, seed: int):
    """Kuhn env seeds such that every episode index sees each (deal, seat) equally often.

    Rows are independent permutations per index, so episodes of one
    meta-episode are as unrelated as with plain seeding.  ``None`` for other envs.
    """
    if EnvKind(env.kind) is not EnvKind.KUHN:
        return None
    n_combos = 6 if env.agent_seat is not None else 12
    pools = _kuhn_seed_pools(env.agent_seat, -(-count // n_combos))
    combos = sorted(pools)
    rng = np.random.default_rng([seed, 55])
    out = np.zeros((count, N), dtype=np.int64)
    for n in range(N):
        labels = np.resize(np.arange(len(combos)), count)
        order = rng.permutation(count)
        used: dict = defaultdict(int)
        for i, lab in zip(order, labels):
            key = combos[lab]
            out[i, n] = pools[key][used[key]]
            used[key] += 1
    return out


def evaluate(cfg: RunConfig, policy, opponents, num_meta_episodes: int, seed: int = 0,
             epoch: int = 0, env=None, N: int | None = None, logs: list | None = None,
             client=None, stratified: bool = True):
    """Metrics rows per opponent from pure rollouts.

    Meta-episode ``i`` uses the same seeds against every opponent, so rows are
    comparable under common random numbers.  Kuhn deals are stratified per
    episode index (see :func:`stratified_env_seeds`).
    """
    env = env or build_env(cfg)
    N = cfg.N if N is None else N
    reflection = reflection_config(cfg, client)
    reward_cfg, ret_cfg = cfg.reward_config(), cfg.return_config()
    env_seeds = stratified_env_seeds(env, num_meta_episodes, N, seed) if stratified else None
    rows = []
    for spec in opponents:
        metas, rets = [], []
        for i in range(num_meta_episodes):
            me = run_meta_episode(policy, spec, env, N, derive_seed(seed, 99, i),
                                  env_seeds=None if env_seeds is None else env_seeds[i],
                                  reflection=reflection)
            rets.append(episode_returns(me, reward_cfg))
            metas.append(with_rewards(me, rets[-1], ret_cfg))
        if logs is not None:
            logs.extend(metas)
        rows.extend(metrics_rows(epoch, metas, rets, include_total=False))
    return rows


# ---------------------------------------------------------------------------
# theoretical ceilings


@dataclass(frozen=True)
class Ceiling:
    opponent_id: str
    success: float
    estimate: bool = False
    detail: dict = dataclasses.field(default_factory=dict)


def _kuhn_win(cards, history, seat):
    u0 = kuhn_payoff(cards, history)
    return 1.0 if (u0 if seat == 0 else -u0) > 0 else 0.0


def kuhn_ceiling(spec: OpponentSpec) -> Ceiling:
    """Best-response win probability, averaged over the two seats."""
    v0, c0 = best_response(spec.kuhn_bet_prob, 0, _kuhn_win)
    v1, c1 = best_response(spec.kuhn_bet_prob, 1, _kuhn_win)
    return Ceiling(spec.id, (v0 + v1) / 2.0, False,
                   {"seat0": v0, "seat1": v1, "policy_seat0": c0, "policy_seat1": c1})


def _ttt_expectimax(move_dist, agent_first: bool = True):
    """Win probability of the best agent strategy against a memoryless stochastic opponent."""
    agent = ttt.X if agent_first else ttt.O

    @lru_cache(maxsize=None)
    def value(cells, to_move):
        w = ttt.winner(cells)
        if w is not None and w != ttt.EMPTY:
            return 1.0 if w == agent else 0.0
        empties = ttt.empty_cells(cells)
        if not empties:
            return 0.0
        nxt = ttt.O if to_move == ttt.X else ttt.X
        if to_move == agent:
            best = 0.0
            for i in empties:
                b = list(cells)
                b[i] = to_move
                best = max(best, value(tuple(b), nxt))
            return best
        total = 0.0
        for action, p in move_dist(cells, to_move):
            b = list(cells)
            b[ttt.to_index(action)] = to_move
            total += p * value(tuple(b), nxt)
        return total

    return value((ttt.EMPTY,) * 9, ttt.X)


def ttt_ceiling(spec: OpponentSpec, agent_first: bool = True, samples: int = 64,
                seed: int = 0) -> Ceiling:
    if spec.archetype is Archetype.MCTS:
        sims = int(dict(spec.params)["num_simulations"])
        rng = np.random.default_rng(seed)
        cache: dict = {}

        def dist(cells, to_move):
            # empirical move distribution of the search, sampled once per state
            if cells not in cache:
                counts = Counter(mcts_select(cells, to_move, sims, rng) for _ in range(samples))
                cache[cells] = [(a, c / samples) for a, c in sorted(counts.items())]
            return cache[cells]

        return Ceiling(spec.id, _ttt_expectimax(dist, agent_first), True,
                       {"samples_per_state": samples, "states": len(cache)})
    return Ceiling(spec.id, _ttt_expectimax(lambda c, _m: spec.ttt_move_distribution(c), agent_first))


def theoretical_ceiling(kind, spec: OpponentSpec, **kwargs) -> Ceiling:
    kind = EnvKind(kind)
    if kind is EnvKind.KUHN:
        return kuhn_ceiling(spec)
    if kind is EnvKind.TICTACTOE:
        return ttt_ceiling(spec, **kwargs)
    raise ConfigError("ceilings are defined for the two-player games only")


# ---------------------------------------------------------------------------
# state-action frequencies


def state_action_counts(metas) -> dict:
    """(episode_index, anchor, action json) -> count."""
    counts: dict = Counter()
    for me in metas:
        for ep in me.episodes:
            for st in ep.steps:
                a = action_json(st.action)
                key = (ep.episode_index, anchor_hex(st.obs.structured),
                       a if isinstance(a, str) else json.dumps(a))
                counts[key] += 1
    return counts


def export_state_action_frequencies(metas, path=None) -> list[dict]:
    counts = state_action_counts(metas)
    per_index: dict = defaultdict(int)
    for (n, _, _), c in counts.items():
        per_index[n] += c
    rows = [
        {"episode_index": n, "anchor_key": anchor, "action": action, "count": c,
         "frequency": c / per_index[n]}
        for (n, anchor, action), c in sorted(counts.items())
    ]
    if path is not None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, ["episode_index", "anchor_key", "action", "count", "frequency"])
            w.writeheader()
            for r in rows:
                w.writerow({**r, "frequency": repr(r["frequency"])})
    return rows


def read_trajectory_log(path) -> list:
    """Lightweight stand-ins for meta-episodes read back from ``trajectories.jsonl``."""
    from types import SimpleNamespace

    def to_action(a):
        return tuple(to_action(x) for x in a) if isinstance(a, list) else a

    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            eps = []
            for ep in d["episodes"]:
                steps = [SimpleNamespace(obs=SimpleNamespace(structured=s["state"]),
                                         action=to_action(s["action"])) for s in ep["steps"]]
                eps.append(SimpleNamespace(episode_index=ep["n"], steps=steps))
            out.append(SimpleNamespace(episodes=eps))
    return out


# ---------------------------------------------------------------------------
# ablations

AXES = {
    "reward_variant": [("differential", {"returns.variant": "differential"}),
                       ("cumulative", {"returns.variant": "cumulative"}),
                       ("single_episode", {"returns.variant": "single_episode"})],
    "grouping": [("stationary", {"grouping": "stationary"}),
                 ("non_stationary", {"grouping": "non_stationary"})],
    "anchor_scope": [("global", {"anchor_scope": "global"}),
                     ("per_episode", {"anchor_scope": "per_episode"})],
    "opponent_distribution": [("balanced", {"population": "balanced"}),
                              ("pattern_skewed", {"population": "pattern_skewed"}),
                              ("fixed", {"population": "fixed"})],
    "memory": [("memory", {"use_memory": True}),
               ("no_memory_single_episode",
                {"use_memory": False, "returns.variant": "single_episode"})],
}


def _apply(cfg: RunConfig, changes: dict) -> RunConfig:
    data = cfg.to_dict()
    for key, value in changes.items():
        cur = data
        parts = key.split(".")
        for p in parts[:-1]:
            cur = cur.setdefault(p, {})
        cur[parts[-1]] = value
    return RunConfig(**data)


def ablation_configs(cfg: RunConfig, axis: str) -> list[tuple[str, RunConfig]]:
    if axis not in AXES:
        raise ConfigError(f"unknown ablation axis {axis!r}; choose from {sorted(AXES)}")
    arms = [(name, _apply(cfg, changes)) for name, changes in AXES[axis]]
    allowed = {k.split(".")[0] for _, ch in AXES[axis] for k in ch}
    for name, arm in arms:
        extra = set(config_diff(arms[0][1], arm)) - allowed
        if extra:
            raise ConfigError(f"ablation arm {name} differs outside the axis: {sorted(extra)}")
    return arms


def ablate(cfg: RunConfig, axis: str, out_dir=None, seeds=None, eval_meta_episodes=None):
    """Train and evaluate every arm of ``axis`` on shared seeds; returns summary rows."""
    seeds = list(cfg.seeds if seeds is None else seeds)
    n_eval = cfg.eval_meta_episodes if eval_meta_episodes is None else eval_meta_episodes
    summary = []
    for name, arm in ablation_configs(cfg, axis):
        for seed in seeds:
            run_cfg = dataclasses.replace(arm, seed=int(seed))
            sub = None if out_dir is None else Path(out_dir) / name / f"seed{seed}"
            result = train(run_cfg, sub)
            from .policy import LinearSoftmaxPolicy
            pol = LinearSoftmaxPolicy.zeros(run_cfg.env, int(run_cfg.env_params.get(
                "actions_per_turn", 3))).with_params(result.params)
            specs = build_population(run_cfg).specs
            for row in evaluate(run_cfg, pol, specs, n_eval, seed=10_000 + int(seed),
                                epoch=run_cfg.epochs):
                d = {"axis": axis, "arm": name, "seed": seed}
                d.update(row.to_dict())
                summary.append(d)
    if out_dir is not None and summary:
        path = Path(out_dir) / f"ablation_{axis}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, list(summary[0]))
            w.writeheader()
            w.writerows(summary)
    return summary
