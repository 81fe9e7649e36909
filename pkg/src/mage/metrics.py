"""Pass@k, per-episode success and binomial confidence intervals."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .envs import Result


def pass_at_k(outcomes, k: int) -> float:
    """Fraction of meta-episodes with at least one success among the first ``k`` episodes."""
    m = np.asarray(outcomes, dtype=bool)
    if m.ndim != 2 or m.shape[0] == 0:
        raise ValueError("outcomes must be a non-empty (meta-episodes, N) matrix")
    if not 1 <= k <= m.shape[1]:
        raise ValueError(f"k must be in 1..{m.shape[1]}")
    return float(m[:, :k].any(axis=1).mean())


def success_by_index(outcomes) -> np.ndarray:
    return np.asarray(outcomes, dtype=bool).mean(axis=0)


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


@dataclass
class MetricsRow:
    epoch: int
    opponent_id: str
    num_meta_episodes: int
    success: tuple
    pass_at: tuple
    mean_return: float
    mean_invalid: float
    win_rate: float
    draw_rate: float
    loss_rate: float
    final_ci: tuple = (0.0, 1.0)

    def to_dict(self) -> dict:
        out = {"epoch": self.epoch, "opponent_id": self.opponent_id,
               "num_meta_episodes": self.num_meta_episodes}
        for i, s in enumerate(self.success, 1):
            out[f"success_ep{i}"] = s
        for i, p in enumerate(self.pass_at, 1):
            out[f"pass@{i}"] = p
        out.update(mean_return=self.mean_return, mean_invalid=self.mean_invalid,
                   win_rate=self.win_rate, draw_rate=self.draw_rate, loss_rate=self.loss_rate,
                   final_ci_low=self.final_ci[0], final_ci_high=self.final_ci[1])
        return out


def metrics_rows(epoch: int, metas, returns=None, include_total: bool = True) -> list[MetricsRow]:
    """One row per opponent id (sorted), plus an ``all`` row when several opponents appear.

    ``returns`` optionally holds each meta-episode's episode returns.
    """
    by_opp = defaultdict(list)
    for i, me in enumerate(metas):
        by_opp[me.opponent.id].append(i)
    keys = sorted(by_opp)
    if include_total and len(keys) > 1:
        by_opp["all"] = list(range(len(metas)))
        keys.append("all")
    rows = []
    for key in keys:
        idx = by_opp[key]
        outcomes = np.array([[ep.success for ep in metas[i].episodes] for i in idx], dtype=bool)
        results = [ep.outcome for i in idx for ep in metas[i].episodes]
        n_eps = len(results)
        N = outcomes.shape[1]
        if returns is not None:
            mean_ret = float(np.mean([r for i in idx for r in returns[i]]))
        else:
            mean_ret = float("nan")
        rows.append(MetricsRow(
            epoch=epoch,
            opponent_id=key,
            num_meta_episodes=len(idx),
            success=tuple(float(s) for s in success_by_index(outcomes)),
            pass_at=tuple(pass_at_k(outcomes, k) for k in range(1, N + 1)),
            mean_return=mean_ret,
            mean_invalid=float(np.mean([ep.invalid_count for i in idx for ep in metas[i].episodes])),
            win_rate=sum(r is Result.WIN for r in results) / n_eps,
            draw_rate=sum(r is Result.DRAW for r in results) / n_eps,
            loss_rate=sum(r is Result.LOSS for r in results) / n_eps,
            final_ci=wilson_interval(int(outcomes[:, -1].sum()), len(idx)),
        ))
    return rows
