"""Group-relative advantages with opponent-pure groups and anchor-state groups."""

from __future__ import annotations

import enum
import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

SINGLE_AGENT = "none"
EPS = 1e-6


class NormMode(str, enum.Enum):
    MEAN_NORM = "mean_norm"
    Z_NORM = "z_norm"


class Grouping(str, enum.Enum):
    STATIONARY = "stationary"
    NON_STATIONARY = "non_stationary"


class Scope(str, enum.Enum):
    EPISODE_LEVEL = "episode"
    STEP_GLOBAL_ANCHOR = "global"
    STEP_PER_EPISODE_ANCHOR = "per_episode"


def anchor_key(structured: Mapping) -> int:
    """Stable 64-bit key of a structured observation (key order ignored)."""
    blob = json.dumps(structured, sort_keys=True, separators=(",", ":"), default=str)
    return int.from_bytes(hashlib.blake2b(blob.encode(), digest_size=8).digest(), "big")


def anchor_hex(structured: Mapping) -> str:
    return f"{anchor_key(structured):016x}"


@dataclass(frozen=True)
class GroupKey:
    opponent_id: str = SINGLE_AGENT
    anchor: str | None = None
    scope: Scope = Scope.EPISODE_LEVEL
    episode_index: int | None = None


@dataclass
class AdvantageRecord:
    meta_episode_id: str
    episode_index: int
    step: int
    raw_return: float
    opponent_id: str = SINGLE_AGENT
    anchor: str | None = None
    group: GroupKey | None = field(default=None)
    advantage: float | None = None


def normalize(values, mode=NormMode.MEAN_NORM) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot normalize an empty group")
    if x.size == 1:
        return np.zeros(1)
    centred = x - x.mean()
    if NormMode(mode) is NormMode.Z_NORM:
        return centred / max(float(x.std()), EPS)
    return centred


def step_group_key(rec: AdvantageRecord, grouping, scope) -> GroupKey:
    grouping, scope = Grouping(grouping), Scope(scope)
    opp = rec.opponent_id if grouping is Grouping.STATIONARY else "*"
    if scope is Scope.STEP_PER_EPISODE_ANCHOR:
        return GroupKey(opp, rec.anchor, scope, rec.episode_index)
    if scope is Scope.STEP_GLOBAL_ANCHOR:
        return GroupKey(opp, rec.anchor, scope)
    return GroupKey(opp, None, scope)


def group_records(records: Iterable[AdvantageRecord], grouping, scope) -> dict:
    """Partition records; each record's ``group`` field is set as a side effect."""
    groups: dict[GroupKey, list[AdvantageRecord]] = defaultdict(list)
    for rec in records:
        if rec.opponent_id is None:
            raise ValueError("every record needs an opponent_id")
        key = step_group_key(rec, grouping, scope)
        rec.group = key
        groups[key].append(rec)
    return dict(groups)


def normalize_groups(records, grouping, scope, mode=NormMode.MEAN_NORM) -> np.ndarray:
    """Normalized raw returns, in the input order of ``records``."""
    records = list(records)
    index = {id(r): i for i, r in enumerate(records)}
    out = np.zeros(len(records))
    for members in group_records(records, grouping, scope).values():
        adv = normalize([r.raw_return for r in members], mode)
        for r, a in zip(members, adv):
            r.advantage = float(a)
            out[index[id(r)]] = a
    return out


def episode_level_advantages(values, keys, mode=NormMode.MEAN_NORM) -> np.ndarray:
    """Normalize per-meta-episode objective values within equal ``keys``."""
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros_like(values)
    buckets: dict = defaultdict(list)
    for i, k in enumerate(keys):
        buckets[k].append(i)
    for idx in buckets.values():
        out[idx] = normalize(values[idx], mode)
    return out


def combine_advantages(episode_adv, step_adv, step_weight: float = 1.0) -> np.ndarray:
    e = np.asarray(episode_adv, dtype=np.float64)
    s = np.asarray(step_adv, dtype=np.float64)
    if e.shape != s.shape:
        raise ValueError(f"advantage shapes differ: {e.shape} vs {s.shape}")
    return e + step_weight * s
