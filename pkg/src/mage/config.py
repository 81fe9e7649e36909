"""Run configuration: a YAML file plus ``key=value`` overrides.

Schema (every key optional; defaults shown by :class:`RunConfig`)::

    env: kuhn                 # kuhn | tictactoe | sokoban
    env_params: {}            # forwarded to the env constructor
    population: balanced      # variant name, or a list of {opponent: id, weight: w}
    N: 3
    group_size: 8
    groups_per_epoch: 4
    epochs: 150
    seed: 0
    seeds: [0, 1, 2, 3, 4]    # used by ablate
    learning_rate: 0.03
    reward: {}                # RewardConfig fields; env defaults fill the rest
    returns: {gamma_step: 0.95, gamma_traj: 0.6, variant: differential}
    grouping: stationary      # stationary | non_stationary
    anchor_scope: global      # global | per_episode
    norm: mean_norm           # mean_norm | z_norm
    step_weight: 1.0
    use_memory: true
    policy: {type: parametric, checkpoint: null}
    endpoint: {}              # EndpointConfig fields for policy.type = remote
    out_dir: runs/default
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .advantage import Grouping, NormMode, Scope
from .envs import ConfigError, EnvKind
from .returns import RewardConfig, ReturnConfig, reward_defaults

OPTIMIZERS = ("sgd",)


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e-3`` style floats (YAML 1.1 wants a dot)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                    |\.[0-9_]+(?:[eE][-+][0-9]+)?
                    |[-+]?\.(?:inf|Inf|INF)
                    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def _yaml_load(text: str):
    return yaml.load(text, Loader=_Loader)

_INT, _NUM = (int,), (int, float)
_SCALAR_TYPES = {
    "env": str, "N": _INT, "group_size": _INT, "groups_per_epoch": _INT, "epochs": _INT,
    "seed": _INT, "seeds": list, "learning_rate": _NUM, "optimizer": str, "reward": dict,
    "returns": dict, "grouping": str, "episode_grouping": str, "step_grouping": str,
    "anchor_scope": str, "norm": str, "step_weight": _NUM, "use_memory": bool,
    "reflection": str, "reflect_after_success": bool, "policy": dict, "endpoint": dict,
    "env_params": dict, "eval_meta_episodes": _INT, "eval_every": _INT,
    "checkpoint_every": _INT, "trajectories": bool, "trajectory_max_mb": _NUM,
    "advantage_dump": bool, "out_dir": str,
}
_NULLABLE = {"episode_grouping", "step_grouping"}
_TYPE_NAMES = {str: "a string", _INT: "an integer", _NUM: "a number", list: "a list",
               dict: "a mapping", bool: "true/false"}


@dataclass
class RunConfig:
    env: str = "kuhn"
    env_params: dict = field(default_factory=dict)
    population: object = "balanced"
    N: int = 3
    group_size: int = 8
    groups_per_epoch: int = 4
    epochs: int = 150
    seed: int = 0
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    learning_rate: float = 0.03
    optimizer: str = "sgd"
    reward: dict = field(default_factory=dict)
    returns: dict = field(default_factory=dict)
    grouping: str = "stationary"
    # per-component overrides of ``grouping``; null follows ``grouping``
    episode_grouping: str | None = None
    step_grouping: str | None = None
    anchor_scope: str = "global"
    norm: str = "mean_norm"
    step_weight: float = 1.0
    use_memory: bool = True
    reflection: str = "structured"
    reflect_after_success: bool = True
    policy: dict = field(default_factory=lambda: {"type": "parametric", "checkpoint": None})
    endpoint: dict = field(default_factory=dict)
    eval_meta_episodes: int = 256
    eval_every: int = 0
    checkpoint_every: int = 10
    trajectories: bool = False
    trajectory_max_mb: float = 64.0
    advantage_dump: bool = False
    out_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            want = _SCALAR_TYPES.get(f.name)
            val = getattr(self, f.name)
            if want is None or (val is None and f.name in _NULLABLE):
                continue
            if isinstance(val, bool) and want is not bool or not isinstance(val, want):
                raise ConfigError(f"{f.name} must be {_TYPE_NAMES[want]}, got {val!r}")
        try:
            EnvKind(self.env)
            Grouping(self.grouping)
            for g in (self.episode_grouping, self.step_grouping):
                if g is not None:
                    Grouping(g)
            if Scope(self.anchor_scope) is Scope.EPISODE_LEVEL:
                raise ValueError("anchor_scope must be global or per_episode")
            NormMode(self.norm)
            self.reward_config()
            self.return_config()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        for name in ("N", "group_size", "groups_per_epoch"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; supported: {OPTIMIZERS}")
        if self.policy.get("type", "parametric") not in ("parametric", "remote"):
            raise ConfigError(f"unknown policy type {self.policy.get('type')!r}")
        if self.reflection not in ("structured", "remote"):
            raise ConfigError(f"unknown reflection generator {self.reflection!r}")

    @property
    def kind(self) -> EnvKind:
        return EnvKind(self.env)

    def reward_config(self) -> RewardConfig:
        base = reward_defaults(self.env)
        unknown = set(self.reward) - {f.name for f in fields(RewardConfig)}
        if unknown:
            raise ValueError(f"unknown reward keys: {sorted(unknown)}")
        return dataclasses.replace(base, **self.reward)

    def return_config(self) -> ReturnConfig:
        unknown = set(self.returns) - {f.name for f in fields(ReturnConfig)}
        if unknown:
            raise ValueError(f"unknown returns keys: {sorted(unknown)}")
        return ReturnConfig(**self.returns)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _set_dotted(d: dict, key: str, value) -> None:
    parts = key.split(".")
    cur = d
    for p in parts[:-1]:
        nxt = cur.get(p)
        if nxt is None:
            nxt = cur[p] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"cannot set {key!r}: {p!r} is not a mapping")
        cur = nxt
    cur[parts[-1]] = value


def apply_overrides(data: dict, overrides) -> dict:
    out = json.loads(json.dumps(data))
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {item!r} is not key=value")
        try:
            value = _yaml_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"bad override value in {item!r}: {exc}") from exc
        _set_dotted(out, key.strip(), value)
    return out


def config_from_dict(data: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, overrides=()) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            loaded = _yaml_load(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping")
        data = loaded or {}
    base = RunConfig().to_dict()
    base.update(data)
    return config_from_dict(apply_overrides(base, overrides))


def config_diff(a: RunConfig, b: RunConfig) -> dict:
    da, db = a.to_dict(), b.to_dict()
    return {k: (da[k], db[k]) for k in da if da[k] != db[k]}
