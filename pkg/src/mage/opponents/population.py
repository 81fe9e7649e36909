from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ..envs import ConfigError, EnvKind
from ..envs import tictactoe as ttt
from ..envs.kuhn import CARDS
from .kuhn_bots import ARCHETYPES, archetype_bet_prob, kuhn_archetype_act
from .mcts import mcts_select

NO_OPPONENT = "none"

PATTERN_ORDERINGS = {
    0: ((2, 2), (1, 1), (1, 3), (3, 1), (3, 3), (1, 2), (2, 1), (2, 3), (3, 2)),
    1: ttt.ALL_CELLS,
    2: ((1, 1), (1, 3), (3, 3), (3, 1), (2, 2), (1, 2), (2, 3), (3, 2), (2, 1)),
    3: ((1, 2), (2, 1), (2, 3), (3, 2), (2, 2), (1, 1), (1, 3), (3, 1), (3, 3)),
}


class Archetype(str, enum.Enum):
    MCTS = "mcts"
    PATTERN = "pattern"
    RANDOM_TTT = "random_ttt"
    KUHN_CONSERVATIVE = "kuhn_conservative"
    KUHN_AGGRESSIVE = "kuhn_aggressive"
    KUHN_INTERMEDIATE = "kuhn_intermediate"
    KUHN_CFR = "kuhn_cfr"
    RANDOM_KUHN = "random_kuhn"
    NONE = "none"


_TTT = {Archetype.MCTS, Archetype.PATTERN, Archetype.RANDOM_TTT}
_KUHN_TABLE = {
    Archetype.KUHN_CONSERVATIVE: "conservative",
    Archetype.KUHN_AGGRESSIVE: "aggressive",
    Archetype.KUHN_INTERMEDIATE: "intermediate",
    Archetype.RANDOM_KUHN: "random",
}


@dataclass(frozen=True)
class OpponentSpec:
    archetype: Archetype
    params: tuple = ()
    seed: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "archetype", Archetype(self.archetype))
        params = self.params.items() if isinstance(self.params, dict) else self.params
        object.__setattr__(self, "params", tuple(sorted((str(k), v) for k, v in params)))
        p = dict(self.params)
        if self.archetype is Archetype.MCTS and int(p.get("num_simulations", 0)) < 1:
            raise ConfigError("MCTS opponents need num_simulations >= 1")
        if self.archetype is Archetype.PATTERN and p.get("ordering_id") not in PATTERN_ORDERINGS:
            raise ConfigError(f"unknown pattern ordering {p.get('ordering_id')!r}")

    @property
    def id(self) -> str:
        p = dict(self.params)
        a = self.archetype
        if a is Archetype.MCTS:
            key = f"mcts-{int(p['num_simulations'])}"
            if "exploration" in p:
                key += f"-c{float(p['exploration'])!r}"
            return key
        if a is Archetype.PATTERN:
            return f"pattern-{int(p['ordering_id'])}"
        if a is Archetype.KUHN_CFR:
            return f"kuhn-cfr-{int(p.get('iterations', 100_000))}"
        base = a.value.replace("_", "-")
        extra = [f"{k}={v!r}" for k, v in self.params]
        return base if not extra else base + "[" + ",".join(extra) + "]"

    @property
    def env_kind(self) -> EnvKind | None:
        if self.archetype in _TTT:
            return EnvKind.TICTACTOE
        if self.archetype is Archetype.NONE:
            return None
        return EnvKind.KUHN

    def kuhn_table(self):
        p = dict(self.params)
        if "table" in p:
            return p["table"]
        return ARCHETYPES[_KUHN_TABLE[self.archetype]]

    def kuhn_bet_prob(self, info_set: str) -> float:
        if self.archetype is Archetype.KUHN_CFR:
            from .cfr import cached_profile

            return cached_profile(int(dict(self.params).get("iterations", 100_000))).bet_prob(info_set)
        return archetype_bet_prob(self.kuhn_table(), info_set)

    def ttt_move_distribution(self, cells) -> list | None:
        """Exact move distribution, or None when it is not enumerable (MCTS)."""
        empties = [ttt.to_action(i) for i in ttt.empty_cells(cells)]
        if self.archetype is Archetype.PATTERN:
            order = PATTERN_ORDERINGS[int(dict(self.params)["ordering_id"])]
            first = next(a for a in order if a in empties)
            return [(first, 1.0)]
        if self.archetype is Archetype.RANDOM_TTT:
            return [(a, 1.0 / len(empties)) for a in empties]
        return None

    def to_dict(self) -> dict:
        return {"archetype": self.archetype.value, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, data) -> "OpponentSpec":
        if isinstance(data, str):
            return parse_opponent(data)
        return cls(data["archetype"], data.get("params", {}), int(data.get("seed", 0)))


def parse_opponent(text: str) -> OpponentSpec:
    """Parse short ids such as ``mcts-1000``, ``pattern-0`` or ``kuhn-conservative``."""
    t = text.strip().lower()
    if t.startswith("mcts-"):
        return OpponentSpec(Archetype.MCTS, {"num_simulations": int(t.split("-")[1])})
    if t.startswith("pattern-"):
        return OpponentSpec(Archetype.PATTERN, {"ordering_id": int(t.split("-")[1])})
    if t.startswith("kuhn-cfr"):
        parts = t.split("-")
        iters = int(parts[2]) if len(parts) > 2 else 100_000
        return OpponentSpec(Archetype.KUHN_CFR, {"iterations": iters})
    try:
        return OpponentSpec(Archetype(t.replace("-", "_")))
    except ValueError:
        raise ConfigError(f"unknown opponent {text!r}") from None


def opponent_act(spec: OpponentSpec, env, state, rng: np.random.Generator):
    """The opponent's move in ``state``; never reveals anything to the agent."""
    a = spec.archetype
    if a in _TTT:
        if a is Archetype.MCTS:
            p = dict(spec.params)
            return mcts_select(state.cells, state.to_move, int(p["num_simulations"]), rng,
                               float(p.get("exploration", math.sqrt(2.0))))
        dist = spec.ttt_move_distribution(state.cells)
        if len(dist) == 1:
            return dist[0][0]
        return dist[int(rng.integers(len(dist)))][0]
    if a is Archetype.NONE:
        raise ValueError("single-agent tasks have no opponent moves")
    seat = state.to_move
    key = CARDS[state.cards[seat]] + state.history
    if a is Archetype.KUHN_CFR:
        p = spec.kuhn_bet_prob(key)
        if p <= 0.0:
            return "PASS"
        if p >= 1.0:
            return "BET"
        return "BET" if rng.random() < p else "PASS"
    return kuhn_archetype_act(spec.kuhn_table(), key, rng)


@dataclass(frozen=True)
class PopulationConfig:
    entries: tuple

    def __post_init__(self):
        entries = tuple((s if isinstance(s, OpponentSpec) else OpponentSpec.from_dict(s), float(w))
                        for s, w in self.entries)
        if not entries:
            raise ConfigError("population must be non-empty")
        if any(w <= 0 for _, w in entries):
            raise ConfigError("population weights must be positive")
        total = sum(w for _, w in entries)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"population weights must sum to 1, got {total}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def uniform(cls, specs) -> "PopulationConfig":
        specs = list(specs)
        return cls(tuple((s, 1.0 / len(specs)) for s in specs))

    @property
    def specs(self) -> list:
        return [s for s, _ in self.entries]

    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.entries])

    def to_list(self) -> list:
        return [{"opponent": s.to_dict(), "weight": w} for s, w in self.entries]

    @classmethod
    def from_list(cls, items) -> "PopulationConfig":
        out = []
        for item in items:
            spec = item["opponent"] if "opponent" in item else item["id"]
            out.append((OpponentSpec.from_dict(spec), float(item["weight"])))
        return cls(tuple(out))


def sample_opponent(population: PopulationConfig, rng: np.random.Generator) -> OpponentSpec:
    """Weighted draw using a single uniform."""
    cum = np.cumsum(population.weights())
    u = rng.random() * cum[-1]
    i = int(np.searchsorted(cum, u, side="right"))
    return population.entries[min(i, len(cum) - 1)][0]


def default_population(kind, variant: str = "balanced") -> PopulationConfig:
    kind = EnvKind(kind)
    if kind is EnvKind.KUHN:
        return PopulationConfig.uniform([
            OpponentSpec(Archetype.KUHN_CONSERVATIVE),
            OpponentSpec(Archetype.KUHN_AGGRESSIVE),
            OpponentSpec(Archetype.KUHN_INTERMEDIATE),
        ])
    if kind is EnvKind.TICTACTOE:
        mcts = OpponentSpec(Archetype.MCTS, {"num_simulations": 100})
        others = [OpponentSpec(Archetype.PATTERN, {"ordering_id": 0}),
                  OpponentSpec(Archetype.PATTERN, {"ordering_id": 1}),
                  OpponentSpec(Archetype.RANDOM_TTT)]
        if variant == "balanced":
            return PopulationConfig(((mcts, 0.5),) + tuple((o, 0.5 / 3) for o in others))
        if variant == "pattern_skewed":
            return PopulationConfig(((mcts, 0.1), (others[0], 0.35), (others[1], 0.35),
                                     (others[2], 0.2)))
        if variant == "fixed":
            return PopulationConfig(((mcts, 1.0),))
        raise ConfigError(f"unknown population variant {variant!r}")
    return PopulationConfig(((OpponentSpec(Archetype.NONE), 1.0),))
