"""Meta-episodes: N episodes against one fixed opponent with reflection memory."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Any, Protocol

import numpy as np

from . import prompts
from .advantage import anchor_hex
from .envs import ContractViolation, EnvKind, Observation, Result
from .opponents import Archetype, OpponentSpec, opponent_act
from .opponents.minimax import move_values

log = logging.getLogger(__name__)

RESULT_SCORE = {Result.WIN: 1.0, Result.LOSS: -1.0}


class TransportError(RuntimeError):
    """A remote policy or reflection endpoint could not be reached."""


@dataclass(frozen=True)
class StepRecord:
    obs: Observation
    action: Any
    reward: float = 0.0
    log_prob: float | None = None
    invalid: bool = False
    response_length: int | None = None
    cache: Any = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class EpisodeTrajectory:
    episode_index: int
    steps: tuple
    outcome: Result
    invalid_count: int
    final_obs: Observation
    opponent_moves: tuple = ()
    response_lengths: tuple = ()

    @property
    def success(self) -> bool:
        return self.outcome is Result.WIN

    @property
    def init_text(self) -> str:
        return self.steps[0].obs.text if self.steps else self.final_obs.text


@dataclass(frozen=True)
class Reflection:
    episode_index: int
    text: str = ""
    features: dict = field(default_factory=dict)
    skipped: bool = False


EMPTY_REFLECTION = Reflection(0)


@dataclass(frozen=True)
class ContextMemory:
    reflections: tuple = (EMPTY_REFLECTION,)

    def __len__(self) -> int:
        return len(self.reflections)

    def __iter__(self):
        return iter(self.reflections)

    def digests(self) -> list[dict]:
        return [r.features for r in self.reflections if r.features]


@dataclass(frozen=True)
class PolicyContext:
    env_kind: EnvKind
    task: str
    memory: ContextMemory
    history: tuple
    admissible: tuple
    actions: tuple = ()
    prompt_vars: dict = field(default_factory=dict)

    @property
    def current(self) -> Observation:
        return self.history[-1]


@dataclass(frozen=True)
class MetaEpisode:
    opponent: OpponentSpec
    episodes: tuple
    memory: ContextMemory
    seed: int
    env_seeds: tuple = ()
    rewards: Any = None

    def to_dict(self) -> dict:
        out = {
            "opponent_id": self.opponent.id,
            "opponent": self.opponent.to_dict(),
            "seed": self.seed,
            "env_seeds": list(self.env_seeds),
            "episodes": [_episode_dict(ep) for ep in self.episodes],
            "reflections": [
                {"episode_index": r.episode_index, "text": r.text, "features": r.features,
                 "skipped": r.skipped}
                for r in self.memory
            ],
        }
        if self.rewards is not None:
            out["rewards"] = self.rewards.to_dict()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def action_json(action):
    if isinstance(action, tuple):
        return [action_json(a) for a in action]
    if isinstance(action, (np.integer,)):
        return int(action)
    return action


def _episode_dict(ep: EpisodeTrajectory) -> dict:
    return {
        "n": ep.episode_index,
        "outcome": ep.outcome.value,
        "invalid_count": ep.invalid_count,
        "response_lengths": list(ep.response_lengths),
        "opponent_moves": [action_json(m) for m in ep.opponent_moves],
        "steps": [
            {
                "t": t,
                "obs": s.obs.text,
                "state": s.obs.structured,
                "anchor": anchor_hex(s.obs.structured),
                "action": action_json(s.action),
                "reward": s.reward,
                "log_prob": s.log_prob,
                "invalid": s.invalid,
            }
            for t, s in enumerate(ep.steps, 1)
        ],
    }


def task_description(kind) -> str:
    return prompts.TASK_HEADERS[EnvKind(kind).value]


def append_memory(memory: ContextMemory, reflection: Reflection) -> ContextMemory:
    if reflection.episode_index != len(memory):
        raise ContractViolation(
            f"reflection index {reflection.episode_index} != memory length {len(memory)}"
        )
    return ContextMemory(memory.reflections + (reflection,))


def build_context(kind, task: str, memory: ContextMemory, history, admissible,
                  actions=(), prompt_vars=None, episode_index: int | None = None) -> PolicyContext:
    if episode_index is not None and len(memory) != episode_index:
        raise ContractViolation(
            f"episode {episode_index} needs {episode_index} reflections, memory has {len(memory)}"
        )
    return PolicyContext(EnvKind(kind), task, memory, tuple(history), tuple(admissible),
                         tuple(actions), dict(prompt_vars or {}))


def render_context_prompt(ctx: PolicyContext, budget: int | None = None) -> str:
    """The play prompt for a remote text policy."""
    observations = [o.text for o in ctx.history[1:]]
    return prompts.render_play_prompt(
        ctx.env_kind.value,
        ctx.history[0].text,
        [r.text for r in ctx.memory],
        ctx.actions,
        observations,
        ctx.admissible,
        ctx.prompt_vars,
        budget,
    )


# ---------------------------------------------------------------------------
# structured reflections


def _kuhn_opponent_stats(ep: EpisodeTrajectory) -> dict:
    final = ep.final_obs.structured
    history, seat = final["history"], final["seat"]
    stats = {"open_bet": 0, "open_pass": 0, "call": 0, "fold": 0}
    for i, a in enumerate(history):
        if i % 2 == seat:
            continue
        facing = history[:i].endswith("B")
        if facing:
            stats["call" if a == "B" else "fold"] += 1
        else:
            stats["open_bet" if a == "B" else "open_pass"] += 1
    opp_card = final.get("opp_card")
    opp_line = "".join(a for i, a in enumerate(history) if i % 2 != seat)
    stats["showdown_card"] = opp_card
    stats["showdown_line"] = opp_line if opp_card else None
    return stats


def _ttt_blunder(ep: EpisodeTrajectory) -> dict | None:
    for t, s in enumerate(ep.steps, 1):
        if s.invalid:
            continue
        cells = tuple(s.obs.structured["cells"])
        mark = s.obs.structured["to_move"]
        values = move_values(cells, mark)
        best = max(values.values())
        played = tuple(s.action)
        if values.get(played, -2) < best:
            first_best = next(a for a, v in values.items() if v == best)
            return {"ply": t, "played": list(played), "best": list(first_best),
                    "anchor": anchor_hex(s.obs.structured), "lost_value": best - values[played]}
    return None


def reflection_features(ep: EpisodeTrajectory, kind) -> dict:
    """Deterministic digest of one finished episode."""
    kind = EnvKind(kind)
    visits = [[anchor_hex(s.obs.structured), json.dumps(action_json(s.action)), bool(s.invalid)]
              for s in ep.steps]
    feats = {
        "episode_index": ep.episode_index,
        "outcome": ep.outcome.value,
        "score": RESULT_SCORE.get(ep.outcome, 0.0),
        "invalid_count": ep.invalid_count,
        "num_steps": len(ep.steps),
        "visits": visits,
    }
    if kind is EnvKind.KUHN:
        feats["opponent"] = _kuhn_opponent_stats(ep)
    elif kind is EnvKind.TICTACTOE:
        feats["opponent"] = {"moves": [list(m) for m in ep.opponent_moves]}
        feats["blunder"] = _ttt_blunder(ep)
    else:
        rows = ep.final_obs.structured["rows"]
        feats["opponent"] = {}
        feats["boxes_left"] = sum(r.count("X") for r in rows)
    return feats


def _reflection_text(feats: dict, kind: EnvKind) -> str:
    parts = [f"Outcome: {feats['outcome']} after {feats['num_steps']} turn(s), "
             f"{feats['invalid_count']} invalid."]
    opp = feats.get("opponent") or {}
    if kind is EnvKind.KUHN:
        parts.append(
            "Opponent: opened with a bet {open_bet}x, passed {open_pass}x, "
            "called {call}x, folded {fold}x.".format(**opp)
        )
        if opp.get("showdown_card"):
            parts.append(f"Showdown revealed {opp['showdown_card']} "
                         f"after opponent line {opp['showdown_line']}.")
    elif kind is EnvKind.TICTACTOE:
        moves = ", ".join(f"({r},{c})" for r, c in opp.get("moves", []))
        parts.append(f"Opponent replies: {moves or 'none'}.")
        b = feats.get("blunder")
        if b:
            parts.append(f"Mistake at move {b['ply']}: played ({b['played'][0]},{b['played'][1]}); "
                         f"({b['best'][0]},{b['best'][1]}) was needed.")
        elif feats["outcome"] != "win":
            parts.append("No losing move found; keep the same line.")
    else:
        parts.append(f"Boxes still off target: {feats['boxes_left']}.")
    if feats["outcome"] == "win":
        parts.append("Repeat what worked.")
    return " ".join(parts)


@dataclass
class ReflectionConfig:
    generator: str = "structured"  # or "remote"
    enabled: bool = True
    reflect_after_success: bool = True
    client: Any = None


_REMARK = re.compile(r"<remark>(.*?)</remark>", re.S | re.I)


def generate_reflection(ep: EpisodeTrajectory, kind, index: int | None = None,
                        generator: str = "structured", client=None) -> Reflection:
    kind = EnvKind(kind)
    index = ep.episode_index if index is None else index
    feats = reflection_features(ep, kind)
    text = _reflection_text(feats, kind)
    if generator == "remote":
        if client is None:
            log.warning("remote reflection requested without a client; using structured digest")
        else:
            prompt = prompts.render_reflect_prompt(
                kind.value, ep.init_text, [s.action for s in ep.steps],
                [s.obs.text for s in ep.steps[1:]] + [ep.final_obs.text], ep.success,
            )
            try:
                reply = client.complete(prompt)
                m = _REMARK.findall(reply)
                text = (m[-1] if m else reply).strip()
            except TransportError as exc:
                log.warning("remote reflection failed (%s); using structured digest", exc)
    return Reflection(index, text, feats)


# ---------------------------------------------------------------------------
# rollout


class Policy(Protocol):
    def act(self, context: PolicyContext, rng: np.random.Generator): ...


def run_episode(env, policy, opponent: OpponentSpec, memory: ContextMemory, episode_index: int,
                env_seed: int, policy_rng, opponent_rng, task: str | None = None):
    kind = EnvKind(env.kind)
    task = task_description(kind) if task is None else task
    state = env.reset(env_seed)
    opp_moves = []

    def advance(st):
        while not st.terminal and not st.agent_to_move:
            move = opponent_act(opponent, env, st, opponent_rng)
            opp_moves.append(move)
            st = env.step(st, move).state
        return st

    state = advance(state)
    history, actions, steps, lengths = [], [], [], []
    while not state.terminal:
        obs = env.observe(state)
        history.append(obs)
        ctx = build_context(kind, task, memory, history, obs.admissible, actions,
                            env.prompt_vars(state), episode_index)
        decision = policy.act(ctx, policy_rng)
        if getattr(decision, "flagged_invalid", False):
            state = replace(state, invalid_count=state.invalid_count + 1)
        out = env.step(state, decision.action)
        if decision.response_length is not None:
            lengths.append(int(decision.response_length))
        steps.append(StepRecord(obs, decision.action, 0.0, decision.log_prob,
                                out.invalid or getattr(decision, "flagged_invalid", False),
                                decision.response_length, getattr(decision, "cache", None)))
        actions.append(decision.action)
        state = advance(out.state)
    final = env.observe(state)
    if kind is EnvKind.KUHN:
        final = _kuhn_reveal(final, state)
    return EpisodeTrajectory(episode_index, tuple(steps), state.result, state.invalid_count,
                             final, tuple(opp_moves), tuple(lengths))


def _kuhn_reveal(obs: Observation, state) -> Observation:
    h = state.history
    showdown = h in ("PP", "PBB", "BB")
    s = dict(obs.structured)
    s["opp_card"] = "JQK"[state.cards[1 - state.agent_seat]] if showdown else None
    return replace(obs, structured=s)


def run_meta_episode(policy, opponent: OpponentSpec, env, N: int, seed: int,
                     env_seeds=None, reflection: ReflectionConfig | None = None,
                     task: str | None = None) -> MetaEpisode:
    if N < 1:
        raise ValueError("N must be >= 1")
    reflection = reflection or ReflectionConfig()
    kind = EnvKind(env.kind)
    if env_seeds is None:
        env_seeds = [int(s) for s in np.random.SeedSequence([seed, 7]).generate_state(N)]
    env_seeds = tuple(int(s) for s in env_seeds)
    policy_rng = np.random.default_rng([seed, 1])
    opponent_rng = np.random.default_rng([seed, 2])
    memory = ContextMemory()
    episodes = []
    for n in range(1, N + 1):
        ep = run_episode(env, policy, opponent, memory, n, env_seeds[n - 1],
                         policy_rng, opponent_rng, task)
        episodes.append(ep)
        if n < N:
            if not reflection.enabled or (ep.success and not reflection.reflect_after_success):
                refl = Reflection(n, skipped=True)
            else:
                refl = generate_reflection(ep, kind, n, reflection.generator, reflection.client)
            memory = append_memory(memory, refl)
    return MetaEpisode(opponent, tuple(episodes), memory, seed, env_seeds)


def no_opponent() -> OpponentSpec:
    return OpponentSpec(Archetype.NONE)
