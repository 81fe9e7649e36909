"""Play/reflect prompt templates with ``{placeholder}`` substitution."""

from __future__ import annotations

import logging
from functools import lru_cache
from importlib import resources

log = logging.getLogger(__name__)

PLAY_TEMPLATES = {
    "tictactoe": "tictactoe_play.txt",
    "kuhn": "kuhn_play.txt",
    "sokoban": "sokoban_play.txt",
}

TASK_HEADERS = {
    "tictactoe": "You are playing Tic-Tac-Toe against a fixed opponent.",
    "kuhn": "You are playing Kuhn Poker against a fixed opponent.",
    "sokoban": "You are solving a Sokoban puzzle.",
}


class _Strict(dict):
    def __missing__(self, key):
        raise KeyError(f"prompt placeholder {{{key}}} was not supplied")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files(__name__).joinpath(name).read_text(encoding="utf-8")


def fill(template: str, values: dict) -> str:
    return template.format_map(_Strict(values))


def format_action(action) -> str:
    if isinstance(action, tuple) and len(action) == 2 and all(isinstance(v, int) for v in action):
        return f"({action[0]},{action[1]})"
    if isinstance(action, (tuple, list)):
        return ", ".join(str(a) for a in action)
    return str(action)


def format_reflections(texts: list[str], budget: int | None = None) -> str:
    """Past reflections, dropping the oldest first when over ``budget`` chars.

    ``texts[i]`` is the reflection on episode ``i``; slot 0 is the empty one.
    """
    items = [f"[Attempt {i}] {t.strip()}" for i, t in enumerate(texts) if t.strip()]
    dropped = 0
    while budget is not None and items and sum(len(s) + 1 for s in items) > budget:
        items.pop(0)
        dropped += 1
    if dropped:
        log.info("prompt budget: dropped %d oldest reflection(s)", dropped)
    if not items:
        return ""
    return "\n\nLessons from your earlier attempts against this opponent:\n" + "\n".join(items)


def format_trajectory(actions, observations) -> str:
    if not actions:
        return ""
    lines = ["", "", "Your actions so far in this attempt:"]
    for i, (a, obs) in enumerate(zip(actions, observations), 1):
        lines.append(f"Step {i}: you played {format_action(a)}")
        lines.append(obs)
    return "\n".join(lines)


def render_play_prompt(kind: str, init_observation: str, reflections: list[str],
                       actions, observations, admissible, extra: dict,
                       budget: int | None = None) -> str:
    values = dict(extra)
    values.update(
        init_observation=init_observation,
        past_trajectories_reflections=format_reflections(reflections, budget),
        current_trajectory=format_trajectory(actions, observations),
        admissible_actions=", ".join(format_action(a) for a in admissible),
    )
    return fill(load_template(PLAY_TEMPLATES[kind]), values)


def render_reflect_prompt(kind: str, init_observation: str, actions, observations,
                          success: bool) -> str:
    outcome = ("The task was completed successfully." if success
               else "The task was NOT completed successfully.")
    return fill(load_template("reflect.txt"), {
        "task_header": TASK_HEADERS[kind],
        "init_observation": init_observation,
        "current_trajectory": format_trajectory(actions, observations).strip() or "(no actions)",
        "outcome_line": outcome,
    })
