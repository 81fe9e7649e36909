"""Chat-completion text policy and the tolerant action parser behind it."""

from __future__ import annotations

import logging
import os
import re
import time
from dataclasses import dataclass

import httpx

from ..envs import EnvKind
from ..rollout import TransportError, render_context_prompt
from .linear import ActionDecision

log = logging.getLogger(__name__)

_TAG = re.compile(r"<action>(.*?)</action>", re.S | re.I)
_COORD = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")
_BARE_COORD = re.compile(r"(-?\d+)\s*,\s*(-?\d+)")
_KUHN_WORD = re.compile(r"\b(PASS|BET|CHECK|CALL|FOLD)\b", re.I)
_DIRECTION = re.compile(r"\b(up|down|left|right)\b", re.I)

# check/fold are the passive move, call is the aggressive one
_KUHN_ALIASES = {"PASS": "PASS", "CHECK": "PASS", "FOLD": "PASS", "BET": "BET", "CALL": "BET"}


@dataclass(frozen=True)
class ParsedAction:
    action: object = None
    mode: str = "none"  # "tag", "lenient" or "none"

    @property
    def ok(self) -> bool:
        return self.action is not None


def _as_text(raw) -> str:
    if raw is None:
        return ""
    if isinstance(raw, (bytes, bytearray, memoryview)):
        return bytes(raw).decode("utf-8", errors="replace")
    return str(raw)


def _parse_ttt(text: str, admissible, strict: bool):
    pattern = _BARE_COORD if strict else _COORD
    hits = pattern.findall(text)
    if strict and len(hits) != 1:
        return None
    for r, c in reversed(hits):
        try:
            move = (int(r), int(c))
        except ValueError:
            continue
        if move in admissible:
            return move
        if strict:
            return None
    return None


def _parse_kuhn(text: str, admissible, strict: bool):
    hits = _KUHN_WORD.findall(text)
    if strict:
        words = {_KUHN_ALIASES[h.upper()] for h in hits}
        if len(words) != 1:
            return None
        action = words.pop()
    elif hits:
        action = _KUHN_ALIASES[hits[-1].upper()]
    else:
        return None
    return action if action in admissible else None


def _parse_sokoban(text: str, admissible, limit: int, strict: bool):
    hits = [h.lower() for h in _DIRECTION.findall(text)]
    if not hits:
        return None
    if strict and len(hits) > limit:
        return None
    moves = tuple(hits[-limit:])
    if any(m not in admissible for m in moves):
        return None
    return moves


def _parse_body(kind: EnvKind, text: str, admissible, limit: int, strict: bool):
    if kind is EnvKind.TICTACTOE:
        return _parse_ttt(text, admissible, strict)
    if kind is EnvKind.KUHN:
        return _parse_kuhn(text, admissible, strict)
    return _parse_sokoban(text, admissible, limit, strict)


def parse_action(kind, raw, admissible, actions_per_turn: int = 3) -> ParsedAction:
    """Exact parse of the last ``<action>`` tag, else a lenient scan of the whole reply.

    The lenient grammar takes the last ``(r, c)`` pair (Tic-Tac-Toe), the last
    PASS/BET word (Kuhn; CHECK/FOLD read as PASS, CALL as BET) or the last
    ``actions_per_turn`` direction words (Sokoban).  Never raises.
    """
    try:
        kind = EnvKind(kind)
        text = _as_text(raw)
        admissible = {tuple(a) if isinstance(a, list) else a for a in admissible}
        tags = _TAG.findall(text)
        if tags:
            act = _parse_body(kind, tags[-1], admissible, actions_per_turn, strict=True)
            if act is not None:
                return ParsedAction(act, "tag")
        act = _parse_body(kind, text, admissible, actions_per_turn, strict=False)
        if act is not None:
            return ParsedAction(act, "lenient")
    except Exception:  # noqa: BLE001 - the parser must be total
        log.exception("action parser failed; treating reply as unparseable")
    return ParsedAction()


def random_admissible(kind, admissible, rng, actions_per_turn: int = 3):
    kind = EnvKind(kind)
    admissible = list(admissible)
    if kind is EnvKind.SOKOBAN:
        idx = rng.integers(0, len(admissible), size=actions_per_turn)
        return tuple(admissible[int(i)] for i in idx)
    return admissible[int(rng.integers(0, len(admissible)))]


@dataclass
class EndpointConfig:
    base_url: str = "http://localhost:8000/v1"
    model: str = "default"
    temperature: float = 0.7
    top_p: float = 0.8
    top_k: int = 20
    max_tokens: int = 4096
    api_key_env: str = "MAGE_API_KEY"
    timeout: float = 60.0
    retries: int = 2
    backoff: float = 1.0
    prompt_budget: int | None = None


class ChatClient:
    """Minimal chat-completion client: messages in, choices[0].message.content out."""

    def __init__(self, cfg: EndpointConfig, transport: httpx.BaseTransport | None = None):
        self.cfg = cfg
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(cfg.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(base_url=cfg.base_url.rstrip("/"), headers=headers,
                                  timeout=cfg.timeout, transport=transport)
        self.last_usage: dict = {}

    def close(self) -> None:
        self._http.close()

    def complete(self, prompt: str) -> str:
        c = self.cfg
        body = {
            "model": c.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": c.temperature,
            "top_p": c.top_p,
            "top_k": c.top_k,
            "max_tokens": c.max_tokens,
        }
        err: Exception | None = None
        for attempt in range(c.retries + 1):
            try:
                resp = self._http.post("/chat/completions", json=body)
                resp.raise_for_status()
                data = resp.json()
                self.last_usage = data.get("usage") or {}
                return data["choices"][0]["message"]["content"] or ""
            except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
                err = exc
                log.warning("chat completion attempt %d failed: %s", attempt + 1, exc)
                if attempt < c.retries and c.backoff > 0:
                    time.sleep(c.backoff * 2 ** attempt)
        raise TransportError(f"endpoint {c.base_url} unavailable: {err}")


class RemotePolicy:
    """Inference-only policy backed by a chat-completion endpoint."""

    def __init__(self, client, actions_per_turn: int = 3, prompt_budget: int | None = None):
        self.client = client
        self.actions_per_turn = actions_per_turn
        self.prompt_budget = prompt_budget

    def act(self, ctx, rng) -> ActionDecision:
        prompt = render_context_prompt(ctx, self.prompt_budget)
        reply = self.client.complete(prompt)
        usage = getattr(self.client, "last_usage", None) or {}
        length = int(usage.get("completion_tokens") or len(reply.split()))
        parsed = parse_action(ctx.env_kind, reply, ctx.admissible, self.actions_per_turn)
        if parsed.ok:
            return ActionDecision(parsed.action, None, reply, length)
        sub = random_admissible(ctx.env_kind, ctx.admissible, rng, self.actions_per_turn)
        return ActionDecision(sub, None, reply, length, flagged_invalid=True)

