"""Decision-makers that map a session's visible history to assistant text.

Scripted policies exist for replay and testing; the remote policy speaks the
standard chat-completions wire shape so any serving stack can be plugged in.
"""

from __future__ import annotations

import os
import random
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import requests

from .core import ContractError, EnvConfig, GrilError, Message, Problem, Role, Trajectory
from .env import finalize, reset, step
from .judge import JudgeConfig
from .core import RewardConfig


class PolicyKind(str, Enum):
    SCRIPTED = "scripted"
    ALWAYS_SOLVE = "always_solve"
    ALWAYS_CLARIFY = "always_clarify"
    REMOTE = "remote"


class ScriptExhaustedError(GrilError):
    """A scripted policy ran out of responses."""


class TransportError(GrilError):
    """Remote call failed after all retries."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


class RolloutError(GrilError):
    """A policy failed mid-episode; carries the partial state for diagnosis."""

    def __init__(self, message: str, partial_records):
        super().__init__(message)
        self.partial_records = list(partial_records)


@dataclass(frozen=True)
class RemoteEndpoint:
    base_url: str
    model_name: str
    api_key_env: str = "GRIL_API_KEY"
    temperature: float = 1.0
    max_new_tokens: int = 1024
    timeout_s: float = 60.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if not self.base_url.startswith(("http://", "https://")):
            raise ContractError("base_url must be an http(s) URL")
        if self.max_retries < 0:
            raise ContractError("max_retries must be >= 0")


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    script: Optional[tuple[str, ...]] = None
    endpoint: Optional[RemoteEndpoint] = None

    def __post_init__(self) -> None:
        if self.kind is PolicyKind.SCRIPTED and not self.script:
            raise ContractError("scripted policy requires a non-empty script")
        if self.kind is PolicyKind.REMOTE and self.endpoint is None:
            raise ContractError("remote policy requires an endpoint")


CLARIFY_RESPONSE = (
    "<think>Missing information.</think><answer>insufficient information</answer>"
)
# Deliberately implausible so it never matches a real gold answer.
ALWAYS_SOLVE_RESPONSE = "<think>Attempting a solution.</think><answer>-424242</answer>"

_BACKOFF_INITIAL_S = 0.5
_BACKOFF_FACTOR = 2.0
_BACKOFF_JITTER = 0.2


def chat_complete(
    endpoint: RemoteEndpoint,
    messages: list[dict],
    temperature: Optional[float] = None,
    rng: Optional[random.Random] = None,
    session: Optional[requests.Session] = None,
) -> str:
    """POST a chat-completions request; return the first choice's content."""
    url = endpoint.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(endpoint.api_key_env, "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    payload = {
        "model": endpoint.model_name,
        "messages": messages,
        "temperature": endpoint.temperature if temperature is None else temperature,
        "max_tokens": endpoint.max_new_tokens,
    }
    rng = rng or random.Random()
    http = session or requests
    delay = _BACKOFF_INITIAL_S
    last_error = "no attempt made"
    attempts = 0
    for attempt in range(endpoint.max_retries + 1):
        attempts = attempt + 1
        try:
            resp = http.post(url, json=payload, headers=headers, timeout=endpoint.timeout_s)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            last_error = f"{type(exc).__name__}: {exc}"
        if attempt < endpoint.max_retries:
            jitter = 1.0 + rng.uniform(-_BACKOFF_JITTER, _BACKOFF_JITTER)
            time.sleep(delay * jitter)
            delay *= _BACKOFF_FACTOR
    raise TransportError(last_error, attempts=attempts)


@dataclass
class _ScriptCursor:
    """Per-rollout cursor over a script; confined to one rollout."""

    script: tuple[str, ...]
    index: int = 0

    def next(self) -> str:
        if self.index >= len(self.script):
            raise ScriptExhaustedError(
                f"script of length {len(self.script)} exhausted"
            )
        text = self.script[self.index]
        self.index += 1
        return text


def next_response(
    policy: PolicySpec,
    history: list[Message],
    cursor: Optional[_ScriptCursor] = None,
) -> str:
    """Produce the next assistant text for the given visible history."""
    if not history or history[-1].role is Role.ASSISTANT:
        raise ContractError("history must end with an environment message")
    if policy.kind is PolicyKind.ALWAYS_CLARIFY:
        return CLARIFY_RESPONSE
    if policy.kind is PolicyKind.ALWAYS_SOLVE:
        return ALWAYS_SOLVE_RESPONSE
    if policy.kind is PolicyKind.SCRIPTED:
        if cursor is None:
            # Stateless call: position equals assistant turns so far.
            assert policy.script is not None
            n_done = sum(1 for m in history if m.role is Role.ASSISTANT)
            if n_done >= len(policy.script):
                raise ScriptExhaustedError(
                    f"script of length {len(policy.script)} exhausted"
                )
            return policy.script[n_done]
        return cursor.next()
    assert policy.endpoint is not None
    wire = [{"role": m.role.value, "content": m.content} for m in history]
    return chat_complete(policy.endpoint, wire)


def rollout(
    policy: PolicySpec,
    problem: Problem,
    env_cfg: EnvConfig = EnvConfig(),
    reward_cfg: RewardConfig = RewardConfig(),
    judge_cfg: JudgeConfig = JudgeConfig(),
) -> Trajectory:
    """Run one full episode: reset, alternate policy/environment, finalize."""
    state = reset(problem, env_cfg)
    cursor = _ScriptCursor(policy.script) if policy.kind is PolicyKind.SCRIPTED else None
    while not state.done:
        try:
            text = next_response(policy, state.history, cursor=cursor)
        except GrilError as exc:
            raise RolloutError(
                f"policy failed on problem {problem.id!r}: {exc}", state.records
            ) from exc
        step(state, text, env_cfg, reward_cfg, judge_cfg)
    return finalize(state, reward_cfg)
