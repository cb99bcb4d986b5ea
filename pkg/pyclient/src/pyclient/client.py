"""Remote environment handle speaking the gril service wire protocol.

The adapter is a pure transport: every reward, event, and outcome comes from
the service unmodified. One handle drives one session at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Sequence

import requests


class AdapterError(Exception):
    """Base adapter failure; carries the wire error body when one exists."""

    def __init__(self, message: str, body: Optional[dict] = None):
        super().__init__(message)
        self.body = body or {}


class TransportError(AdapterError):
    """The service was unreachable or returned an unreadable response."""


class NotFoundError(AdapterError):
    """Unknown problem_ref or session (404)."""


class SessionConflictError(AdapterError):
    """Step on a finished session or a concurrent step (409)."""


class SessionNotStartedError(AdapterError):
    """step() called before reset()."""


@dataclass(frozen=True)
class StepResult:
    feedback_text: Optional[str]
    turn_reward: float
    done: bool
    info: dict


_ERROR_BY_STATUS = {404: NotFoundError, 409: SessionConflictError}


@dataclass
class RemoteEnvHandle:
    base_url: str
    timeout_s: float = 30.0
    session_id: Optional[str] = None
    last_turn: int = 0
    _http: requests.Session = field(default_factory=requests.Session, repr=False)

    def _request(self, method: str, path: str, **kwargs) -> dict:
        url = self.base_url.rstrip("/") + path
        try:
            resp = self._http.request(method, url, timeout=self.timeout_s, **kwargs)
        except requests.RequestException as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        try:
            body = resp.json()
        except ValueError as exc:
            raise TransportError(
                f"non-JSON response (status {resp.status_code})"
            ) from exc
        if resp.status_code >= 400:
            exc_type = _ERROR_BY_STATUS.get(resp.status_code, AdapterError)
            raise exc_type(
                body.get("error", f"HTTP {resp.status_code}"), body=body
            )
        return body

    def healthy(self) -> bool:
        try:
            return self._request("GET", "/v1/healthz").get("status") == "ok"
        except AdapterError:
            return False

    def reset(
        self,
        problem_ref: Optional[str] = None,
        problem: Optional[dict] = None,
        overrides: Optional[dict] = None,
    ) -> list[dict]:
        """Create a session; return the prompt messages.

        A live session on this handle is abandoned: the service keeps it, but
        the handle now drives the new one.
        """
        payload: dict[str, Any] = {}
        if problem is not None:
            payload["problem"] = problem
        elif problem_ref is not None:
            payload["problem_ref"] = problem_ref
        else:
            raise AdapterError("reset requires problem_ref or problem")
        if overrides:
            payload["overrides"] = overrides
        body = self._request("POST", "/v1/sessions", json=payload)
        self.session_id = body["session_id"]
        self.last_turn = 0
        return body["messages"]

    def step(self, assistant_text: str) -> StepResult:
        """Advance the live session one turn."""
        if self.session_id is None:
            raise SessionNotStartedError("step() before reset()")
        body = self._request(
            "POST",
            f"/v1/sessions/{self.session_id}/step",
            json={"assistant_text": assistant_text},
        )
        self.last_turn = body["turn"]
        info = {
            "event": body["event"],
            "outcome": body["outcome"],
            "turn": body["turn"],
        }
        if "trajectory" in body:
            info["trajectory"] = body["trajectory"]
            info["total_reward"] = body["trajectory"]["reward"]["total"]
        feedback = body.get("feedback")
        return StepResult(
            feedback_text=feedback["content"] if feedback else None,
            turn_reward=body["turn_reward"],
            done=body["done"],
            info=info,
        )

    def trajectory(self) -> dict:
        """Fetch the final trajectory, or the partial turns of a live session."""
        if self.session_id is None:
            raise SessionNotStartedError("trajectory() before reset()")
        return self._request("GET", f"/v1/sessions/{self.session_id}/trajectory")


def run_episode(
    handle: RemoteEnvHandle,
    script: Sequence[str],
    problem_ref: Optional[str] = None,
    problem: Optional[dict] = None,
) -> Iterator[StepResult]:
    """Reset, then yield one StepResult per scripted response until done."""
    handle.reset(problem_ref=problem_ref, problem=problem)
    for text in script:
        result = handle.step(text)
        yield result
        if result.done:
            return
