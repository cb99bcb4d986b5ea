"""HTTP session service: run environment sessions over the wire.

External trainers create a session per problem, post assistant texts, and
read back feedback, per-turn rewards, and the finalized trajectory. Wire
bodies are the canonical JSON forms of the core types; error bodies are
{"error": text, "detail": object}.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .core import (
    ContractError,
    EnvConfig,
    Problem,
    RewardConfig,
    Trajectory,
    to_json,
    validate_reward_config,
)
from .env import SessionState, finalize, reset, step
from .judge import JudgeConfig

DEFAULT_TTL_S = 3600.0


@dataclass
class _Session:
    session_id: str
    state: SessionState
    env_cfg: EnvConfig
    reward_cfg: RewardConfig
    judge_cfg: JudgeConfig
    created_at: float = field(default_factory=time.monotonic)
    finished_at: Optional[float] = None
    trajectory: Optional[Trajectory] = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """Thread-safe map of live and recently finished sessions."""

    def __init__(self, ttl_s: float = DEFAULT_TTL_S):
        self.ttl_s = ttl_s
        self._sessions: dict[str, _Session] = {}
        self._evicted: set[str] = set()
        self._guard = threading.Lock()

    def add(self, session: _Session) -> None:
        with self._guard:
            self._sessions[session.session_id] = session

    def get(self, session_id: str) -> Optional[_Session]:
        self.evict_expired()
        with self._guard:
            return self._sessions.get(session_id)

    def was_evicted(self, session_id: str) -> bool:
        with self._guard:
            return session_id in self._evicted

    def evict_expired(self) -> None:
        now = time.monotonic()
        with self._guard:
            expired = [
                sid
                for sid, s in self._sessions.items()
                if s.finished_at is not None and now - s.finished_at > self.ttl_s
            ]
            for sid in expired:
                del self._sessions[sid]
                self._evicted.add(sid)

    def live_sessions(self) -> list["_Session"]:
        with self._guard:
            return [s for s in self._sessions.values() if not s.state.done]


def _error(status: int, message: str, detail: Optional[dict] = None) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": message, "detail": detail or {}}
    )


def _merge_env_cfg(base: EnvConfig, overrides: dict[str, Any]) -> EnvConfig:
    allowed = {
        "max_turns",
        "feedback_templates",
        "prompt_template",
        "system_prompt",
        "strict_format",
    }
    bad = set(overrides) - allowed
    if bad:
        raise ContractError(f"unknown env override keys: {sorted(bad)}")
    kwargs: dict[str, Any] = {}
    for key in allowed & set(overrides):
        if key == "feedback_templates":
            merged = dict(base.feedback_templates)
            merged.update(overrides[key])
            kwargs[key] = merged
        else:
            kwargs[key] = overrides[key]
    return replace(base, **kwargs) if kwargs else base


def create_app(
    dataset: Optional[dict[str, Problem]] = None,
    env_cfg: EnvConfig = EnvConfig(),
    reward_cfg: RewardConfig = RewardConfig(),
    judge_cfg: JudgeConfig = JudgeConfig(),
    log_path: Optional[str] = None,
    ttl_s: float = DEFAULT_TTL_S,
) -> FastAPI:
    """Build the service application around a problem dataset."""
    problems = dict(dataset or {})
    store = SessionStore(ttl_s=ttl_s)
    log_lock = threading.Lock()

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        drain()

    app = FastAPI(title="gril-env", version="0.1.0", lifespan=lifespan)
    app.state.store = store

    def flush_trajectory(traj: Trajectory, interrupted: bool = False) -> None:
        if log_path is None:
            return
        record = traj.to_dict() if not interrupted else {**traj.to_dict(), "interrupted": True}
        with log_lock:
            with open(log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n")

    @app.get("/v1/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/v1/problems/{problem_id}")
    def get_problem(problem_id: str):
        problem = problems.get(problem_id)
        if problem is None:
            return _error(404, "problem not found", {"problem_ref": problem_id})
        return problem.to_dict()

    @app.post("/v1/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        overrides = body.get("overrides") or {}
        try:
            if "problem" in body:
                problem = Problem.from_dict(body["problem"])
            else:
                ref = body.get("problem_ref")
                problem = problems.get(ref) if ref else None
                if problem is None:
                    return _error(404, "problem not found", {"problem_ref": ref})
            session_env = _merge_env_cfg(env_cfg, overrides.get("env", {}))
            session_reward = (
                RewardConfig.from_dict({**reward_cfg.to_dict(), **overrides["reward"]})
                if "reward" in overrides
                else reward_cfg
            )
            violations = validate_reward_config(session_reward)
            if violations:
                return _error(400, "invalid reward config", {"violations": violations})
            session_judge = (
                JudgeConfig(**overrides["judge"]) if "judge" in overrides else judge_cfg
            )
            state = reset(problem, session_env)
        except (ContractError, KeyError, TypeError, ValueError) as exc:
            return _error(400, "invalid session request", {"reason": str(exc)})

        session = _Session(
            session_id=uuid.uuid4().hex,
            state=state,
            env_cfg=session_env,
            reward_cfg=session_reward,
            judge_cfg=session_judge,
        )
        store.add(session)
        return {
            "session_id": session.session_id,
            "messages": [m.to_dict() for m in state.history],
        }

    @app.post("/v1/sessions/{session_id}/step")
    async def step_session(session_id: str, request: Request):
        session = store.get(session_id)
        if session is None:
            detail = {"session_id": session_id}
            if store.was_evicted(session_id):
                detail["hint"] = "session evicted after retention TTL"
            return _error(404, "session not found", detail)
        body = await request.json()
        text = body.get("assistant_text")
        if not isinstance(text, str):
            return _error(400, "assistant_text must be a string", {})
        if not session.lock.acquire(blocking=False):
            return _error(409, "concurrent step on session", {"session_id": session_id})
        try:
            if session.state.done:
                return _error(409, "session already finished", {"session_id": session_id})
            result = step(
                session.state, text, session.env_cfg, session.reward_cfg, session.judge_cfg
            )
            payload: dict[str, Any] = {
                "feedback": result.feedback.to_dict() if result.feedback else None,
                "event": result.event.value,
                "turn_reward": result.turn_reward,
                "done": result.done,
                "turn": session.state.turn,
                "outcome": result.outcome_if_done.value if result.outcome_if_done else None,
            }
            if result.done:
                session.trajectory = finalize(session.state, session.reward_cfg)
                session.finished_at = time.monotonic()
                flush_trajectory(session.trajectory)
                payload["trajectory"] = session.trajectory.to_dict()
            return payload
        finally:
            session.lock.release()

    @app.get("/v1/sessions/{session_id}/trajectory")
    def get_trajectory(session_id: str):
        session = store.get(session_id)
        if session is None:
            detail = {"session_id": session_id}
            if store.was_evicted(session_id):
                detail["hint"] = "session evicted after retention TTL"
            return _error(404, "session not found", detail)
        if session.trajectory is not None:
            return {"done": True, "trajectory": session.trajectory.to_dict()}
        return {
            "done": False,
            "turns": [rec.to_dict() for rec in session.state.records],
        }

    def drain() -> None:
        # Live sessions are flushed as explicit partials, never as finished
        # trajectories.
        if log_path is None:
            return
        for session in store.live_sessions():
            record = {
                "problem_id": session.state.problem.id,
                "interrupted": True,
                "turns": [rec.to_dict() for rec in session.state.records],
            }
            with log_lock:
                with open(log_path, "a", encoding="utf-8") as fh:
                    fh.write(
                        json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n"
                    )

    return app


def canonical_trajectory_json(trajectory_dict: dict) -> str:
    """Canonical dump used for remote/in-process equivalence checks."""
    return json.dumps(trajectory_dict, ensure_ascii=False, separators=(",", ":"))
