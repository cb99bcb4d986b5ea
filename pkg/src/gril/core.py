"""Shared domain types for the missing-premise interaction environment.

Everything downstream (parser, reward, env, datagen, metrics, service)
speaks in these types. All of them are immutable value objects after
construction and serialize to plain JSON objects with snake_case field
names; those JSON forms are the wire format of the dataset files, the
session service, and the trajectory logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional


class GrilError(Exception):
    """Base class for all library errors."""


class ContractError(GrilError):
    """A caller violated a documented precondition or lifecycle rule."""


class ProblemKind(str, Enum):
    INCOMPLETE = "incomplete"
    COMPLETE = "complete"


class ActionKind(str, Enum):
    SOLVE = "solve"
    CLARIFY = "clarify"
    MALFORMED = "malformed"


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class Outcome(str, Enum):
    SOLVED_CORRECT = "solved_correct"
    SOLVED_WRONG = "solved_wrong"
    EXHAUSTED_TURNS = "exhausted_turns"
    GRACEFUL_STOP = "graceful_stop"


class TurnEvent(str, Enum):
    PREMISE_PROVIDED = "premise_provided"
    NEGATIVE_FEEDBACK = "negative_feedback"
    UNNECESSARY_CLARIFICATION = "unnecessary_clarification"
    FORMAT_ERROR = "format_error"
    TERMINAL = "terminal"
    # Extension of the base event set: emitted when the environment answers
    # a clarification request evasively instead of providing the premise
    # (robustness condition); keeps those turns auditable.
    UNINFORMATIVE_RESPONSE = "uninformative_response"


@dataclass(frozen=True)
class Problem:
    """One task item: a question that may or may not be missing a premise."""

    id: str
    kind: ProblemKind
    question: str
    gold_answer: str
    missing_premise: Optional[str] = None
    source: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.gold_answer:
            raise ContractError(f"problem {self.id!r}: gold_answer must be non-empty")
        if self.kind is ProblemKind.INCOMPLETE and not self.missing_premise:
            raise ContractError(
                f"problem {self.id!r}: incomplete problems must carry a missing premise"
            )
        if self.kind is ProblemKind.COMPLETE and self.missing_premise:
            raise ContractError(
                f"problem {self.id!r}: complete problems must not carry a missing premise"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "question": self.question,
            "gold_answer": self.gold_answer,
            "missing_premise": self.missing_premise,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Problem":
        return cls(
            id=d["id"],
            kind=ProblemKind(d["kind"]),
            question=d["question"],
            gold_answer=d["gold_answer"],
            missing_premise=d.get("missing_premise"),
            source=d.get("source"),
        )


@dataclass(frozen=True)
class Message:
    """One transmitted message; content is exact, never normalized."""

    role: Role
    content: str
    turn: int = 0  # 0 for the pre-dialogue system/user prompt block

    def __post_init__(self) -> None:
        if self.turn < 0:
            raise ContractError("message turn must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {"role": self.role.value, "content": self.content, "turn": self.turn}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Message":
        return cls(role=Role(d["role"]), content=d["content"], turn=d.get("turn", 0))


DEFAULT_FORMAT_REMINDER = (
    "Always output: <think> [Your thoughts] </think> <answer> [your answer] </answer> "
    "with no extra text. Strictly follow this format."
)

DEFAULT_SYSTEM_PROMPT = "You're a helpful assistant."

DEFAULT_USER_PROMPT = (
    "Please solve the following problem, strictly adhering to this format:\n"
    "1.  **<think>...</think>**: Must contain the complete, step-by-step reasoning "
    "process. If information is missing, state why here and terminate your thinking "
    "process.\n"
    "2.  **<answer>...</answer>**: Must ONLY contain the final answer . If information "
    "is insufficient, the answer must be 'insufficient information'."
)

# The detection feedback keeps the source transcripts' literal text, including
# the missing space and the "reasonig" misspelling, so golden replays match
# byte-for-byte. Override via EnvConfig.feedback_templates if undesired.
DEFAULT_FEEDBACK_TEMPLATES: dict[str, str] = {
    "detect": (
        "Successfully detected a missing premise. Here is the missed information: "
        "{premise}. Please solve the problem now."
        "You should give detailed reasonig steps"
    ),
    "negative": "That is incorrect. Please try again.",
    "unnecessary": "No additional information is needed. Please solve the problem.",
    "format_error": (
        "Your previous response did not follow the required format. Please try again."
    ),
    "reminder": DEFAULT_FORMAT_REMINDER,
}

REQUIRED_TEMPLATE_KEYS = frozenset(
    {"detect", "negative", "unnecessary", "format_error", "reminder"}
)


@dataclass(frozen=True)
class EnvConfig:
    """Environment behavior knobs. Defaults reproduce the reference setting."""

    max_turns: int = 4
    feedback_templates: dict[str, str] = field(
        default_factory=lambda: dict(DEFAULT_FEEDBACK_TEMPLATES)
    )
    prompt_template: str = DEFAULT_USER_PROMPT
    system_prompt: str = DEFAULT_SYSTEM_PROMPT
    strict_format: bool = False
    # Robustness hooks (in-process only; never serialized):
    # premise_transform rewrites the rendered detection feedback body (noisy
    # feedback condition); uninformative_provider, when set, replaces premise
    # injection with an evasive reply (uninformative response condition).
    premise_transform: Optional[Callable[[str], str]] = None
    uninformative_provider: Optional[Callable[[], str]] = None

    def __post_init__(self) -> None:
        if self.max_turns < 1:
            raise ContractError("max_turns must be >= 1")
        missing = REQUIRED_TEMPLATE_KEYS - self.feedback_templates.keys()
        if missing:
            raise ContractError(f"feedback_templates missing keys: {sorted(missing)}")


@dataclass(frozen=True)
class RewardConfig:
    """Reward shaping parameters; defaults are the reference hyperparameters."""

    alpha: float = 0.3
    beta: float = 0.7
    gamma_d: float = 0.5
    lam: float = 2.0
    r_base: float = 1.0
    r_correct: float = 1.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma_d": self.gamma_d,
            "lambda": self.lam,
            "r_base": self.r_base,
            "r_correct": self.r_correct,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RewardConfig":
        return cls(
            alpha=d.get("alpha", 0.3),
            beta=d.get("beta", 0.7),
            gamma_d=d.get("gamma_d", 0.5),
            lam=d.get("lambda", d.get("lam", 2.0)),
            r_base=d.get("r_base", 1.0),
            r_correct=d.get("r_correct", 1.0),
        )


def validate_reward_config(cfg: RewardConfig) -> list[str]:
    """Return every violated invariant as a description; empty means valid."""
    violations: list[str] = []
    if not (0.0 < cfg.gamma_d < 1.0):
        violations.append("gamma_d must lie strictly in (0,1)")
    if cfg.r_base <= 0:
        violations.append("r_base must be positive")
    if cfg.r_correct <= 0:
        violations.append("r_correct must be positive")
    if cfg.lam < 0:
        violations.append("lambda must be non-negative")
    if cfg.alpha < 0:
        violations.append("alpha must be non-negative")
    if cfg.beta < 0:
        violations.append("beta must be non-negative")
    return violations


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-trajectory reward components and their combined total."""

    detect: float
    solve: float
    comp: float
    n_prior: int
    total: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "detect": self.detect,
            "solve": self.solve,
            "comp": self.comp,
            "n_prior": self.n_prior,
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RewardBreakdown":
        return cls(
            detect=d["detect"],
            solve=d["solve"],
            comp=d["comp"],
            n_prior=d["n_prior"],
            total=d["total"],
        )


@dataclass(frozen=True)
class TurnRecord:
    """Record of one assistant step and the environment's reaction."""

    turn: int
    assistant: Message
    action: ActionKind
    event: TurnEvent
    turn_reward: float
    feedback: Optional[Message] = None

    def __post_init__(self) -> None:
        if self.turn < 1:
            raise ContractError("turn records are 1-based")

    def to_dict(self) -> dict[str, Any]:
        return {
            "turn": self.turn,
            "assistant": self.assistant.to_dict(),
            "action": self.action.value,
            "event": self.event.value,
            "turn_reward": self.turn_reward,
            "feedback": self.feedback.to_dict() if self.feedback else None,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TurnRecord":
        return cls(
            turn=d["turn"],
            assistant=Message.from_dict(d["assistant"]),
            action=ActionKind(d["action"]),
            event=TurnEvent(d["event"]),
            turn_reward=d["turn_reward"],
            feedback=Message.from_dict(d["feedback"]) if d.get("feedback") else None,
        )


@dataclass(frozen=True)
class Trajectory:
    """Finalized episode: the unit of evaluation and training export."""

    problem_id: str
    turns: tuple[TurnRecord, ...]
    outcome: Outcome
    reward: RewardBreakdown
    detected: bool
    detection_turn: Optional[int] = None
    problem_kind: ProblemKind = ProblemKind.COMPLETE

    def __post_init__(self) -> None:
        if self.detected != (self.detection_turn is not None):
            raise ContractError("detection_turn must be present iff detected")

    def to_dict(self) -> dict[str, Any]:
        return {
            "problem_id": self.problem_id,
            "problem_kind": self.problem_kind.value,
            "turns": [t.to_dict() for t in self.turns],
            "outcome": self.outcome.value,
            "reward": self.reward.to_dict(),
            "detected": self.detected,
            "detection_turn": self.detection_turn,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Trajectory":
        return cls(
            problem_id=d["problem_id"],
            problem_kind=ProblemKind(d.get("problem_kind", "complete")),
            turns=tuple(TurnRecord.from_dict(t) for t in d["turns"]),
            outcome=Outcome(d["outcome"]),
            reward=RewardBreakdown.from_dict(d["reward"]),
            detected=d["detected"],
            detection_turn=d.get("detection_turn"),
        )


def to_json(obj: Any) -> str:
    """Canonical single-line JSON used by dataset files and trajectory logs."""
    d = obj.to_dict() if hasattr(obj, "to_dict") else obj
    return json.dumps(d, ensure_ascii=False, separators=(",", ":"))
