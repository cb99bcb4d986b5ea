"""Deterministic multi-turn missing-premise interaction environment.

Dataset construction via premise masking, a two-action clarify/solve
environment with stage-specific rewards, pluggable policies, an HTTP
rollout service, and the evaluation-metric suite.
"""

from .core import (
    ActionKind,
    ContractError,
    EnvConfig,
    GrilError,
    Message,
    Outcome,
    Problem,
    ProblemKind,
    RewardBreakdown,
    RewardConfig,
    Role,
    Trajectory,
    TurnEvent,
    TurnRecord,
    validate_reward_config,
)
from .env import SessionState, StepResult, finalize, force_inject_premise, reset, step
from .judge import JudgeConfig, check_answer
from .parser import ParsedResponse, classify_action, extract_final_answer, parse_response
from .policy import PolicyKind, PolicySpec, RemoteEndpoint, rollout
from .reward import comp_reward, detect_reward, solve_reward, trajectory_reward

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "ContractError",
    "EnvConfig",
    "GrilError",
    "JudgeConfig",
    "Message",
    "Outcome",
    "ParsedResponse",
    "PolicyKind",
    "PolicySpec",
    "Problem",
    "ProblemKind",
    "RemoteEndpoint",
    "RewardBreakdown",
    "RewardConfig",
    "Role",
    "SessionState",
    "StepResult",
    "Trajectory",
    "TurnEvent",
    "TurnRecord",
    "check_answer",
    "classify_action",
    "comp_reward",
    "detect_reward",
    "extract_final_answer",
    "finalize",
    "force_inject_premise",
    "parse_response",
    "reset",
    "rollout",
    "solve_reward",
    "step",
    "trajectory_reward",
    "validate_reward_config",
]
