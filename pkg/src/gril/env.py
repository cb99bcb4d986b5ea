"""Interactive session environment: lifecycle, transitions, feedback, rewards.

A session wraps one problem. The assistant either attempts a solution or
requests clarification each turn; the environment reacts asymmetrically by
problem type: clarifying on an incomplete problem is the only way to obtain
the withheld premise, and a correct solve is the only way to terminate
successfully. Everything is deterministic given the problem, the configs,
and the sequence of assistant texts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import (
    ActionKind,
    ContractError,
    EnvConfig,
    Message,
    Outcome,
    Problem,
    ProblemKind,
    RewardConfig,
    Role,
    Trajectory,
    TurnEvent,
    TurnRecord,
)
from .judge import JudgeConfig, check_answer
from .parser import classify_action, extract_final_answer, normalize_answer, parse_response
from .reward import detect_reward, trajectory_reward


@dataclass
class SessionState:
    """Mutable per-session state; strictly single-writer."""

    problem: Problem
    history: list[Message] = field(default_factory=list)
    turn: int = 0  # completed assistant steps
    premise_provided: bool = False
    detected: bool = False
    detection_turn: Optional[int] = None
    unnecessary_clarifications: int = 0
    done: bool = False
    outcome: Optional[Outcome] = None
    records: list[TurnRecord] = field(default_factory=list)


@dataclass(frozen=True)
class StepResult:
    feedback: Optional[Message]
    event: TurnEvent
    turn_reward: float
    done: bool
    outcome_if_done: Optional[Outcome] = None


def _render_turn_prompt(turn: int, body: str) -> str:
    return f"Turn {turn}:\nState:\n{body}"


def reset(problem: Problem, env_cfg: EnvConfig = EnvConfig()) -> SessionState:
    """Open a session: system prompt plus the turn-1 instruction block."""
    reminder = env_cfg.feedback_templates["reminder"]
    user_block = (
        env_cfg.prompt_template
        + "\n\n"
        + _render_turn_prompt(1, problem.question + "\n" + reminder)
    )
    history = [
        Message(role=Role.SYSTEM, content=env_cfg.system_prompt, turn=0),
        Message(role=Role.USER, content=user_block, turn=0),
    ]
    return SessionState(problem=problem, history=history)


def _feedback_message(env_cfg: EnvConfig, body: str, turn: int) -> Message:
    # Every environment reply carries the output-format reminder line.
    reminder = env_cfg.feedback_templates["reminder"]
    return Message(role=Role.USER, content=body + "\n" + reminder, turn=turn)


def step(
    state: SessionState,
    assistant_text: str,
    env_cfg: EnvConfig = EnvConfig(),
    reward_cfg: RewardConfig = RewardConfig(),
    judge_cfg: JudgeConfig = JudgeConfig(),
) -> StepResult:
    """Advance the session by one assistant message."""
    if state.done:
        raise ContractError("cannot step a finished session")

    n = state.turn + 1
    assistant = Message(role=Role.ASSISTANT, content=assistant_text, turn=n)
    state.history.append(assistant)

    parsed = parse_response(assistant_text, strict=env_cfg.strict_format)
    action = classify_action(parsed)
    templates = env_cfg.feedback_templates

    event: TurnEvent
    body: Optional[str] = None
    turn_reward = 0.0
    outcome: Optional[Outcome] = None

    solving_phase = state.premise_provided or state.problem.kind is ProblemKind.COMPLETE

    if action is ActionKind.MALFORMED:
        event = TurnEvent.FORMAT_ERROR
        body = templates["format_error"]
    elif not solving_phase and action is ActionKind.CLARIFY:
        if env_cfg.uninformative_provider is not None:
            # Robustness condition: the premise is never handed over.
            event = TurnEvent.UNINFORMATIVE_RESPONSE
            body = env_cfg.uninformative_provider()
            if not state.detected:
                state.detected = True
                state.detection_turn = n
                turn_reward = detect_reward(n - 1, reward_cfg)
        else:
            event = TurnEvent.PREMISE_PROVIDED
            body = templates["detect"].format(premise=state.problem.missing_premise)
            if env_cfg.premise_transform is not None:
                body = env_cfg.premise_transform(body)
            state.detected = True
            state.detection_turn = n
            state.premise_provided = True
            turn_reward = detect_reward(n - 1, reward_cfg)
    elif not solving_phase and action is ActionKind.SOLVE:
        event = TurnEvent.NEGATIVE_FEEDBACK
        body = templates["negative"]
    elif action is ActionKind.CLARIFY:
        # Solving phase: no additional information exists (or it was already
        # provided); the clarify is unnecessary either way.
        event = TurnEvent.UNNECESSARY_CLARIFICATION
        body = templates["unnecessary"]
        state.unnecessary_clarifications += 1
    else:  # solving-phase Solve
        candidate = extract_final_answer(parsed)
        gold = normalize_answer(state.problem.gold_answer)
        if check_answer(candidate, gold, judge_cfg):
            event = TurnEvent.TERMINAL
            body = None
            turn_reward = reward_cfg.r_correct
            outcome = Outcome.SOLVED_CORRECT
        else:
            event = TurnEvent.NEGATIVE_FEEDBACK
            body = templates["negative"]

    state.turn = n
    done = outcome is not None
    if not done and n >= env_cfg.max_turns:
        done = True
        if (
            env_cfg.uninformative_provider is not None
            and state.problem.kind is ProblemKind.INCOMPLETE
            and not state.premise_provided
            and action is ActionKind.CLARIFY
        ):
            outcome = Outcome.GRACEFUL_STOP
        else:
            outcome = Outcome.EXHAUSTED_TURNS

    feedback: Optional[Message] = None
    if not done and body is not None:
        feedback = _feedback_message(env_cfg, body, turn=n)
        state.history.append(
            Message(
                role=Role.USER,
                content=_render_turn_prompt(n + 1, feedback.content),
                turn=n,
            )
        )

    state.records.append(
        TurnRecord(
            turn=n,
            assistant=assistant,
            action=action,
            event=event,
            turn_reward=turn_reward,
            feedback=feedback,
        )
    )
    if done:
        state.done = True
        state.outcome = outcome

    return StepResult(
        feedback=feedback,
        event=event,
        turn_reward=turn_reward,
        done=done,
        outcome_if_done=outcome,
    )


def force_inject_premise(state: SessionState, env_cfg: EnvConfig = EnvConfig()) -> Message:
    """Inject the missing premise regardless of the model's last action.

    Used by the forced-feedback evaluation protocol; grants no reward and
    does not mark the episode as detected.
    """
    if state.done:
        raise ContractError("cannot inject into a finished session")
    if state.problem.kind is not ProblemKind.INCOMPLETE:
        raise ContractError("only incomplete problems carry a premise to inject")
    if state.premise_provided:
        raise ContractError("premise already provided")
    body = env_cfg.feedback_templates["detect"].format(
        premise=state.problem.missing_premise
    )
    state.premise_provided = True
    feedback = _feedback_message(env_cfg, body, turn=state.turn)
    state.history.append(
        Message(
            role=Role.USER,
            content=_render_turn_prompt(state.turn + 1, feedback.content),
            turn=state.turn,
        )
    )
    return feedback


def finalize(state: SessionState, reward_cfg: RewardConfig = RewardConfig()) -> Trajectory:
    """Assemble the trajectory and its reward breakdown for a finished session."""
    if not state.done or state.outcome is None:
        raise ContractError("cannot finalize a live session")
    n_prior = (state.detection_turn - 1) if state.detection_turn is not None else 0
    breakdown = trajectory_reward(
        kind=state.problem.kind,
        detected=state.detected,
        n_prior=n_prior,
        solved_correct=state.outcome is Outcome.SOLVED_CORRECT,
        unnecessary_clarified=(
            state.problem.kind is ProblemKind.COMPLETE
            and state.unnecessary_clarifications > 0
        ),
        cfg=reward_cfg,
    )
    return Trajectory(
        problem_id=state.problem.id,
        problem_kind=state.problem.kind,
        turns=tuple(state.records),
        outcome=state.outcome,
        reward=breakdown,
        detected=state.detected,
        detection_turn=state.detection_turn,
    )
