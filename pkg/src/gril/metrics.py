"""Evaluation metrics over trajectory sets and raw transcripts.

Covers the standard report (success rate, premise detection, turns, length),
the uncertainty-gap measurement over generated text, turn-1 detection as a
binary classification, the forced-feedback protocol, and the text fixtures
for the robustness conditions.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .core import (
    ActionKind,
    ContractError,
    EnvConfig,
    GrilError,
    Outcome,
    Problem,
    ProblemKind,
    RewardConfig,
    Trajectory,
    TurnEvent,
)
from .env import finalize, force_inject_premise, reset, step
from .judge import JudgeConfig
from .policy import PolicySpec, PolicyKind, _ScriptCursor, next_response

_TOKEN_RE = re.compile(r"\S+")

DEFAULT_TOKENIZER_NAME = "whitespace"

DEFAULT_UNCERTAINTY_LEXICON: tuple[str, ...] = (
    "we need to know",
    "this requires",
    "cannot determine",
    "does not provide",
    "insufficient information",
    "without knowing",
)

EVASIVE_POOL: tuple[str, ...] = (
    "I don't know",
    "Don't ask me.",
    "No idea, sorry.",
    "I really can't say.",
    "Why are you asking me?",
)


def whitespace_spans(text: str) -> list[tuple[int, int]]:
    """Token (start, end) character spans under whitespace tokenization."""
    return [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def count_tokens(text: str) -> int:
    return len(whitespace_spans(text))


def lexicon_hash(lexicon: Sequence[str]) -> str:
    joined = "\n".join(lexicon)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class EvalReport:
    success_rate: float
    premise_detection: float
    avg_turns: float
    avg_length_tokens: float
    n_episodes: int
    tokenizer: str = DEFAULT_TOKENIZER_NAME

    def to_dict(self) -> dict:
        return {
            "success_rate": self.success_rate,
            "premise_detection": self.premise_detection,
            "avg_turns": self.avg_turns,
            "avg_length_tokens": self.avg_length_tokens,
            "n_episodes": self.n_episodes,
            "tokenizer": self.tokenizer,
        }


@dataclass(frozen=True)
class GapMeasurement:
    total_tokens: int
    suspect_position: Optional[int]
    gap_ratio: float

    def to_dict(self) -> dict:
        return {
            "total_tokens": self.total_tokens,
            "suspect_position": self.suspect_position,
            "gap_ratio": self.gap_ratio,
        }


@dataclass(frozen=True)
class ForcedFeedbackReport:
    dcr: float
    ncr: float
    n_detected: int
    n_not_detected: int

    def to_dict(self) -> dict:
        return {
            "dcr": self.dcr,
            "ncr": self.ncr,
            "n_detected": self.n_detected,
            "n_not_detected": self.n_not_detected,
        }


@dataclass(frozen=True)
class DetectionClassificationReport:
    recall: float
    precision: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    def to_dict(self) -> dict:
        return {
            "recall": self.recall,
            "precision": self.precision,
            "f1": self.f1,
            "confusion": {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn},
        }


def evaluate(
    trajectories: Sequence[Trajectory],
    tokenizer: Callable[[str], int] = count_tokens,
    tokenizer_name: str = DEFAULT_TOKENIZER_NAME,
    max_turns: Optional[int] = None,
) -> EvalReport:
    """Aggregate success, detection, turn, and length statistics."""
    if not trajectories:
        raise ContractError("cannot evaluate an empty trajectory set")
    n = len(trajectories)
    successes = sum(1 for t in trajectories if t.outcome is Outcome.SOLVED_CORRECT)
    incomplete = [t for t in trajectories if t.problem_kind is ProblemKind.INCOMPLETE]
    detected = sum(1 for t in incomplete if t.detected)
    turn_total = 0.0
    for t in trajectories:
        terminal = t.turns[-1].turn if t.turns else 0
        if t.outcome is not Outcome.SOLVED_CORRECT and max_turns is not None:
            terminal = max(terminal, max_turns)
        turn_total += terminal
    length_total = sum(
        sum(tokenizer(rec.assistant.content) for rec in t.turns) for t in trajectories
    )
    return EvalReport(
        success_rate=successes / n,
        premise_detection=detected / len(incomplete) if incomplete else 0.0,
        avg_turns=turn_total / n,
        avg_length_tokens=length_total / n,
        n_episodes=n,
        tokenizer=tokenizer_name,
    )


def gap_ratio(
    assistant_texts: Sequence[str],
    lexicon: Sequence[str] = DEFAULT_UNCERTAINTY_LEXICON,
    span_tokenizer: Callable[[str], list[tuple[int, int]]] = whitespace_spans,
) -> GapMeasurement:
    """Fraction of tokens generated at or after the first uncertainty phrase.

    No lexicon match means no measurable gap: the ratio is 0.
    """
    if not lexicon:
        raise ContractError("uncertainty lexicon must be non-empty")
    text = "\n".join(assistant_texts)
    if not text.strip():
        raise ContractError("concatenated assistant text must be non-empty")
    spans = span_tokenizer(text)
    total = len(spans)

    lowered = text.lower()
    first_char: Optional[int] = None
    for phrase in lexicon:
        pos = lowered.find(phrase.lower())
        if pos != -1 and (first_char is None or pos < first_char):
            first_char = pos
    if first_char is None or total == 0:
        return GapMeasurement(total_tokens=total, suspect_position=None, gap_ratio=0.0)

    suspect = total  # phrase past the last token start (defensive)
    for i, (start, end) in enumerate(spans):
        if end > first_char:
            suspect = i
            break
    return GapMeasurement(
        total_tokens=total,
        suspect_position=suspect,
        gap_ratio=(total - suspect) / total,
    )


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def detection_classification(
    turn1_actions: Sequence[tuple[ProblemKind, ActionKind]],
) -> DetectionClassificationReport:
    """Turn-1 clarify as a binary classifier of problem incompleteness."""
    if not turn1_actions:
        raise ContractError("cannot classify an empty action list")
    tp = fp = fn = tn = 0
    for kind, action in turn1_actions:
        predicted = action is ActionKind.CLARIFY
        actual = kind is ProblemKind.INCOMPLETE
        if actual and predicted:
            tp += 1
        elif actual:
            fn += 1
        elif predicted:
            fp += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return DetectionClassificationReport(
        recall=recall,
        precision=precision,
        f1=f1_score(precision, recall),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
    )


def forced_feedback_eval(
    policy,
    problems: Sequence[Problem],
    env_cfg: EnvConfig = EnvConfig(),
    reward_cfg: RewardConfig = RewardConfig(),
    judge_cfg: JudgeConfig = JudgeConfig(),
) -> ForcedFeedbackReport:
    """Respond normally at turn 1, then inject the premise regardless.

    Episodes partition by turn-1 detection; each partition's conditional
    success rate is reported. `policy` is a PolicySpec or a callable
    mapping a Problem to one (per-problem scripted fixtures).
    """
    if any(p.kind is not ProblemKind.INCOMPLETE for p in problems):
        raise ContractError("forced-feedback protocol applies to incomplete problems")
    detected_total = detected_success = 0
    missed_total = missed_success = 0
    for problem in problems:
        spec = policy if isinstance(policy, PolicySpec) else policy(problem)
        state = reset(problem, env_cfg)
        cursor = (
            _ScriptCursor(spec.script) if spec.kind is PolicyKind.SCRIPTED else None
        )
        result = step(
            state, next_response(spec, state.history, cursor=cursor),
            env_cfg, reward_cfg, judge_cfg,
        )
        turn1_detected = result.event is TurnEvent.PREMISE_PROVIDED
        if not turn1_detected and not state.done and not state.premise_provided:
            force_inject_premise(state, env_cfg)
        while not state.done:
            step(
                state, next_response(spec, state.history, cursor=cursor),
                env_cfg, reward_cfg, judge_cfg,
            )
        success = state.outcome is Outcome.SOLVED_CORRECT
        if turn1_detected:
            detected_total += 1
            detected_success += success
        else:
            missed_total += 1
            missed_success += success
    return ForcedFeedbackReport(
        dcr=detected_success / detected_total if detected_total else 0.0,
        ncr=missed_success / missed_total if missed_total else 0.0,
        n_detected=detected_total,
        n_not_detected=missed_total,
    )


def inject_noise(
    premise_feedback: str,
    distractors: Sequence[str],
    seed: int,
    k: int = 2,
) -> str:
    """Interleave seeded distractor sentences around the premise feedback.

    The premise text itself stays intact and contiguous.
    """
    if not distractors:
        raise ContractError("distractor pool must be non-empty")
    if k == 0:
        return premise_feedback
    rng = random.Random(f"noise:{seed}")
    before: list[str] = []
    after: list[str] = []
    for _ in range(k):
        sentence = distractors[rng.randrange(len(distractors))]
        (before if rng.random() < 0.5 else after).append(sentence)
    return " ".join(before + [premise_feedback] + after)


def uninformative_response(seed: int, pool: Sequence[str] = EVASIVE_POOL) -> str:
    """Deterministic pick from the fixed evasive-response pool."""
    if not pool:
        raise ContractError("evasive pool must be non-empty")
    return pool[seed % len(pool)]


def report_provenance(
    lexicon: Sequence[str] = DEFAULT_UNCERTAINTY_LEXICON,
    tokenizer_name: str = DEFAULT_TOKENIZER_NAME,
    seeds: Optional[dict[str, int]] = None,
) -> dict:
    """Config provenance block attached to serialized report files."""
    return {
        "tokenizer": tokenizer_name,
        "lexicon_hash": lexicon_hash(lexicon),
        "seeds": seeds or {},
    }


def render_table(rows: Sequence[dict], title: str = "") -> str:
    """Plain-text table for terminal output."""
    if not rows:
        return title
    keys = list(rows[0].keys())
    widths = {
        k: max(len(k), *(len(_cell(r.get(k))) for r in rows)) for k in keys
    }
    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(k.ljust(widths[k]) for k in keys))
    lines.append("  ".join("-" * widths[k] for k in keys))
    for r in rows:
        lines.append("  ".join(_cell(r.get(k)).ljust(widths[k]) for k in keys))
    return "\n".join(lines)


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)
