"""Dataset construction by premise masking.

A complete math problem is split into sentences; one numeric, non-question
sentence is removed; a solvability oracle decides whether the removal made
the problem unsolvable. Essential removals become incomplete problems whose
withheld premise is the removed sentence.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Protocol

from .core import ContractError, GrilError, Problem, ProblemKind

# Abbreviations after which a period does not end a sentence.
_ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "st", "no", "vs", "etc", "e.g", "i.e",
    "approx", "fig", "eq",
}

_BOUNDARY_RE = re.compile(r"([.?!])(\s+)")


class ShortfallError(GrilError):
    """Raised when the corpus cannot supply the requested incomplete share."""

    def __init__(self, requested: float, achievable: float):
        super().__init__(
            f"cannot reach incomplete fraction {requested:g}; "
            f"achievable at most {achievable:g}"
        )
        self.requested = requested
        self.achievable = achievable


class OracleTransportError(GrilError):
    """A solvability oracle call failed in a retryable way."""


class SolvabilityVerdict(str, Enum):
    SOLVABLE = "solvable"
    UNSOLVABLE = "unsolvable"


class MaskLabel(str, Enum):
    ESSENTIAL = "essential"
    REDUNDANT = "redundant"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class MaskCandidate:
    sentence_index: int
    sentence: str


@dataclass(frozen=True)
class MaskedProblem:
    original: Problem
    masked_question: str
    masked_sentence: str
    label: MaskLabel = MaskLabel.UNLABELED


class SolvabilityOracle(Protocol):
    def verdict(self, masked_question: str) -> SolvabilityVerdict: ...


def segment_sentences(text: str) -> list[str]:
    """Split text at sentence terminators, guarding decimals and abbreviations."""
    if not text:
        raise ContractError("cannot segment empty text")
    boundaries: list[int] = []
    for m in _BOUNDARY_RE.finditer(text):
        end = m.end(1)
        if m.group(1) == ".":
            # Decimal guard: a digit on both sides of the period.
            i = m.start(1)
            if 0 < i < len(text) - 1 and text[i - 1].isdigit() and text[i + 1].isdigit():
                continue
            word = re.search(r"[\w.]+$", text[:i])
            if word and word.group(0).lower().rstrip(".") in _ABBREVIATIONS:
                continue
        boundaries.append(end)
    sentences: list[str] = []
    start = 0
    for end in boundaries:
        chunk = text[start:end].strip()
        if chunk:
            sentences.append(chunk)
        start = end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _contains_digit(sentence: str) -> bool:
    return any(ch.isdigit() for ch in sentence)


def _is_question(sentence: str) -> bool:
    return sentence.rstrip().endswith("?")


def candidate_premises(sentences: list[str]) -> list[MaskCandidate]:
    """Numeric, non-question sentences eligible for masking, in order."""
    return [
        MaskCandidate(sentence_index=i, sentence=s)
        for i, s in enumerate(sentences)
        if _contains_digit(s) and not _is_question(s)
    ]


def _mask_hash(sentence: str) -> str:
    return hashlib.sha256(sentence.encode("utf-8")).hexdigest()[:8]


def mask_problem(problem: Problem, seed: int) -> Optional[MaskedProblem]:
    """Remove one uniformly sampled candidate sentence; None if no candidate."""
    if problem.kind is not ProblemKind.COMPLETE:
        raise ContractError("only complete problems can be masked")
    sentences = segment_sentences(problem.question)
    candidates = candidate_premises(sentences)
    if not candidates:
        return None
    rng = random.Random(f"{seed}:{problem.id}")
    chosen = candidates[rng.randrange(len(candidates))]
    remaining = [s for i, s in enumerate(sentences) if i != chosen.sentence_index]
    return MaskedProblem(
        original=problem,
        masked_question=" ".join(remaining),
        masked_sentence=chosen.sentence,
    )


def _mask_variants(problem: Problem, seed: int, max_attempts: int) -> list[MaskedProblem]:
    """Up to max_attempts distinct masks; the first matches mask_problem."""
    sentences = segment_sentences(problem.question)
    candidates = candidate_premises(sentences)
    if not candidates:
        return []
    rng = random.Random(f"{seed}:{problem.id}")
    first = candidates[rng.randrange(len(candidates))]
    rest = [c for c in candidates if c.sentence_index != first.sentence_index]
    rng.shuffle(rest)
    variants = []
    for chosen in ([first] + rest)[:max_attempts]:
        remaining = [s for i, s in enumerate(sentences) if i != chosen.sentence_index]
        variants.append(
            MaskedProblem(
                original=problem,
                masked_question=" ".join(remaining),
                masked_sentence=chosen.sentence,
            )
        )
    return variants


def label_with_oracle(masked: MaskedProblem, oracle: SolvabilityOracle) -> MaskedProblem:
    """Attach the oracle's verdict: unsolvable means the mask was essential."""
    if masked.label is not MaskLabel.UNLABELED:
        raise ContractError("masked problem already labeled")
    verdict = oracle.verdict(masked.masked_question)
    label = (
        MaskLabel.ESSENTIAL
        if verdict is SolvabilityVerdict.UNSOLVABLE
        else MaskLabel.REDUNDANT
    )
    return replace(masked, label=label)


def _incomplete_from_mask(masked: MaskedProblem, index: int) -> Problem:
    src = masked.original
    pid = src.id or f"{src.source or 'corpus'}#{index}#{_mask_hash(masked.masked_sentence)}"
    return Problem(
        id=pid,
        kind=ProblemKind.INCOMPLETE,
        question=masked.masked_question,
        gold_answer=src.gold_answer,
        missing_premise=masked.masked_sentence,
        source=src.source,
    )


@dataclass(frozen=True)
class BuildReport:
    dataset: list[Problem]
    n_incomplete: int
    n_complete: int
    n_redundant_dropped: int
    n_no_candidates: int


def build_dataset_report(
    complete_corpus: list[Problem],
    oracle: SolvabilityOracle,
    incomplete_fraction: float = 0.5,
    seed: int = 0,
    retry_masks: int = 0,
) -> BuildReport:
    """Partition a complete corpus into masked-incomplete and untouched items.

    Exactly round(fraction * N) items become incomplete (essential masks
    only); the rest stay complete. Items whose sampled mask is redundant or
    that have no candidates remain complete, unless retry_masks allows
    resampling further candidates for the same item. Raises ShortfallError
    when the corpus cannot meet the fraction.
    """
    if not complete_corpus:
        raise ContractError("corpus must be non-empty")
    if not (0.0 <= incomplete_fraction <= 1.0):
        raise ContractError("incomplete_fraction must lie in [0, 1]")

    rng = random.Random(seed)
    order = list(complete_corpus)
    rng.shuffle(order)

    target = round(incomplete_fraction * len(order))
    incomplete: list[Problem] = []
    complete: list[Problem] = []
    n_redundant = n_no_candidates = 0
    for idx, problem in enumerate(order):
        placed = False
        if len(incomplete) < target:
            variants = _mask_variants(problem, seed, max_attempts=1 + retry_masks)
            if not variants:
                n_no_candidates += 1
            for masked in variants:
                masked = label_with_oracle(masked, oracle)
                if masked.label is MaskLabel.ESSENTIAL:
                    incomplete.append(_incomplete_from_mask(masked, idx))
                    placed = True
                    break
            if variants and not placed:
                n_redundant += 1
        if not placed:
            complete.append(problem)

    if len(incomplete) < target:
        raise ShortfallError(
            requested=incomplete_fraction,
            achievable=len(incomplete) / len(order),
        )

    dataset = incomplete + complete
    rng.shuffle(dataset)
    return BuildReport(
        dataset=dataset,
        n_incomplete=len(incomplete),
        n_complete=len(complete),
        n_redundant_dropped=n_redundant,
        n_no_candidates=n_no_candidates,
    )


def build_dataset(
    complete_corpus: list[Problem],
    oracle: SolvabilityOracle,
    incomplete_fraction: float = 0.5,
    seed: int = 0,
    retry_masks: int = 0,
) -> list[Problem]:
    """build_dataset_report without the counters; see that function."""
    return build_dataset_report(
        complete_corpus, oracle, incomplete_fraction, seed, retry_masks
    ).dataset


def audit_sample(dataset: list[Problem], fraction: float = 0.02, seed: int = 0) -> list[dict]:
    """Random subset formatted for human annotation (empty human_label field)."""
    rng = random.Random(f"audit:{seed}")
    k = max(1, round(fraction * len(dataset))) if dataset else 0
    picked = rng.sample(dataset, k)
    return [{**p.to_dict(), "human_label": ""} for p in picked]


class StubOracle:
    """Deterministic test oracle: unsolvable iff any gold-answer digit vanished."""

    def __init__(self, gold_by_question: Optional[dict[str, str]] = None):
        self._gold_by_question = gold_by_question or {}

    def verdict(self, masked_question: str) -> SolvabilityVerdict:
        gold = self._gold_by_question.get(masked_question)
        if gold is None:
            return SolvabilityVerdict.UNSOLVABLE
        digits = {ch for ch in gold if ch.isdigit()}
        present = {ch for ch in masked_question if ch.isdigit()}
        if digits and not digits <= present:
            return SolvabilityVerdict.UNSOLVABLE
        return SolvabilityVerdict.SOLVABLE


class PermissiveOracle:
    """Always unsolvable: every mask counts as essential (test fixture)."""

    def verdict(self, masked_question: str) -> SolvabilityVerdict:
        return SolvabilityVerdict.UNSOLVABLE


ORACLE_PROMPT_TEMPLATE = (
    "Decide whether the following math problem is solvable with the "
    "information it contains. Reply with exactly one word: Solvable or "
    "Unsolvable.\n\nProblem:\n{question}"
)


class ChatOracle:
    """Solvability oracle backed by a chat-completion endpoint (temperature 0)."""

    def __init__(self, endpoint, prompt_template: str = ORACLE_PROMPT_TEMPLATE):
        # endpoint: policy.RemoteEndpoint; imported lazily to keep modules acyclic.
        self.endpoint = endpoint
        self.prompt_template = prompt_template

    def verdict(self, masked_question: str) -> SolvabilityVerdict:
        from .policy import TransportError, chat_complete

        prompt = self.prompt_template.format(question=masked_question)
        try:
            reply = chat_complete(
                self.endpoint,
                [{"role": "user", "content": prompt}],
                temperature=0.0,
            )
        except TransportError as exc:
            raise OracleTransportError(str(exc)) from exc
        return (
            SolvabilityVerdict.UNSOLVABLE
            if "unsolvable" in reply.lower()
            else SolvabilityVerdict.SOLVABLE
        )
