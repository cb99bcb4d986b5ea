"""Decompose raw assistant messages into think/answer spans and classify them.

The output contract is two tagged blocks: a <think>...</think> reasoning
trace followed by an <answer>...</answer> final response. A clarification
request is any answer containing "insufficient information".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .core import ActionKind, ContractError

_THINK_RE = re.compile(r"<think>(.*?)</think>", re.DOTALL)
_ANSWER_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
_BOXED_RE = re.compile(r"\\boxed\{")

CLARIFY_PHRASE = "insufficient information"


@dataclass(frozen=True)
class ParsedResponse:
    raw: str
    think: Optional[str]
    answer: Optional[str]
    well_formed: bool


def parse_response(raw: str, strict: bool = False) -> ParsedResponse:
    """Extract the first <think> block and the first <answer> block after it.

    Lenient mode tolerates duplicate tag pairs and stray text outside the
    blocks; strict mode requires exactly one of each with nothing but
    whitespace around them.
    """
    think_m = _THINK_RE.search(raw)
    answer_m = _ANSWER_RE.search(raw, think_m.end()) if think_m else None
    if think_m is None or answer_m is None:
        return ParsedResponse(raw=raw, think=None, answer=None, well_formed=False)

    think, answer = think_m.group(1), answer_m.group(1)
    well_formed = True
    if strict:
        outside = raw[: think_m.start()] + raw[think_m.end() : answer_m.start()] + raw[answer_m.end() :]
        duplicates = (
            len(_THINK_RE.findall(raw)) != 1 or len(_ANSWER_RE.findall(raw)) != 1
        )
        if outside.strip() or duplicates:
            well_formed = False
    return ParsedResponse(raw=raw, think=think, answer=answer, well_formed=well_formed)


def _collapse_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def classify_action(p: ParsedResponse) -> ActionKind:
    """Map a parsed response to exactly one inferential action."""
    if not p.well_formed or p.answer is None or not p.answer.strip():
        return ActionKind.MALFORMED
    if CLARIFY_PHRASE in _collapse_ws(p.answer).lower():
        return ActionKind.CLARIFY
    return ActionKind.SOLVE


def _strip_math_delimiters(text: str) -> str:
    text = text.strip()
    for opener, closer in ((r"\(", r"\)"), (r"\[", r"\]"), ("$$", "$$"), ("$", "$")):
        if text.startswith(opener) and text.endswith(closer) and len(text) > len(opener) + len(closer) - 1:
            return text[len(opener) : len(text) - len(closer)].strip()
    return text


def _boxed_content(text: str) -> Optional[str]:
    # Content of the last complete top-level \boxed{...}; nested boxes
    # inside it are left intact (one unwrapping level only).
    last = None
    skip_until = 0
    for m in _BOXED_RE.finditer(text):
        if m.start() < skip_until:
            continue
        depth = 1
        i = m.end()
        while i < len(text) and depth:
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
            i += 1
        if depth == 0:
            last = text[m.end() : i - 1]
            skip_until = i
    return last


def normalize_answer(text: str) -> str:
    """Strip math delimiters and one \\boxed wrapper, then collapse whitespace."""
    text = _strip_math_delimiters(text)
    boxed = _boxed_content(text)
    if boxed is not None:
        text = boxed
    return _collapse_ws(text)


def extract_final_answer(p: ParsedResponse) -> str:
    """Normalized final answer of a Solve response.

    Calling this on anything but a Solve is a contract error.
    """
    if classify_action(p) is not ActionKind.SOLVE:
        raise ContractError("extract_final_answer requires a Solve response")
    assert p.answer is not None
    return normalize_answer(p.answer)
