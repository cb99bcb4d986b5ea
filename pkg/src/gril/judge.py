"""Answer equivalence: does a normalized candidate match the gold answer?

Numeric answers compare within a relative tolerance (absolute near zero);
everything else falls back to whitespace-collapsed text comparison.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .core import ContractError

_ABS_TOL_NEAR_ZERO = 1e-9


@dataclass(frozen=True)
class JudgeConfig:
    numeric_tolerance: float = 1e-6  # relative
    case_sensitive: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.numeric_tolerance < 1.0):
            raise ContractError("numeric_tolerance must lie in [0, 1)")


def _parse_number(text: str) -> Optional[float]:
    cleaned = text.strip().replace(",", "")
    cleaned = cleaned.rstrip(".")
    if not cleaned:
        return None
    # Simple fractions like "1/2" count as numbers.
    frac = re.fullmatch(r"([+-]?\d+(?:\.\d+)?)\s*/\s*([+-]?\d+(?:\.\d+)?)", cleaned)
    if frac:
        denom = float(frac.group(2))
        if denom == 0:
            return None
        return float(frac.group(1)) / denom
    try:
        return float(cleaned)
    except ValueError:
        return None


def _collapse_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def check_answer(candidate: str, gold: str, cfg: JudgeConfig = JudgeConfig()) -> bool:
    """True iff candidate and gold agree numerically or textually."""
    if candidate == gold and candidate:
        return True
    a, b = _parse_number(candidate), _parse_number(gold)
    if a is not None and b is not None:
        if a == b:
            return True
        return abs(a - b) <= max(
            cfg.numeric_tolerance * max(abs(a), abs(b)), _ABS_TOL_NEAR_ZERO
        )
    left, right = _collapse_ws(candidate), _collapse_ws(gold)
    if not cfg.case_sensitive:
        left, right = left.lower(), right.lower()
    return left == right and bool(left)
