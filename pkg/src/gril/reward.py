"""Stage rewards and the combined trajectory reward.

Detection earns a base reward decayed exponentially by the number of
assistant turns spent before the clarification; solving earns a fixed
reward for a correct answer; complete problems are scored outcome-based
with a one-shot penalty for unnecessary clarification. The trajectory
total weighs detection and solving for incomplete problems and passes
the complete-problem score through unchanged.
"""

from __future__ import annotations

from .core import ContractError, ProblemKind, RewardBreakdown, RewardConfig


def detect_reward(n_prior: int, cfg: RewardConfig) -> float:
    """r_base * gamma_d ** n_prior; n_prior counts turns before the clarify."""
    if n_prior < 0:
        raise ContractError("n_prior must be >= 0")
    return cfg.r_base * cfg.gamma_d**n_prior


def solve_reward(correct: bool, cfg: RewardConfig) -> float:
    return cfg.r_correct if correct else 0.0


def comp_reward(correct: bool, unnecessary_clarified: bool, cfg: RewardConfig) -> float:
    """Outcome reward minus the unnecessary-clarification penalty (applied once)."""
    total = cfg.r_correct if correct else 0.0
    if unnecessary_clarified:
        total -= cfg.lam
    return total


def trajectory_reward(
    kind: ProblemKind,
    detected: bool,
    n_prior: int,
    solved_correct: bool,
    unnecessary_clarified: bool,
    cfg: RewardConfig,
) -> RewardBreakdown:
    """Combine stage rewards into the per-trajectory breakdown."""
    if detected and kind is not ProblemKind.INCOMPLETE:
        raise ContractError("detection only applies to incomplete problems")
    if n_prior < 0:
        raise ContractError("n_prior must be >= 0")

    if kind is ProblemKind.INCOMPLETE:
        detect = detect_reward(n_prior, cfg) if detected else 0.0
        solve = solve_reward(solved_correct, cfg)
        total = cfg.alpha * detect + cfg.beta * solve
        return RewardBreakdown(
            detect=detect, solve=solve, comp=0.0, n_prior=n_prior if detected else 0,
            total=total,
        )

    comp = comp_reward(solved_correct, unnecessary_clarified, cfg)
    return RewardBreakdown(detect=0.0, solve=0.0, comp=comp, n_prior=0, total=comp)


def recombine(kind: ProblemKind, breakdown: RewardBreakdown, cfg: RewardConfig) -> float:
    """Recompute the total from stored components (decomposition identity)."""
    if kind is ProblemKind.INCOMPLETE:
        return cfg.alpha * breakdown.detect + cfg.beta * breakdown.solve
    return breakdown.comp
