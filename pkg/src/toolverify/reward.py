"""RLVR reward shaping, group filtering, advantage normalization, and the
clipped policy-gradient objective over caller-supplied log-probabilities.

The optimizer itself lives elsewhere; this module is the reward/objective
side consumed by an external trainer or served over ``/v1/reward``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

__all__ = [
    "RolloutRecord",
    "RolloutGroup",
    "FilterStatus",
    "DegenerateGroup",
    "LengthMismatch",
    "shaped_reward",
    "group_filter",
    "advantages",
    "dapo_objective",
    "reward_batch",
]

EPS_LOW_DEFAULT = 0.2
EPS_HIGH_DEFAULT = 0.28


class DegenerateGroup(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class FilterStatus(str, Enum):
    kept = "kept"
    filtered_all_correct = "filtered_all_correct"
    filtered_all_wrong = "filtered_all_wrong"


def shaped_reward(correct: bool, u: int) -> float:
    """Correctness reward plus the tool-use shaping term.

    +0.5 bonus for a correct answer that used a tool; -0.5 penalty for a
    wrong answer that never called one.
    """
    assert u >= 0
    r_ans = 1.0 if correct else 0.0
    if correct and u > 0:
        r_t = 0.5
    elif not correct and u == 0:
        r_t = -0.5
    else:
        r_t = 0.0
    return r_ans + r_t


@dataclass
class RolloutRecord:
    correct: bool
    tool_uses: int = 0
    logprob_new: Optional[Sequence[float]] = None
    logprob_old: Optional[Sequence[float]] = None
    token_count: Optional[int] = None

    def __post_init__(self):
        if self.logprob_new is not None or self.logprob_old is not None:
            if self.logprob_new is None or self.logprob_old is None:
                raise LengthMismatch("both logprob sequences must be given together")
            if len(self.logprob_new) != len(self.logprob_old):
                raise LengthMismatch(
                    f"logprob lengths differ: {len(self.logprob_new)} vs {len(self.logprob_old)}"
                )
        if self.token_count is None:
            self.token_count = len(self.logprob_new) if self.logprob_new is not None else 0

    @property
    def reward(self) -> float:
        return shaped_reward(self.correct, self.tool_uses)


@dataclass
class RolloutGroup:
    prompt_id: str
    gold_answer: str
    rollouts: list[RolloutRecord]
    eps_low: float = EPS_LOW_DEFAULT
    eps_high: float = EPS_HIGH_DEFAULT

    def __post_init__(self):
        if len(self.rollouts) < 2:
            raise ValueError("a rollout group needs G >= 2")
        assert self.eps_low > 0 and self.eps_high > 0

    @property
    def rewards(self) -> list[float]:
        return [r.reward for r in self.rollouts]


def group_filter(group: RolloutGroup) -> FilterStatus:
    """Keep only groups with mixed correctness: 0 < #correct < G."""
    n_correct = sum(1 for r in group.rollouts if r.correct)
    if n_correct == 0:
        return FilterStatus.filtered_all_wrong
    if n_correct == len(group.rollouts):
        return FilterStatus.filtered_all_correct
    return FilterStatus.kept


def advantages(group: RolloutGroup) -> list[float]:
    """Per-rollout advantage: reward standardized by group mean and
    population std; every token of rollout i carries the same value."""
    rewards = group.rewards
    g = len(rewards)
    mean = sum(rewards) / g
    var = sum((r - mean) ** 2 for r in rewards) / g
    std = math.sqrt(var)
    if std < 1e-12:
        raise DegenerateGroup("zero reward spread; run group_filter first")
    return [(r - mean) / std for r in rewards]


def dapo_objective(group: RolloutGroup) -> float:
    """Token-level clipped surrogate averaged over all tokens in the group.

    ratio r = exp(logprob_new - logprob_old); each token contributes
    min(r*A, clip(r, 1-eps_low, 1+eps_high)*A).
    """
    advs = advantages(group)
    total_tokens = 0
    total = 0.0
    for rollout, a in zip(group.rollouts, advs):
        if rollout.logprob_new is None:
            raise LengthMismatch("rollout lacks logprob sequences")
        for lp_new, lp_old in zip(rollout.logprob_new, rollout.logprob_old):
            ratio = math.exp(lp_new - lp_old)
            clipped = min(max(ratio, 1.0 - group.eps_low), 1.0 + group.eps_high)
            total += min(ratio * a, clipped * a)
            total_tokens += 1
    if total_tokens == 0:
        raise LengthMismatch("group has no tokens")
    return total / total_tokens


def reward_batch(groups: Sequence[RolloutGroup]) -> list[dict]:
    """Rewards, filter status, and advantages for each group; nothing is
    silently dropped."""
    out = []
    for group in groups:
        status = group_filter(group)
        entry = {
            "prompt_id": group.prompt_id,
            "filter_status": status.value,
            "rewards": group.rewards,
            "advantages": None,
        }
        if status is FilterStatus.kept:
            entry["advantages"] = advantages(group)
        out.append(entry)
    return out
