"""Importance scoring of memory items for a given role and task stage.

The score is a weighted sum of three signals: a role-relevance indicator
(any role keyword occurs as a whole word in the item text), a stage-priority
indicator (the item's type is preferred at the current stage), and an
exponentially decaying recency weight.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import ConfigError, NegativeAge
from .memory import MemoryItem

DEFAULT_ROLE_KEYWORDS: dict[str, frozenset[str]] = {
    "planner": frozenset({"plan", "task", "question", "goal", "step", "subgoal"}),
    "searcher": frozenset({"search", "find", "retrieve", "lookup", "query", "passage"}),
    "recommender": frozenset({"recommend", "answer", "conclusion", "final", "suggest"}),
    "retriever": frozenset({"retrieve", "document", "source", "evidence"}),
    "verifier": frozenset({"verify", "check", "consistent", "evidence", "claim"}),
    "critic": frozenset({"review", "critique", "issue", "revise"}),
    "rewriter": frozenset({"rewrite", "rephrase", "clarity", "style"}),
    "refiner": frozenset({"refine", "improve", "feedback", "partial"}),
}

# Entries match an item's kind, its sub_kind, or the combined "kind/sub_kind".
DEFAULT_STAGE_TYPES: dict[str, frozenset[str]] = {
    "planning": frozenset({"question", "passage", "plan", "fact"}),
    "search": frozenset({"question", "plan", "tool_result", "fact"}),
    "recommendation": frozenset({"question", "fact", "tool_result"}),
}


@dataclass(frozen=True)
class ScorerConfig:
    """Weights and lookup tables for the importance scorer."""

    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    decay_lambda: float = 0.1
    role_keywords: dict[str, frozenset[str]] = field(
        default_factory=lambda: dict(DEFAULT_ROLE_KEYWORDS)
    )
    stage_types: dict[str, frozenset[str]] = field(
        default_factory=lambda: dict(DEFAULT_STAGE_TYPES)
    )

    def __post_init__(self):
        if len(self.weights) != 3:
            raise ConfigError("weights must be a (w1, w2, w3) triple")
        if any(not math.isfinite(w) or w < 0 for w in self.weights):
            raise ConfigError("weights must be finite and >= 0")
        if not math.isfinite(self.decay_lambda) or self.decay_lambda < 0:
            raise ConfigError("decay_lambda must be finite and >= 0")


@lru_cache(maxsize=4096)
def _keyword_pattern(keyword: str) -> re.Pattern:
    # whole-word match: no word character directly before or after
    return re.compile(rf"(?<!\w){re.escape(keyword)}(?!\w)")


def role_relevance(item: MemoryItem, role: str, cfg: ScorerConfig) -> float:
    """1.0 if any role keyword occurs as a case-insensitive whole word, else 0.0."""
    keywords = cfg.role_keywords.get(role, frozenset())
    if not keywords:
        return 0.0
    text = item.text.lower()
    for keyword in sorted(keywords):
        if _keyword_pattern(keyword.lower()).search(text):
            return 1.0
    return 0.0


def stage_priority(item: MemoryItem, stage: str, cfg: ScorerConfig) -> float:
    """1.0 if the item's type is preferred at this stage, else 0.0."""
    preferred = cfg.stage_types.get(stage, frozenset())
    if item.kind in preferred or item.sub_kind in preferred:
        return 1.0
    if f"{item.kind}/{item.sub_kind}" in preferred:
        return 1.0
    return 0.0


def recency(item: MemoryItem, current_round: int, cfg: ScorerConfig) -> float:
    """exp(-lambda * age) where age = current_round - round_created."""
    age = current_round - item.round_created
    if age < 0:
        raise NegativeAge(
            f"item {item.id!r} created at round {item.round_created}, "
            f"scored at round {current_round}"
        )
    return math.exp(-cfg.decay_lambda * age)


def importance(
    item: MemoryItem,
    role: str,
    stage: str,
    current_round: int,
    cfg: ScorerConfig,
) -> float:
    """Weighted sum of the role, stage, and recency component scores."""
    w1, w2, w3 = cfg.weights
    return (
        w1 * role_relevance(item, role, cfg)
        + w2 * stage_priority(item, stage, cfg)
        + w3 * recency(item, current_round, cfg)
    )
