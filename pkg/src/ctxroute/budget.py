"""Per-agent token budgets and token-length estimation.

A budget is a base allowance plus a role-specific offset, clamped at zero.
Token lengths are estimates: the whitespace mode counts words (exact and
human-auditable, used in tests), the chars_div_4 mode is the usual rough
LLM heuristic, and the external mode delegates to a caller-supplied counter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .errors import ConfigError

ESTIMATOR_MODES = ("whitespace", "chars_div_4", "external")


@dataclass(frozen=True)
class BudgetConfig:
    """Base token allowance plus per-role offsets (offsets may be negative)."""

    base_budget: int = 1024
    role_offsets: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.base_budget < 0:
            raise ConfigError("base_budget must be >= 0")


@dataclass(frozen=True)
class TokenEstimator:
    """Deterministic token-length estimator; estimate('') is always 0."""

    mode: str = "chars_div_4"
    external_fn: Callable[[str], int] | None = None

    def __post_init__(self):
        if self.mode not in ESTIMATOR_MODES:
            raise ConfigError(f"unknown estimator mode {self.mode!r}")
        if self.mode == "external" and self.external_fn is None:
            raise ConfigError("external estimator mode requires external_fn")

    def __call__(self, text: str) -> int:
        return estimate_tokens(text, self)


def allocate(role: str, cfg: BudgetConfig) -> int:
    """Token budget for a role: max(0, base + offset); unknown roles get offset 0."""
    return max(0, cfg.base_budget + cfg.role_offsets.get(role, 0))


def estimate_tokens(text: str, est: TokenEstimator) -> int:
    """Estimated token count of ``text`` under the estimator's mode."""
    if not text:
        return 0
    if est.mode == "whitespace":
        return len(text.split())
    if est.mode == "chars_div_4":
        # ceil over Unicode scalar count
        return (len(text) + 3) // 4
    return max(0, int(est.external_fn(text)))  # type: ignore[misc]
