"""Context selection policies: budgeted greedy routing, baselines, and an exact oracle.

The production path scores every snapshot item, sorts by descending score,
and accumulates items until the first one that would overflow the budget
(it stops there rather than skipping ahead). The exhaustive oracle exists
for verification only: budgeted selection is a 0/1 knapsack, and greedy is
optimal exactly when token lengths are uniform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .errors import TooManyItems
from .memory import MemoryItem
from .scoring import ScorerConfig, importance

ORACLE_MAX_ITEMS = 22

STRATEGY_RCR = "rcr"
STRATEGY_FULL = "full_context"
STRATEGY_STATIC = "static"
STRATEGIES = (STRATEGY_RCR, STRATEGY_FULL, STRATEGY_STATIC)


@dataclass(frozen=True)
class RoutedContext:
    """Budget-bounded, ordered memory subset delivered to one agent for one round."""

    agent_role: str
    round: int
    items: tuple[MemoryItem, ...]
    scores: tuple[float, ...]
    total_tokens: int
    budget: int

    def __len__(self) -> int:
        return len(self.items)

    @property
    def item_ids(self) -> tuple[str, ...]:
        return tuple(m.id for m in self.items)


def route_greedy(
    snapshot: Sequence[MemoryItem],
    role: str,
    stage: str,
    round_index: int,
    budget: int,
    cfg: ScorerConfig,
) -> RoutedContext:
    """Greedy budgeted selection by descending importance score.

    Ties break toward the newer item, then the reverse-lexicographically
    larger id, making the order total and the result deterministic.
    Accumulation stops at the first item that does not fit.
    """
    scored = [
        (importance(m, role, stage, round_index, cfg), m) for m in snapshot
    ]
    scored.sort(key=lambda pair: (pair[0], pair[1].round_created, pair[1].id), reverse=True)

    chosen: list[MemoryItem] = []
    chosen_scores: list[float] = []
    total = 0
    for score, item in scored:
        if total + item.token_length > budget:
            break
        chosen.append(item)
        chosen_scores.append(score)
        total += item.token_length
    return RoutedContext(
        agent_role=role,
        round=round_index,
        items=tuple(chosen),
        scores=tuple(chosen_scores),
        total_tokens=total,
        budget=budget,
    )


def knapsack_oracle(
    snapshot: Sequence[MemoryItem],
    scores: Sequence[float],
    budget: int,
) -> tuple[frozenset[str], float]:
    """Exhaustively best feasible subset: (ids, total score). Test-only path.

    Ties prefer the smaller token total, then the lexicographically smallest
    sorted id tuple. Guarded against exponential blow-up.
    """
    n = len(snapshot)
    if n > ORACLE_MAX_ITEMS:
        raise TooManyItems(f"{n} items exceeds oracle limit {ORACLE_MAX_ITEMS}")
    if len(scores) != n:
        raise ValueError("scores must parallel the snapshot")

    tokens = [m.token_length for m in snapshot]
    best_mask = 0
    best = (0.0, 0)  # (score, tokens) of empty set
    # incremental subset sums via lowest-set-bit decomposition
    sum_score = [0.0] * (1 << n)
    sum_tok = [0] * (1 << n)
    for mask in range(1, 1 << n):
        low = mask & -mask
        idx = low.bit_length() - 1
        rest = mask ^ low
        sum_score[mask] = sum_score[rest] + scores[idx]
        sum_tok[mask] = sum_tok[rest] + tokens[idx]
        if sum_tok[mask] > budget:
            continue
        cand = (sum_score[mask], sum_tok[mask])
        if cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
            best, best_mask = cand, mask
        elif cand == best and _mask_ids(snapshot, mask) < _mask_ids(snapshot, best_mask):
            best_mask = mask
    return frozenset(_mask_ids(snapshot, best_mask)), best[0]


def _mask_ids(snapshot: Sequence[MemoryItem], mask: int) -> tuple[str, ...]:
    return tuple(sorted(snapshot[i].id for i in range(len(snapshot)) if mask >> i & 1))


def route_full_context(
    snapshot: Sequence[MemoryItem],
    role: str,
    round_index: int,
) -> RoutedContext:
    """Unbounded baseline: every item in insertion order, no scoring."""
    total = sum(m.token_length for m in snapshot)
    return RoutedContext(
        agent_role=role,
        round=round_index,
        items=tuple(snapshot),
        scores=(0.0,) * len(snapshot),
        total_tokens=total,
        budget=total,
    )


@dataclass(frozen=True)
class StaticRoute:
    """Fixed filter for one role: (role_tag, kind) pairs, '*' wildcards allowed."""

    filters: tuple[tuple[str, str], ...] = ()
    cap: int | None = None

    def matches(self, item: MemoryItem) -> bool:
        return any(
            (tag == "*" or tag == item.role_tag) and (kind == "*" or kind == item.kind)
            for tag, kind in self.filters
        )


@dataclass(frozen=True)
class StaticRoutingConfig:
    """Per-role fixed filters for the static baseline."""

    routes: dict[str, StaticRoute] = field(default_factory=dict)

    def route_for(self, role: str) -> StaticRoute:
        return self.routes.get(role, StaticRoute())


def default_static_routes() -> StaticRoutingConfig:
    """Stock three-role pipeline: planner reads the user, searcher the planner,
    recommender both upstream roles."""
    return StaticRoutingConfig(
        routes={
            "planner": StaticRoute(filters=(("user", "*"),)),
            "searcher": StaticRoute(filters=(("planner", "*"),)),
            "recommender": StaticRoute(filters=(("planner", "*"), ("searcher", "*"))),
        }
    )


def route_static(
    snapshot: Sequence[MemoryItem],
    role: str,
    round_index: int,
    cfg: StaticRoutingConfig,
) -> RoutedContext:
    """Fixed-filter baseline: matching items in insertion order, first `cap` kept."""
    route = cfg.route_for(role)
    selected = [m for m in snapshot if route.matches(m)]
    if route.cap is not None:
        selected = selected[: route.cap]
    total = sum(m.token_length for m in selected)
    return RoutedContext(
        agent_role=role,
        round=round_index,
        items=tuple(selected),
        scores=(0.0,) * len(selected),
        total_tokens=total,
        budget=total,
    )


def route(
    strategy: str,
    snapshot: Sequence[MemoryItem],
    role: str,
    stage: str,
    round_index: int,
    budget: int,
    scorer_cfg: ScorerConfig,
    static_cfg: StaticRoutingConfig | None = None,
) -> RoutedContext:
    """Dispatch to the strategy's selection policy."""
    if strategy == STRATEGY_RCR:
        return route_greedy(snapshot, role, stage, round_index, budget, scorer_cfg)
    if strategy == STRATEGY_FULL:
        return route_full_context(snapshot, role, round_index)
    if strategy == STRATEGY_STATIC:
        return route_static(snapshot, role, round_index, static_cfg or default_static_routes())
    raise ValueError(f"unknown routing strategy {strategy!r}")
