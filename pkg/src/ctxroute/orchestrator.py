"""The iterative interaction loop: route, invoke, extract, update, repeat.

Each display round (1-based) snapshots the store, routes a context to every
participating role under the configured strategy, invokes the agents, parses
their outputs, and folds them back into memory. In sequential mode, later
agents in the round also see the items the earlier agents just produced via
an intra-round staging buffer; in parallel mode all agents share one snapshot
and run concurrently. Backend failures degrade to empty outputs so a long
episode survives a flaky agent.

The store's round counter tracks completed updates, so display round t
operates while the store sits at round t-1 and items produced in that round
are stamped t-1.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .agents import AgentBackend, RoleProfile, build_prompt, parse_structured_output
from .budget import BudgetConfig, TokenEstimator, allocate
from .errors import ConfigError
from .memory import (
    KIND_KNOWLEDGE,
    MemoryItem,
    MemoryStore,
    StructuredOutput,
    UpdatePolicy,
    extract_items,
    memory_update,
    normalize_text,
    with_stage,
)
from .router import (
    STRATEGIES,
    STRATEGY_RCR,
    RoutedContext,
    StaticRoutingConfig,
    route,
)
from .scoring import ScorerConfig

EXECUTION_MODES = ("parallel", "sequential")

DEFAULT_STAGE_SCHEDULE = {1: "planning", 2: "search", 3: "recommendation"}


@dataclass(frozen=True)
class EpisodeConfig:
    strategy: str = STRATEGY_RCR
    rounds: int = 3
    roles: tuple[str, ...] = ("planner", "searcher", "recommender")
    stage_schedule: Mapping[int, str] = field(default_factory=lambda: dict(DEFAULT_STAGE_SCHEDULE))
    execution: str = "sequential"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if not self.roles:
            raise ConfigError("at least one role is required")
        if len(set(self.roles)) != len(self.roles):
            raise ConfigError("duplicate roles in episode config")
        if self.execution not in EXECUTION_MODES:
            raise ConfigError(f"unknown execution mode {self.execution!r}")

    def stage_for(self, round_index: int) -> str:
        """Stage of a display round; rounds past the schedule keep the last stage."""
        if round_index in self.stage_schedule:
            return self.stage_schedule[round_index]
        earlier = [r for r in self.stage_schedule if r <= round_index]
        if earlier:
            return self.stage_schedule[max(earlier)]
        return ""


@dataclass
class PerAgentRecord:
    context: RoutedContext
    prompt_tokens: int
    completion_tokens: int
    latency_seconds: float
    output: StructuredOutput
    error: str | None = None


@dataclass
class RoundRecord:
    round: int
    stage: str
    per_agent: dict[str, PerAgentRecord]
    memory_size_before: int
    memory_size_after: int


@dataclass
class EpisodeResult:
    task: str
    strategy: str
    records: list[RoundRecord]
    final_answer: str
    store: MemoryStore


def context_quality(context: RoutedContext) -> float:
    """Mean importance score of the routed items; 0 for an empty context."""
    if not context.scores:
        return 0.0
    return statistics.fmean(context.scores)


def seed_store(
    task: str,
    estimator: TokenEstimator,
    extra_items: Sequence[MemoryItem] = (),
) -> MemoryStore:
    """Fresh store holding the task as a user item (round 0) plus any seed items."""
    store = MemoryStore(estimator)
    store.append(
        store.new_item(
            id="task",
            text=task,
            role_tag="user",
            kind=KIND_KNOWLEDGE,
            sub_kind="question",
            stage_tag="seed",
            round_created=0,
        )
    )
    for item in extra_items:
        store.append(item)
    return store


def run_episode(
    task: str,
    cfg: EpisodeConfig,
    *,
    profiles: Mapping[str, RoleProfile],
    backends: Mapping[str, AgentBackend],
    scorer: ScorerConfig,
    budgets: BudgetConfig,
    estimator: TokenEstimator,
    static_routes: StaticRoutingConfig | None = None,
    update_policy: UpdatePolicy = UpdatePolicy(),
    seed_items: Sequence[MemoryItem] = (),
) -> EpisodeResult:
    """Run the full T-round loop and return the per-round accounting."""
    for role in cfg.roles:
        if role not in profiles:
            raise ConfigError(f"no profile for role {role!r}")
        if role not in backends:
            raise ConfigError(f"no backend for role {role!r}")

    store = seed_store(task, estimator, seed_items)
    records: list[RoundRecord] = []

    for display_round in range(1, cfg.rounds + 1):
        stage = cfg.stage_for(display_round)
        policy = with_stage(update_policy, stage)
        base_snapshot = store.snapshot()
        size_before = len(store)

        def invoke_role(role: str, snapshot: tuple[MemoryItem, ...]) -> PerAgentRecord:
            context = route(
                cfg.strategy,
                snapshot,
                role,
                stage,
                store.current_round,
                allocate(role, budgets),
                scorer,
                static_routes,
            )
            prompt = build_prompt(profiles[role], task, stage, context)
            try:
                result = backends[role].invoke(prompt)
            except Exception as exc:
                return PerAgentRecord(
                    context=context,
                    prompt_tokens=estimator(prompt),
                    completion_tokens=0,
                    latency_seconds=0.0,
                    output=StructuredOutput(agent_role=role, round=store.current_round),
                    error=f"{type(exc).__name__}: {exc}",
                )
            output = parse_structured_output(result.raw_text, role, store.current_round)
            return PerAgentRecord(
                context=context,
                prompt_tokens=result.prompt_tokens,
                completion_tokens=result.completion_tokens,
                latency_seconds=result.latency_seconds,
                output=output,
            )

        per_agent: dict[str, PerAgentRecord] = {}
        if cfg.execution == "sequential":
            staged: list[MemoryItem] = []
            staged_texts: set[str] = set()
            for role in cfg.roles:
                record = invoke_role(role, base_snapshot + tuple(staged))
                per_agent[role] = record
                for item in extract_items(
                    [record.output], policy, store, extra_seen=staged_texts
                ):
                    staged.append(item)
                    staged_texts.add(normalize_text(item.text))
        else:
            with ThreadPoolExecutor(max_workers=len(cfg.roles)) as pool:
                futures = {
                    role: pool.submit(invoke_role, role, base_snapshot) for role in cfg.roles
                }
                per_agent = {role: futures[role].result() for role in cfg.roles}

        memory_update(store, [per_agent[r].output for r in cfg.roles], policy)
        records.append(
            RoundRecord(
                round=display_round,
                stage=stage,
                per_agent=per_agent,
                memory_size_before=size_before,
                memory_size_after=len(store),
            )
        )

    return EpisodeResult(
        task=task,
        strategy=cfg.strategy,
        records=records,
        final_answer=final_answer(records, cfg.roles),
        store=store,
    )


def final_answer(records: Sequence[RoundRecord], roles: Sequence[str]) -> str:
    """Last recommender output's first fact, falling back to its raw text.

    Without a recommender in the cast, the last role in pipeline order stands
    in as the answering agent.
    """
    answering_role = "recommender" if "recommender" in roles else roles[-1]
    for record in reversed(records):
        agent = record.per_agent.get(answering_role)
        if agent is None:
            continue
        if agent.output.facts:
            return agent.output.facts[0][0]
        if agent.output.raw_text:
            return agent.output.raw_text
    return ""
