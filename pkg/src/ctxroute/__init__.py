"""Role-aware, token-budgeted context routing for multi-agent LLM pipelines."""

from .agents import (
    AgentBackend,
    BackendResult,
    LiveChatBackend,
    MockBackend,
    MockJudgeBackend,
    MockPersona,
    ReplayBackend,
    RoleProfile,
    build_prompt,
    built_in_profiles,
    parse_structured_output,
)
from .budget import BudgetConfig, TokenEstimator, allocate, estimate_tokens
from .datasets import DatasetExample, ingest
from .memory import (
    ActionRecord,
    MemoryItem,
    MemoryStore,
    StructuredOutput,
    UpdatePolicy,
    memory_update,
)
from .metrics import (
    build_judge_prompt,
    composite_objective,
    parse_judge_score,
    qa_prf1,
    total_latency_parallel,
    total_latency_serial,
    total_latency_wall,
    total_token_consumption,
)
from .orchestrator import EpisodeConfig, EpisodeResult, RoundRecord, context_quality, run_episode
from .router import (
    RoutedContext,
    StaticRoute,
    StaticRoutingConfig,
    knapsack_oracle,
    route_full_context,
    route_greedy,
    route_static,
)
from .scoring import ScorerConfig, importance, recency, role_relevance, stage_priority

__version__ = "0.1.0"

__all__ = [
    "ActionRecord",
    "AgentBackend",
    "BackendResult",
    "BudgetConfig",
    "DatasetExample",
    "EpisodeConfig",
    "EpisodeResult",
    "LiveChatBackend",
    "MemoryItem",
    "MemoryStore",
    "MockBackend",
    "MockJudgeBackend",
    "MockPersona",
    "ReplayBackend",
    "RoleProfile",
    "RoundRecord",
    "RoutedContext",
    "ScorerConfig",
    "StaticRoute",
    "StaticRoutingConfig",
    "StructuredOutput",
    "TokenEstimator",
    "UpdatePolicy",
    "allocate",
    "build_judge_prompt",
    "build_prompt",
    "built_in_profiles",
    "composite_objective",
    "context_quality",
    "estimate_tokens",
    "importance",
    "ingest",
    "knapsack_oracle",
    "memory_update",
    "parse_judge_score",
    "parse_structured_output",
    "qa_prf1",
    "recency",
    "role_relevance",
    "route_full_context",
    "route_greedy",
    "route_static",
    "run_episode",
    "stage_priority",
    "total_latency_parallel",
    "total_latency_serial",
    "total_latency_wall",
    "total_token_consumption",
]
