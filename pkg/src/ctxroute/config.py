"""Experiment configuration: one structured document covering every module.

Precedence is CLI flags over file values over built-in defaults. The file may
be JSON or YAML; keys mirror the module boundaries (scorer, budget, memory,
static_routes, episode, backend, judge, run).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import yaml

from .agents import (
    AgentBackend,
    LiveChatBackend,
    MockBackend,
    MockJudgeBackend,
    MockPersona,
    ReplayBackend,
    RoleProfile,
    built_in_profiles,
)
from .budget import BudgetConfig, TokenEstimator
from .errors import ConfigError
from .memory import UpdatePolicy
from .orchestrator import DEFAULT_STAGE_SCHEDULE, EpisodeConfig
from .router import StaticRoute, StaticRoutingConfig, default_static_routes
from .scoring import ScorerConfig

DEFAULT_PERSONAS: dict[str, Mapping] = {
    "planner": {
        "facts": [["the plan is to search the passages and then answer", "plan:main"]],
        "actions": ["decompose the question into retrieval steps"],
    },
    "searcher": {
        "facts": [["relevant passages were retrieved for the question"]],
        "actions": ["search the seeded passages for the query terms"],
    },
    "recommender": {
        "facts": [["the final answer is drawn from the retrieved passages", "answer:final"]],
    },
}

DEFAULTS: dict = {
    "scorer": {
        "weights": [1.0, 1.0, 1.0],
        "decay_lambda": 0.1,
        "role_keywords": None,  # None -> built-in keyword table
        "stage_types": None,  # None -> built-in stage table
    },
    "budget": {
        "base_budget": 1024,
        "role_offsets": None,  # None -> offsets from the role profiles
        "token_estimator": "chars_div_4",
    },
    "memory": {
        "keep_reasoning": True,
        "role_priority": ["planner", "searcher", "recommender"],
    },
    "static_routes": None,  # None -> stock pipeline filters
    "episode": {
        "strategy": "rcr",
        "rounds": 3,
        "roles": ["planner", "searcher", "recommender"],
        "stage_schedule": {str(k): v for k, v in DEFAULT_STAGE_SCHEDULE.items()},
        "execution": "sequential",
    },
    "roles": {},  # extra/overriding profile definitions
    "backend": {
        "kind": "mock",
        "personas": None,  # None -> DEFAULT_PERSONAS
        "latency_range": [0.05, 0.5],
        "replay_path": None,
        "live": {
            "endpoint": "",
            "model": "",
            "api_key_env": "CTXROUTE_API_KEY",
            "timeout": 60.0,
            "temperature": 0.0,
            "max_in_flight": 4,
            "max_retries": 2,
        },
    },
    "judge": {
        "enabled": False,
        "kind": "mock",
        "fixed_score": 3,
    },
    "run": {
        "seed": 0,
        "workers": 1,
        "limit": 0,  # 0 -> no limit
        "lambda_tradeoff": 0.0,
        "strategies": ["rcr"],
    },
}


def load_config_file(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    suffix = Path(path).suffix.lower()
    try:
        if suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a mapping at the top level")
    return data


def deep_merge(base: dict, override: Mapping) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def resolve_config(path=None, overrides: Mapping | None = None) -> dict:
    """defaults <- file <- overrides, deep-merged."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        cfg = deep_merge(cfg, load_config_file(path))
    if overrides:
        cfg = deep_merge(cfg, overrides)
    return cfg


@dataclass
class Runtime:
    """Everything an episode needs, assembled from one config tree."""

    config: dict
    profiles: dict[str, RoleProfile]
    scorer: ScorerConfig
    budgets: BudgetConfig
    estimator: TokenEstimator
    update_policy: UpdatePolicy
    static_routes: StaticRoutingConfig
    episode: EpisodeConfig


def build_profiles(cfg: dict) -> dict[str, RoleProfile]:
    profiles = built_in_profiles()
    for name, spec in (cfg.get("roles") or {}).items():
        base = profiles.get(name)
        profiles[name] = RoleProfile(
            name=name,
            description=spec.get("description", base.description if base else name),
            prompt_template=spec.get(
                "prompt_template", base.prompt_template if base else "{task}\n{context}"
            ),
            budget_offset=int(spec.get("budget_offset", base.budget_offset if base else 0)),
            output_schema_hint=spec.get(
                "output_schema_hint", base.output_schema_hint if base else ""
            ),
        )
    return profiles


def build_scorer(cfg: dict) -> ScorerConfig:
    section = cfg["scorer"]
    kwargs: dict = {
        "weights": tuple(float(w) for w in section["weights"]),
        "decay_lambda": float(section["decay_lambda"]),
    }
    if section.get("role_keywords") is not None:
        kwargs["role_keywords"] = {
            role: frozenset(k.lower() for k in keywords)
            for role, keywords in section["role_keywords"].items()
        }
    if section.get("stage_types") is not None:
        kwargs["stage_types"] = {
            stage: frozenset(types) for stage, types in section["stage_types"].items()
        }
    return ScorerConfig(**kwargs)


def build_budget(cfg: dict, profiles: Mapping[str, RoleProfile]) -> BudgetConfig:
    section = cfg["budget"]
    offsets = section.get("role_offsets")
    if offsets is None:
        offsets = {name: p.budget_offset for name, p in profiles.items() if p.budget_offset}
    return BudgetConfig(
        base_budget=int(section["base_budget"]),
        role_offsets={role: int(off) for role, off in offsets.items()},
    )


def build_estimator(cfg: dict) -> TokenEstimator:
    return TokenEstimator(mode=cfg["budget"]["token_estimator"])


def build_policy(cfg: dict) -> UpdatePolicy:
    section = cfg["memory"]
    return UpdatePolicy(
        keep_reasoning=bool(section["keep_reasoning"]),
        role_priority=tuple(section["role_priority"]),
    )


def build_static_routes(cfg: dict) -> StaticRoutingConfig:
    section = cfg.get("static_routes")
    if section is None:
        return default_static_routes()
    routes = {}
    for role, spec in section.items():
        filters = tuple((str(tag), str(kind)) for tag, kind in spec.get("filters", ()))
        cap = spec.get("cap")
        routes[role] = StaticRoute(filters=filters, cap=None if cap is None else int(cap))
    return StaticRoutingConfig(routes=routes)


def build_episode(cfg: dict, strategy: str | None = None, rounds: int | None = None) -> EpisodeConfig:
    section = cfg["episode"]
    schedule = {int(k): str(v) for k, v in section["stage_schedule"].items()}
    return EpisodeConfig(
        strategy=strategy or section["strategy"],
        rounds=rounds if rounds is not None else int(section["rounds"]),
        roles=tuple(section["roles"]),
        stage_schedule=schedule,
        execution=section["execution"],
    )


def build_runtime(cfg: dict, strategy: str | None = None, rounds: int | None = None) -> Runtime:
    profiles = build_profiles(cfg)
    return Runtime(
        config=cfg,
        profiles=profiles,
        scorer=build_scorer(cfg),
        budgets=build_budget(cfg, profiles),
        estimator=build_estimator(cfg),
        update_policy=build_policy(cfg),
        static_routes=build_static_routes(cfg),
        episode=build_episode(cfg, strategy, rounds),
    )


def stable_seed(*parts) -> int:
    """Cross-process-stable integer seed derived from the given parts."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


def build_backends(
    cfg: dict,
    roles: tuple[str, ...],
    estimator: TokenEstimator,
    scope: str = "",
) -> dict[str, AgentBackend]:
    """Per-role backends; `scope` (e.g. the example id) keys mock latency streams."""
    section = cfg["backend"]
    kind = section["kind"]
    if kind == "mock":
        personas = section.get("personas")
        if personas is None:
            personas = DEFAULT_PERSONAS
        latency_range = tuple(float(x) for x in section["latency_range"])
        seed = int(cfg["run"]["seed"])
        return {
            role: MockBackend(
                persona=MockPersona.from_config(personas.get(role, {})),
                estimator=estimator,
                seed=stable_seed(seed, scope, role),
                latency_range=latency_range,  # type: ignore[arg-type]
            )
            for role in roles
        }
    if kind == "replay":
        path = section.get("replay_path")
        if not path:
            raise ConfigError("replay backend needs backend.replay_path")
        shared = ReplayBackend.from_jsonl(path)
        return {role: shared for role in roles}
    if kind == "live":
        live = section["live"]
        if not live.get("endpoint") or not live.get("model"):
            raise ConfigError("live backend needs backend.live.endpoint and .model")
        shared = LiveChatBackend(
            endpoint=live["endpoint"],
            model=live["model"],
            api_key_env=live.get("api_key_env", "CTXROUTE_API_KEY"),
            timeout=float(live.get("timeout", 60.0)),
            temperature=float(live.get("temperature", 0.0)),
            max_in_flight=int(live.get("max_in_flight", 4)),
            max_retries=int(live.get("max_retries", 2)),
            estimator=estimator,
        )
        return {role: shared for role in roles}
    raise ConfigError(f"unknown backend kind {kind!r}")


def build_judge(cfg: dict, estimator: TokenEstimator) -> AgentBackend | None:
    section = cfg["judge"]
    if not section.get("enabled"):
        return None
    if section.get("kind", "mock") == "mock":
        return MockJudgeBackend(score=int(section.get("fixed_score", 3)))
    live = cfg["backend"]["live"]
    return LiveChatBackend(
        endpoint=live["endpoint"],
        model=live["model"],
        api_key_env=live.get("api_key_env", "CTXROUTE_API_KEY"),
        timeout=float(live.get("timeout", 60.0)),
        temperature=0.0,
        estimator=estimator,
    )
