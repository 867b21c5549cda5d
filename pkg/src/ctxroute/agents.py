"""Role profiles, prompt construction, output parsing, and agent backends.

Agents exchange structure through a tagged-line protocol: a response line
beginning with ``fact:``, ``action:`` or ``reasoning:`` (optionally
``fact key=<entity>: ...``) becomes one structured entry; everything else is
free text. Markdown code fences around the tagged lines are tolerated and
ignored. The mock and replay backends are fully deterministic so episodes
replay bit-exactly; the live backend speaks the common chat-completion wire
protocol behind the same interface.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Mapping

from .budget import TokenEstimator, estimate_tokens
from .errors import BackendFailure, TemplateMismatch
from .memory import ActionRecord, StructuredOutput
from .router import RoutedContext

DEFAULT_SCHEMA_HINT = (
    "Report structured results as tagged lines inside a fenced block:\n"
    "```\n"
    "fact: <one factual statement>\n"
    "fact key=<entity>: <updated value for that entity>\n"
    "action: <tool call made or outcome observed>\n"
    "reasoning: <one intermediate reasoning step>\n"
    "```\n"
    "Anything outside tagged lines is treated as free text."
)


@dataclass(frozen=True)
class RoleProfile:
    """An agent role: charter, prompt template, and budget offset."""

    name: str
    description: str
    prompt_template: str
    budget_offset: int = 0
    output_schema_hint: str = DEFAULT_SCHEMA_HINT

    def __post_init__(self):
        if self.prompt_template.count("{context}") != 1:
            raise TemplateMismatch(
                f"profile {self.name!r} template must contain {{context}} exactly once"
            )


_BASE_TEMPLATE = (
    "You are the {name} agent. {charter}\n"
    "Task: {{task}}\n"
    "Current stage: {{stage}}\n"
    "Context:\n{{context}}"
)


def _profile(name: str, charter: str, offset: int = 0) -> RoleProfile:
    return RoleProfile(
        name=name,
        description=charter,
        prompt_template=_BASE_TEMPLATE.format(name=name, charter=charter),
        budget_offset=offset,
    )


def built_in_profiles() -> dict[str, RoleProfile]:
    """Stock three-role pipeline plus the extended specialist roles.

    The pipeline offsets recover the stock per-role budgets of 1500/1000/800
    from the default base of 1024; extended roles ride on the base alone.
    """
    profiles = [
        _profile(
            "planner",
            "Decompose the task into concrete sub-goals and the next search intent.",
            offset=476,
        ),
        _profile(
            "searcher",
            "Execute the current search intent against the available knowledge and "
            "report what you find.",
            offset=-24,
        ),
        _profile(
            "recommender",
            "Aggregate upstream findings and produce the final answer or recommendation.",
            offset=-224,
        ),
        _profile("retriever", "Fetch and verify external knowledge relevant to the task."),
        _profile("verifier", "Assess factual consistency and flag reasoning errors."),
        _profile("critic", "Review intermediate steps and suggest concrete revisions."),
        _profile("rewriter", "Paraphrase or refine outputs for clarity and style."),
        _profile("refiner", "Improve partial solutions using feedback and tool outputs."),
    ]
    return {p.name: p for p in profiles}


def render_context(context: RoutedContext) -> str:
    """Numbered context blocks in selection order; a placeholder when empty."""
    if not context.items:
        return "(no context)"
    return "\n".join(
        f"[{k}] ({m.role_tag}/{m.kind}@{m.round_created}) {m.text}"
        for k, m in enumerate(context.items, start=1)
    )


def build_prompt(profile: RoleProfile, task: str, stage: str, context: RoutedContext) -> str:
    """Render the role's template with the task, stage, and routed context."""
    if context.agent_role != profile.name:
        raise ValueError(
            f"context routed for {context.agent_role!r} used with profile {profile.name!r}"
        )
    if profile.prompt_template.count("{context}") != 1:
        raise TemplateMismatch(f"profile {profile.name!r} template lost its {{context}} slot")
    rendered = (
        profile.prompt_template.replace("{task}", task)
        .replace("{stage}", stage)
        .replace("{context}", render_context(context))
    )
    if profile.output_schema_hint:
        rendered += "\n\n" + profile.output_schema_hint
    return rendered


# -- structured-output parsing ------------------------------------------------

# the greedy key match lets entity keys carry colons ("key=capital:france: ...")
_TAGGED_LINE = re.compile(r"^(fact|action|reasoning)(?:\s+key=(\S+))?:\s*(.*)$")


def parse_structured_output(raw_text: str, role: str, round_index: int) -> StructuredOutput:
    """Scan tagged lines into a StructuredOutput; never fails on messy input."""
    facts: list[tuple[str, str | None]] = []
    actions: list[ActionRecord] = []
    reasoning: list[str] = []
    for line in raw_text.splitlines():
        match = _TAGGED_LINE.match(line.strip())
        if not match:
            continue
        tag, key, text = match.group(1), match.group(2), match.group(3).strip()
        if not text:
            continue
        if tag == "fact":
            facts.append((text, key))
        elif tag == "action":
            actions.append(ActionRecord(text=text))
        else:
            reasoning.append(text)
    return StructuredOutput(
        agent_role=role,
        round=round_index,
        facts=tuple(facts),
        actions=tuple(actions),
        reasoning=tuple(reasoning),
        raw_text=raw_text,
    )


# -- backends ------------------------------------------------------------------

@dataclass(frozen=True)
class BackendResult:
    raw_text: str
    latency_seconds: float
    prompt_tokens: int
    completion_tokens: int


class AgentBackend:
    """Interface: one blocking call from prompt to raw response."""

    def invoke(self, prompt: str) -> BackendResult:
        raise NotImplementedError


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class MockPersona:
    """Canned structured content a mock agent emits on every call."""

    facts: tuple[tuple[str, str | None], ...] = ()
    actions: tuple[str, ...] = ()
    reasoning: tuple[str, ...] = ()

    @classmethod
    def from_config(cls, raw: Mapping) -> "MockPersona":
        facts = []
        for entry in raw.get("facts", ()):
            if isinstance(entry, str):
                facts.append((entry, None))
            else:
                text, key = entry[0], entry[1] if len(entry) > 1 else None
                facts.append((text, key))
        return cls(
            facts=tuple(facts),
            actions=tuple(raw.get("actions", ())),
            reasoning=tuple(raw.get("reasoning", ())),
        )


class MockBackend(AgentBackend):
    """Deterministic synthetic agent.

    Every response opens with a reasoning line echoing a digest of the prompt
    (so each round leaves a trace in memory), followed by the persona's canned
    blocks. Latency comes from a PRNG seeded by (seed, prompt), so identical
    prompts always cost identical simulated time.
    """

    def __init__(
        self,
        persona: MockPersona | None = None,
        estimator: TokenEstimator | None = None,
        seed: int = 0,
        latency_range: tuple[float, float] = (0.05, 0.5),
    ):
        self.persona = persona or MockPersona()
        self.estimator = estimator or TokenEstimator()
        self.seed = seed
        self.latency_range = latency_range

    def invoke(self, prompt: str) -> BackendResult:
        digest = prompt_digest(prompt)
        prompt_tokens = estimate_tokens(prompt, self.estimator)
        lines = [f"reasoning: prompt digest {digest[:16]} covering {prompt_tokens} tokens"]
        for text, key in self.persona.facts:
            lines.append(f"fact key={key}: {text}" if key else f"fact: {text}")
        lines.extend(f"action: {text}" for text in self.persona.actions)
        lines.extend(f"reasoning: {text}" for text in self.persona.reasoning)
        raw = "\n".join(lines)
        rng = random.Random(f"{self.seed}:{digest}")
        latency = round(rng.uniform(*self.latency_range), 6)
        return BackendResult(
            raw_text=raw,
            latency_seconds=latency,
            prompt_tokens=prompt_tokens,
            completion_tokens=estimate_tokens(raw, self.estimator),
        )


REPLAY_FIELDS = (
    "prompt_sha256",
    "raw_text",
    "latency_seconds",
    "prompt_tokens",
    "completion_tokens",
)


class ReplayBackend(AgentBackend):
    """Replays recorded responses keyed by prompt hash; bit-exact and offline."""

    def __init__(self, fixtures: Mapping[str, BackendResult]):
        self._fixtures = dict(fixtures)

    @classmethod
    def from_jsonl(cls, path) -> "ReplayBackend":
        fixtures: dict[str, BackendResult] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                fixtures[row["prompt_sha256"]] = BackendResult(
                    raw_text=row["raw_text"],
                    latency_seconds=row["latency_seconds"],
                    prompt_tokens=row["prompt_tokens"],
                    completion_tokens=row["completion_tokens"],
                )
        return cls(fixtures)

    def invoke(self, prompt: str) -> BackendResult:
        digest = prompt_digest(prompt)
        try:
            return self._fixtures[digest]
        except KeyError:
            raise BackendFailure(f"no replay fixture for prompt digest {digest[:16]}") from None


class RecordingBackend(AgentBackend):
    """Wraps another backend and appends replay fixtures for every call."""

    def __init__(self, inner: AgentBackend, path):
        self.inner = inner
        self.path = path
        self._lock = threading.Lock()

    def invoke(self, prompt: str) -> BackendResult:
        result = self.inner.invoke(prompt)
        row = {
            "prompt_sha256": prompt_digest(prompt),
            "raw_text": result.raw_text,
            "latency_seconds": result.latency_seconds,
            "prompt_tokens": result.prompt_tokens,
            "completion_tokens": result.completion_tokens,
        }
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
        return result


class LiveChatBackend(AgentBackend):
    """Chat-completion endpoint client: POST a messages array, read choices back.

    The API key is read from the environment variable named in the config;
    in-flight requests are bounded by a semaphore. A ``post`` callable can be
    injected for tests.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "CTXROUTE_API_KEY",
        timeout: float = 60.0,
        temperature: float = 0.0,
        max_in_flight: int = 4,
        max_retries: int = 2,
        estimator: TokenEstimator | None = None,
        post: Callable | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.temperature = temperature
        self.max_retries = max_retries
        self.estimator = estimator or TokenEstimator()
        self._semaphore = threading.Semaphore(max(1, max_in_flight))
        if post is None:
            import requests

            post = requests.post
        self._post = post

    def invoke(self, prompt: str) -> BackendResult:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        with self._semaphore:
            for attempt in range(self.max_retries + 1):
                start = time.perf_counter()
                try:
                    response = self._post(
                        self.endpoint, json=payload, headers=headers, timeout=self.timeout
                    )
                    status = getattr(response, "status_code", 200)
                    if status >= 500:
                        raise BackendFailure(f"server error {status}")
                    if status >= 400:
                        raise BackendFailure(f"request rejected with status {status}")
                    body = response.json()
                    latency = time.perf_counter() - start
                    return self._result_from_body(body, prompt, latency)
                except BackendFailure as exc:
                    last_error = exc
                    if "rejected" in str(exc):
                        break  # 4xx will not improve on retry
                except Exception as exc:  # network/timeout/parse
                    last_error = exc
                if attempt < self.max_retries:
                    time.sleep(min(2.0**attempt, 8.0))
        raise BackendFailure(f"chat endpoint failed: {last_error}") from last_error

    def _result_from_body(self, body: Mapping, prompt: str, latency: float) -> BackendResult:
        try:
            raw_text = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendFailure(f"malformed chat response: {exc}") from exc
        usage = body.get("usage") or {}
        return BackendResult(
            raw_text=raw_text,
            latency_seconds=latency,
            prompt_tokens=int(usage.get("prompt_tokens", estimate_tokens(prompt, self.estimator))),
            completion_tokens=int(
                usage.get("completion_tokens", estimate_tokens(raw_text, self.estimator))
            ),
        )


class MockJudgeBackend(AgentBackend):
    """Judge stand-in returning a fixed score as a well-formed JSON reply."""

    def __init__(self, score: int = 3, justification: str = "fixed mock judgement"):
        self.score = score
        self.justification = justification

    def invoke(self, prompt: str) -> BackendResult:
        raw = json.dumps({"score": self.score, "justification": self.justification})
        est = TokenEstimator()
        return BackendResult(
            raw_text=raw,
            latency_seconds=0.0,
            prompt_tokens=estimate_tokens(prompt, est),
            completion_tokens=estimate_tokens(raw, est),
        )
