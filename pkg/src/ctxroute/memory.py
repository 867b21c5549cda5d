"""Shared memory store: structured items, snapshots, and the round-update pipeline.

The store accumulates immutable structured records across interaction rounds.
Between rounds, agent outputs are folded in by a deterministic four-stage
pipeline: extract candidate items from each output, filter out duplicates
(and optionally reasoning), serialize survivors into canonical records, and
resolve conflicts on shared entity keys by replacing the older version.
Identical inputs always produce byte-identical stores.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import yaml

from .budget import TokenEstimator, estimate_tokens
from .errors import ConfigError, DuplicateId, RoundFromFuture, RoundMismatch, RoundOutOfRange

KIND_INTERACTION = "interaction_history"
KIND_KNOWLEDGE = "task_knowledge"
KIND_STATE = "structured_state"
KINDS = frozenset({KIND_INTERACTION, KIND_KNOWLEDGE, KIND_STATE})

# Canonical JSON-Lines field set; order fixed by sorted-keys serialization.
RECORD_FIELDS = (
    "id",
    "text",
    "role_tag",
    "stage_tag",
    "kind",
    "sub_kind",
    "round_created",
    "token_length",
    "entity_key",
)

_PUNCT_EDGES = re.compile(r"^[^\w]+|[^\w]+$")
_WS = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Dedup key for item text: lowercase, collapse whitespace, strip edge punctuation."""
    collapsed = _WS.sub(" ", text.strip()).lower()
    return _PUNCT_EDGES.sub("", collapsed)


@dataclass(frozen=True)
class MemoryItem:
    """One structured record in the shared store."""

    id: str
    text: str
    role_tag: str
    stage_tag: str
    kind: str
    sub_kind: str
    round_created: int
    token_length: int
    entity_key: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown memory kind {self.kind!r}")
        if self.round_created < 0:
            raise ConfigError("round_created must be >= 0")
        if self.token_length < 0:
            raise ConfigError("token_length must be >= 0")

    def to_record(self) -> dict:
        return {name: getattr(self, name) for name in RECORD_FIELDS}

    @classmethod
    def from_record(cls, record: Mapping) -> "MemoryItem":
        return cls(**{name: record[name] for name in RECORD_FIELDS})


@dataclass(frozen=True)
class ActionRecord:
    """An action or tool outcome: free text plus an optional structured payload."""

    text: str
    payload: Mapping | None = None


@dataclass(frozen=True)
class StructuredOutput:
    """The extracted, structured result of one agent invocation."""

    agent_role: str
    round: int
    facts: tuple[tuple[str, str | None], ...] = ()
    actions: tuple[ActionRecord, ...] = ()
    reasoning: tuple[str, ...] = ()
    raw_text: str = ""


@dataclass(frozen=True)
class UpdatePolicy:
    """Knobs for the round-update pipeline.

    role_priority breaks same-round conflicts on an entity key (earlier in
    the list wins); stage_tag is stamped onto items created by the update.
    """

    keep_reasoning: bool = True
    role_priority: tuple[str, ...] = ("planner", "searcher", "recommender")
    stage_tag: str = ""

    def priority_of(self, role: str) -> int:
        try:
            return self.role_priority.index(role)
        except ValueError:
            return len(self.role_priority)


class MemoryStore:
    """Ordered, append-only collection of MemoryItems with a round counter.

    current_round counts completed updates: items appended or created while
    the store sits at round t carry round_created == t. Snapshots are
    immutable tuples and stay valid across later mutation.
    """

    def __init__(self, estimator: TokenEstimator | None = None):
        self.estimator = estimator or TokenEstimator()
        self._items: list[MemoryItem] = []
        self._ids: set[str] = set()
        self.current_round = 0

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._ids

    @property
    def items(self) -> tuple[MemoryItem, ...]:
        return tuple(self._items)

    def new_item(
        self,
        id: str,
        text: str,
        role_tag: str,
        kind: str,
        sub_kind: str,
        *,
        stage_tag: str = "",
        round_created: int | None = None,
        entity_key: str | None = None,
    ) -> MemoryItem:
        """Build an item whose token_length is computed by the store's estimator."""
        return MemoryItem(
            id=id,
            text=text,
            role_tag=role_tag,
            stage_tag=stage_tag,
            kind=kind,
            sub_kind=sub_kind,
            round_created=self.current_round if round_created is None else round_created,
            token_length=estimate_tokens(text, self.estimator),
            entity_key=entity_key,
        )

    def append(self, item: MemoryItem) -> "MemoryStore":
        if item.id in self._ids:
            raise DuplicateId(f"item id {item.id!r} already present")
        if item.round_created > self.current_round:
            raise RoundFromFuture(
                f"item {item.id!r} created at round {item.round_created}, "
                f"store is at round {self.current_round}"
            )
        self._items.append(item)
        self._ids.add(item.id)
        return self

    def snapshot(self, at_round: int | None = None) -> tuple[MemoryItem, ...]:
        """All items with round_created <= at_round, in insertion order."""
        if at_round is None:
            at_round = self.current_round
        if at_round < 0 or at_round > self.current_round:
            raise RoundOutOfRange(
                f"round {at_round} outside 0..{self.current_round}"
            )
        return tuple(m for m in self._items if m.round_created <= at_round)

    # -- serialization --------------------------------------------------

    def to_jsonl(self) -> str:
        return "".join(dumps_record(m) + "\n" for m in self._items)

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str, estimator: TokenEstimator | None = None) -> "MemoryStore":
        store = cls(estimator)
        items = [MemoryItem.from_record(json.loads(line)) for line in text.splitlines() if line.strip()]
        store.current_round = max((m.round_created for m in items), default=0)
        for item in items:
            store.append(item)
        return store

    @classmethod
    def read_jsonl(cls, path, estimator: TokenEstimator | None = None) -> "MemoryStore":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read(), estimator)

    def to_yaml(self) -> str:
        """Convenience export; the JSON-Lines form is the byte-exact source of truth."""
        return yaml.safe_dump(
            [m.to_record() for m in self._items], sort_keys=True, allow_unicode=True
        )


def dumps_record(item: MemoryItem) -> str:
    """Canonical one-line JSON serialization of an item."""
    return json.dumps(item.to_record(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


# -- update pipeline ---------------------------------------------------------

_CATEGORY_TO_KIND = {
    "fact": (KIND_KNOWLEDGE, "fact"),
    "action": (KIND_STATE, "tool_result"),
    "reasoning": (KIND_INTERACTION, "reasoning"),
}

_CATEGORY_ID_TAG = {"fact": "fact", "action": "act", "reasoning": "reas"}


def _candidate_stream(outputs: Sequence[StructuredOutput]) -> Iterable[tuple[str, str, str, str | None]]:
    """Yield (role, category, text, entity_key) in deterministic pipeline order."""
    for out in outputs:
        for text, key in out.facts:
            yield out.agent_role, "fact", text, key
        for action in out.actions:
            text = action.text
            if action.payload is not None:
                text = f"{text} | " + json.dumps(
                    action.payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")
                )
            yield out.agent_role, "action", text, None
        for text in out.reasoning:
            yield out.agent_role, "reasoning", text, None


def extract_items(
    outputs: Sequence[StructuredOutput],
    policy: UpdatePolicy,
    store: MemoryStore,
    *,
    extra_seen: Iterable[str] = (),
) -> list[MemoryItem]:
    """Extraction + relevance filtering + structuring (pipeline stages 1-3).

    Returns the materialized items an update of ``outputs`` would add, without
    mutating the store. The orchestrator uses this to stage intra-round
    visibility in sequential mode; conflict resolution is left to the real
    update. ``extra_seen`` supplies additional normalized texts to dedup
    against (e.g. items already staged this round).
    """
    seen = {normalize_text(m.text) for m in store.items}
    seen.update(extra_seen)
    counters: dict[tuple[str, str], int] = {}
    created: list[MemoryItem] = []
    taken_ids = set(store._ids)

    for role, category, text, entity_key in _candidate_stream(outputs):
        if category == "reasoning" and not policy.keep_reasoning:
            continue
        norm = normalize_text(text)
        if norm in seen:
            continue
        seen.add(norm)
        kind, sub_kind = _CATEGORY_TO_KIND[category]
        n = counters.get((role, category), 0)
        counters[(role, category)] = n + 1
        item_id = f"{role}.r{store.current_round}.{_CATEGORY_ID_TAG[category]}{n}"
        while item_id in taken_ids:
            item_id += "x"
        taken_ids.add(item_id)
        created.append(
            MemoryItem(
                id=item_id,
                text=text,
                role_tag=role,
                stage_tag=policy.stage_tag,
                kind=kind,
                sub_kind=sub_kind,
                round_created=store.current_round,
                token_length=estimate_tokens(text, store.estimator),
                entity_key=entity_key,
            )
        )
    return created


def memory_update(
    store: MemoryStore,
    outputs: Sequence[StructuredOutput],
    policy: UpdatePolicy,
) -> MemoryStore:
    """Fold one round of agent outputs into the store and advance the round.

    Stages, in order: extract candidates from each output (facts become
    task_knowledge, actions structured_state/tool_result, reasoning
    interaction_history); drop candidates whose normalized text already
    exists (and reasoning when the policy says so); serialize survivors; then
    resolve entity-key conflicts by replacing the older item, breaking
    same-round ties with the policy's role priority. Deterministic throughout.
    """
    for out in outputs:
        if out.round != store.current_round:
            raise RoundMismatch(
                f"output from {out.agent_role!r} stamped round {out.round}, "
                f"store is at round {store.current_round}"
            )

    for item in extract_items(outputs, policy, store):
        holder_idx = None
        if item.entity_key is not None:
            for i, existing in enumerate(store._items):
                if existing.entity_key == item.entity_key:
                    holder_idx = i
                    break
        if holder_idx is None:
            store.append(item)
            continue
        existing = store._items[holder_idx]
        if existing.round_created == item.round_created:
            # same-round conflict: higher role priority wins, arrival order
            # breaking exact ties in favor of the newcomer
            if policy.priority_of(item.role_tag) > policy.priority_of(existing.role_tag):
                continue
        del store._items[holder_idx]
        store._ids.discard(existing.id)
        store.append(item)

    store.current_round += 1
    return store


def with_stage(policy: UpdatePolicy, stage_tag: str) -> UpdatePolicy:
    """Copy of the policy stamped with the given stage label."""
    return replace(policy, stage_tag=stage_tag)
