"""Dataset ingestion: normalize multi-hop QA files into a common example shape.

Adapters cover the public layouts of the three supported benchmarks plus a
generic JSON-Lines form that mirrors the normalized shape directly. Passages
ride along in order and get seeded into memory as task knowledge at round 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from .budget import TokenEstimator, estimate_tokens
from .errors import ParseError, UnknownFormat
from .memory import KIND_KNOWLEDGE, MemoryItem

FORMATS = ("hotpotqa", "musique", "2wiki", "generic")


@dataclass(frozen=True)
class DatasetExample:
    id: str
    question: str
    gold_answer: str
    contexts: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.question:
            raise ParseError("question must be non-empty", field="question")
        if not self.gold_answer:
            raise ParseError("gold_answer must be non-empty", field="gold_answer")


def ingest(path, format: str) -> list[DatasetExample]:
    """Load and normalize a dataset file; raises ParseError with the line at fault."""
    if format not in FORMATS:
        raise UnknownFormat(f"unknown dataset format {format!r}")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if format == "generic":
        return _ingest_generic(text)
    if format == "musique":
        return _ingest_musique(text)
    return _ingest_hotpot_like(text, format)


def _json_rows(text: str) -> list[tuple[int, dict]]:
    """Rows from either a JSON array or JSON-Lines; (line, payload) pairs."""
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
        if not isinstance(data, list):
            raise ParseError("top-level JSON value is not a list")
        return [(i + 1, row) for i, row in enumerate(data)]
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append((lineno, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
    return rows


def _require(row: dict, field_name: str, lineno: int) -> object:
    if field_name not in row or row[field_name] in (None, ""):
        raise ParseError(f"missing field {field_name!r}", line=lineno, field=field_name)
    return row[field_name]


def _ingest_generic(text: str) -> list[DatasetExample]:
    examples = []
    for lineno, row in _json_rows(text):
        contexts = tuple(
            (str(entry[0]), str(entry[1])) for entry in row.get("contexts", ())
        )
        examples.append(
            DatasetExample(
                id=str(row.get("id", f"ex{lineno}")),
                question=str(_require(row, "question", lineno)),
                gold_answer=str(_require(row, "gold_answer", lineno)),
                contexts=contexts,
            )
        )
    return examples


def _ingest_hotpot_like(text: str, format: str) -> list[DatasetExample]:
    """Layout shared by hotpotqa and 2wiki: context = [[title, [sentences]], ...]."""
    examples = []
    for lineno, row in _json_rows(text):
        contexts = []
        for entry in row.get("context", ()):
            try:
                title, sentences = entry[0], entry[1]
            except (IndexError, TypeError):
                raise ParseError("malformed context entry", line=lineno, field="context")
            body = "".join(sentences) if isinstance(sentences, list) else str(sentences)
            contexts.append((str(title), body))
        examples.append(
            DatasetExample(
                id=str(row.get("_id") or row.get("id") or f"{format}{lineno}"),
                question=str(_require(row, "question", lineno)),
                gold_answer=str(_require(row, "answer", lineno)),
                contexts=tuple(contexts),
            )
        )
    return examples


def _ingest_musique(text: str) -> list[DatasetExample]:
    examples = []
    for lineno, row in _json_rows(text):
        contexts = tuple(
            (str(par.get("title", "")), str(par.get("paragraph_text", "")))
            for par in row.get("paragraphs", ())
        )
        examples.append(
            DatasetExample(
                id=str(row.get("id", f"musique{lineno}")),
                question=str(_require(row, "question", lineno)),
                gold_answer=str(_require(row, "answer", lineno)),
                contexts=contexts,
            )
        )
    return examples


def seed_items(example: DatasetExample, estimator: TokenEstimator) -> list[MemoryItem]:
    """Passage items seeded at round 0; the orchestrator adds the question itself."""
    items = []
    for i, (title, body) in enumerate(example.contexts):
        text = f"{title}: {body}" if title else body
        items.append(
            MemoryItem(
                id=f"passage{i}",
                text=text,
                role_tag="user",
                stage_tag="seed",
                kind=KIND_KNOWLEDGE,
                sub_kind="passage",
                round_created=0,
                token_length=estimate_tokens(text, estimator),
            )
        )
    return items
