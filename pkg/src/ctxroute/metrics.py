"""Efficiency and quality metrics: latency aggregates, token accounting,
the judge protocol, and token-level QA precision/recall/F1."""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from typing import Sequence

from .errors import EmptyRound, MissingField, NegativeInterval, NoJsonFound, ScoreOutOfRange
from .orchestrator import RoundRecord


def total_latency_wall(start: float, end: float) -> float:
    """Elapsed wall-clock seconds between task start and completion."""
    if end < start:
        raise NegativeInterval(f"end {end} precedes start {start}")
    return end - start


def total_latency_parallel(records: Sequence[RoundRecord]) -> float:
    """Concurrent-agent model: sum over rounds of the slowest agent per round."""
    total = 0.0
    for record in records:
        if not record.per_agent:
            raise EmptyRound(f"round {record.round} has no agents")
        total += max(agent.latency_seconds for agent in record.per_agent.values())
    return total


def total_latency_serial(records: Sequence[RoundRecord]) -> float:
    """No-concurrency model: sum of every agent latency in every round."""
    return sum(
        agent.latency_seconds for record in records for agent in record.per_agent.values()
    )


def per_round_runtime(record: RoundRecord) -> float:
    """Total agent time consumed within one round."""
    return sum(agent.latency_seconds for agent in record.per_agent.values())


def total_token_consumption(records: Sequence[RoundRecord]) -> int:
    """Prompt plus response tokens across all agents and rounds."""
    return sum(
        agent.prompt_tokens + agent.completion_tokens
        for record in records
        for agent in record.per_agent.values()
    )


def composite_objective(task_success: float, total_tokens: int, lambda_tradeoff: float) -> float:
    """Task success discounted by token spend at the configured exchange rate."""
    return task_success - lambda_tradeoff * total_tokens


# -- judge protocol ------------------------------------------------------------

JUDGE_TEMPLATE = (
    "You are an expert judge. Your task is to evaluate how well the answer "
    "responds to the user's query.\n"
    "\n"
    "User Query:\n"
    "{query}\n"
    "\n"
    "Answer:\n"
    "{answer}\n"
    "\n"
    "Please provide a JSON object with the following format:\n"
    '{"score": (1 to 5), "justification": "a short explanation of the score"}'
)


def build_judge_prompt(query: str, answer: str) -> str:
    """Render the scoring instruction template around the query and answer."""
    return JUDGE_TEMPLATE.replace("{query}", query).replace("{answer}", answer)


def _first_json_object(raw: str) -> dict:
    decoder = json.JSONDecoder()
    for pos, char in enumerate(raw):
        if char != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(raw, pos)
        except ValueError:
            continue
        if isinstance(obj, dict):
            return obj
    raise NoJsonFound("no JSON object in judge output")


def parse_judge_score(raw: str) -> tuple[int, str]:
    """Extract (score, justification) from the first JSON object in the reply.

    The score must be an integral number in 1..5; the justification is
    optional and defaults to the empty string.
    """
    obj = _first_json_object(raw)
    if "score" not in obj:
        raise MissingField('judge reply lacks a "score" field')
    value = obj["score"]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScoreOutOfRange(f"score {value!r} is not a number")
    if isinstance(value, float) and not value.is_integer():
        raise ScoreOutOfRange(f"score {value!r} is not integral")
    score = int(value)
    if not 1 <= score <= 5:
        raise ScoreOutOfRange(f"score {score} outside 1..5")
    justification = obj.get("justification", "")
    if not isinstance(justification, str):
        justification = str(justification)
    return score, justification


# -- token-level QA metrics ----------------------------------------------------

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def qa_prf1(prediction: str, gold: str) -> tuple[float, float, float]:
    """Token-multiset precision/recall/F1 over normalized answers."""
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0, 1.0, 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0, 0.0, 0.0
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0, 0.0, 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def exact_match(prediction: str, gold: str) -> bool:
    return normalize_answer(prediction) == normalize_answer(gold)
