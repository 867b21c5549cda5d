from __future__ import annotations

from pathlib import Path

import pytest

from ctxroute.memory import KIND_KNOWLEDGE, MemoryItem

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


def make_item(
    id: str,
    tokens: int,
    *,
    text: str | None = None,
    role_tag: str = "user",
    stage_tag: str = "",
    kind: str = KIND_KNOWLEDGE,
    sub_kind: str = "fact",
    round_created: int = 0,
    entity_key: str | None = None,
) -> MemoryItem:
    """Synthetic item whose whitespace token count equals ``tokens``.

    When ``text`` is given it wins and ``tokens`` must match its word count,
    keeping the cached-length invariant intact.
    """
    if text is None:
        text = " ".join(f"w{i}" for i in range(tokens))
    assert len(text.split()) == tokens, "text width must match declared tokens"
    return MemoryItem(
        id=id,
        text=text,
        role_tag=role_tag,
        stage_tag=stage_tag,
        kind=kind,
        sub_kind=sub_kind,
        round_created=round_created,
        token_length=tokens,
        entity_key=entity_key,
    )
