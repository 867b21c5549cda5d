import random

import pytest

from ctxroute.budget import BudgetConfig, TokenEstimator, allocate, estimate_tokens
from ctxroute.errors import ConfigError

PIPELINE_OFFSETS = {"planner": 476, "searcher": -24, "recommender": -224}


def test_allocate_pipeline_offsets_recover_stock_budgets():
    cfg = BudgetConfig(base_budget=1024, role_offsets=PIPELINE_OFFSETS)
    assert allocate("planner", cfg) == 1500
    assert allocate("searcher", cfg) == 1000
    assert allocate("recommender", cfg) == 800


def test_allocate_uniform_base_without_offsets():
    cfg = BudgetConfig(base_budget=2048)
    for role in ("planner", "searcher", "recommender", "verifier", "unheard-of"):
        assert allocate(role, cfg) == 2048


def test_allocate_clamps_at_zero():
    cfg = BudgetConfig(base_budget=0, role_offsets={"tiny": -5})
    assert allocate("tiny", cfg) == 0


def test_allocate_unknown_role_gets_zero_offset():
    cfg = BudgetConfig(base_budget=100, role_offsets={"planner": 50})
    assert allocate("critic", cfg) == 100


def test_negative_base_budget_rejected():
    with pytest.raises(ConfigError):
        BudgetConfig(base_budget=-1)


def test_estimate_empty_is_zero_in_every_mode():
    assert estimate_tokens("", TokenEstimator("whitespace")) == 0
    assert estimate_tokens("", TokenEstimator("chars_div_4")) == 0
    assert estimate_tokens("", TokenEstimator("external", external_fn=len)) == 0


def test_estimate_whitespace_counts_runs():
    assert estimate_tokens("a b  c", TokenEstimator("whitespace")) == 3
    assert estimate_tokens("  leading and trailing  ", TokenEstimator("whitespace")) == 3


def test_estimate_chars_div_4_takes_ceiling():
    est = TokenEstimator("chars_div_4")
    assert estimate_tokens("abcdefgh", est) == 2
    assert estimate_tokens("abcdefghi", est) == 3
    assert estimate_tokens("x", est) == 1


def test_estimate_external_delegates():
    est = TokenEstimator("external", external_fn=lambda text: len(text) * 2)
    assert estimate_tokens("ab", est) == 4


def test_unknown_estimator_mode_rejected():
    with pytest.raises(ConfigError):
        TokenEstimator("bytes")
    with pytest.raises(ConfigError):
        TokenEstimator("external")


def test_estimator_is_callable():
    est = TokenEstimator("whitespace")
    assert est("one two") == 2


def test_concatenation_monotonicity_property():
    rng = random.Random(7)
    words = ["alpha", "beta", "ga", "delta-prime", "e"]
    for est in (TokenEstimator("whitespace"), TokenEstimator("chars_div_4")):
        for _ in range(500):
            a = " ".join(rng.choices(words, k=rng.randint(0, 6)))
            b = " ".join(rng.choices(words, k=rng.randint(0, 6)))
            joined = estimate_tokens(a + " " + b, est)
            assert joined >= max(estimate_tokens(a, est), estimate_tokens(b, est))


def test_allocation_never_negative_property():
    rng = random.Random(11)
    for _ in range(500):
        cfg = BudgetConfig(
            base_budget=rng.randint(0, 4096),
            role_offsets={"r": rng.randint(-8192, 8192)},
        )
        assert allocate("r", cfg) >= 0
