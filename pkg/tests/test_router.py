import itertools
import random

import pytest

from conftest import make_item
from ctxroute.errors import TooManyItems
from ctxroute.memory import MemoryItem
from ctxroute.router import (
    StaticRoute,
    StaticRoutingConfig,
    default_static_routes,
    knapsack_oracle,
    route,
    route_full_context,
    route_greedy,
    route_static,
)
from ctxroute.scoring import ScorerConfig, importance

# lambda 0 makes recency exactly 1.0, so weights alone shape the scores
FLAT = ScorerConfig(
    weights=(1.0, 0.0, 0.0),
    decay_lambda=0.0,
    role_keywords={},
    stage_types={},
)


def uniform_cfg(w3: float = 1.0) -> ScorerConfig:
    return ScorerConfig(
        weights=(1.0, 0.0, w3),
        decay_lambda=0.0,
        role_keywords={"agent": frozenset({"hit"})},
        stage_types={},
    )


# -- route_greedy ---------------------------------------------------------------

def test_empty_snapshot_routes_empty():
    ctx = route_greedy([], "agent", "stage", 0, 100, FLAT)
    assert ctx.items == ()
    assert ctx.total_tokens == 0
    assert ctx.budget == 100


def test_zero_budget_routes_nothing():
    items = [make_item(f"m{i}", 5) for i in range(4)]
    ctx = route_greedy(items, "agent", "stage", 0, 0, FLAT)
    assert ctx.items == ()
    assert ctx.total_tokens == 0


def test_greedy_stops_at_first_misfit_uniform_lengths():
    # four 10-token items with descending scores, budget 25: hand trace picks
    # the top two (20 tokens); the third would reach 30 > 25, so it stops
    cfg = ScorerConfig(
        weights=(1.0, 2.0, 1.0),
        decay_lambda=0.0,
        role_keywords={"agent": frozenset({"rolehit"})},
        stage_types={"s": frozenset({"wanted"})},
    )
    items = [
        make_item("hi", 10, text="rolehit w1 w2 w3 w4 w5 w6 w7 w8 w9", sub_kind="wanted"),  # 4.0
        make_item("mid", 10, text="rolehit w1 w2 w3 w4 w5 w6 w7 w8 w9"),                     # 2.0
        make_item("lo1", 10),                                                                 # 1.0
        make_item("lo0", 10),                                                                 # 1.0
    ]
    ctx = route_greedy(items, "agent", "s", 0, 25, cfg)
    assert ctx.item_ids == ("hi", "mid")
    assert ctx.total_tokens == 20
    assert ctx.scores == (4.0, 2.0)
    # uniform lengths: greedy total equals the exhaustive optimum
    _, best = knapsack_oracle(items, [4.0, 2.0, 1.0, 1.0], 25)
    assert sum(ctx.scores) == best
    # same trace with the canonical score table fed straight to the oracle:
    # only two 10-token items fit in 25, so the optimum is 3.0 + 2.5
    ids, best = knapsack_oracle(items, [3.0, 2.5, 2.0, 1.0], 25)
    assert best == 5.5
    assert ids == frozenset({"hi", "mid"})


def test_greedy_stop_does_not_skip_ahead():
    # a smaller later item would fit, but selection halts at the first misfit
    cfg = uniform_cfg()
    items = [
        make_item("big", 8, text="hit a b c d e f g"),    # score 2.0
        make_item("small", 2, text="x y"),                 # score 1.0
    ]
    ctx = route_greedy(items, "agent", "", 0, 9, cfg)
    assert ctx.item_ids == ("big",)
    assert ctx.total_tokens == 8


def test_score_ties_break_newer_then_reverse_lex_id():
    cfg = FLAT  # every item scores 0.0
    items = [
        make_item("aa", 1, round_created=0),
        make_item("ab", 1, round_created=1),
        make_item("zz", 1, round_created=1),
    ]
    ctx = route_greedy(items, "agent", "", 1, 10, cfg)
    assert ctx.item_ids == ("zz", "ab", "aa")


def test_greedy_is_deterministic():
    rng = random.Random(5)
    items = [
        make_item(f"m{i}", rng.randint(1, 6), round_created=rng.randint(0, 3))
        for i in range(9)
    ]
    cfg = uniform_cfg()
    a = route_greedy(items, "agent", "", 3, 12, cfg)
    b = route_greedy(list(items), "agent", "", 3, 12, cfg)
    assert a == b


# -- knapsack oracle -------------------------------------------------------------

def test_oracle_single_item_fits():
    items = [make_item("only", 4)]
    ids, best = knapsack_oracle(items, [2.5], 10)
    assert ids == frozenset({"only"})
    assert best == 2.5


def test_oracle_infeasible_singleton_returns_empty():
    items = [make_item("fat", 20)]
    ids, best = knapsack_oracle(items, [9.0], 10)
    assert ids == frozenset()
    assert best == 0.0


def test_oracle_beats_greedy_on_gap_witness():
    # (score, tokens) = (6,5), (5,4), (5,4), budget 8: greedy takes the 6 and
    # stops; the optimum is the two 4-token items worth 10
    cfg = ScorerConfig(
        weights=(1.0, 0.0, 5.0),
        decay_lambda=0.0,
        role_keywords={"agent": frozenset({"hit"})},
        stage_types={},
    )
    items = [
        make_item("a", 5, text="hit w1 w2 w3 w4"),
        make_item("b", 4, text="w1 w2 w3 w4"),
        make_item("c", 4, text="w5 w6 w7 w8"),
    ]
    scores = [6.0, 5.0, 5.0]

    # independent check: exhaustive enumeration over all 8 subsets
    best_brute = max(
        (
            (sum(scores[i] for i in comb), comb)
            for r in range(4)
            for comb in itertools.combinations(range(3), r)
            if sum(items[i].token_length for i in comb) <= 8
        ),
        key=lambda t: t[0],
    )
    assert best_brute[0] == 10.0

    ids, best = knapsack_oracle(items, scores, 8)
    assert best == 10.0
    assert ids == frozenset({"b", "c"})

    ctx = route_greedy(items, "agent", "", 0, 8, cfg)
    assert ctx.scores == (6.0,)
    assert sum(ctx.scores) == 6.0 < best


def test_oracle_tie_breaks_prefer_fewer_tokens_then_smallest_ids():
    items = [
        make_item("a", 3),
        make_item("b", 2),
        make_item("c", 2),
    ]
    # equal best score reachable with {a} (3 tokens) or {b} or {c} (2 tokens)
    ids, best = knapsack_oracle(items, [1.0, 1.0, 1.0], 2)
    assert best == 1.0
    assert ids == frozenset({"b"})  # fewer tokens than a; id b < c


def test_oracle_guards_against_blowup():
    items = [make_item(f"m{i}", 1) for i in range(23)]
    with pytest.raises(TooManyItems):
        knapsack_oracle(items, [1.0] * 23, 5)


# -- baselines ---------------------------------------------------------------------

def test_full_context_returns_everything_in_order():
    items = [make_item(f"m{i}", 2, round_created=0) for i in range(3)]
    ctx = route_full_context(items, "agent", 0)
    assert ctx.item_ids == ("m0", "m1", "m2")
    assert ctx.total_tokens == 6
    assert ctx.budget == 6


def test_full_context_empty():
    ctx = route_full_context([], "agent", 0)
    assert ctx.items == ()
    assert ctx.total_tokens == 0


def test_full_context_token_sum_contract():
    items = [make_item(f"m{i}", 1700, round_created=0) for i in range(3)]
    ctx = route_full_context(items, "agent", 0)
    assert ctx.total_tokens == 5100


def test_static_filters_by_role_tag():
    cfg = StaticRoutingConfig(
        routes={"searcher": StaticRoute(filters=(("planner", "*"), ("user", "*")))}
    )
    items = [
        make_item("p", 1, role_tag="planner"),
        make_item("u", 1, role_tag="user"),
        make_item("r", 1, role_tag="recommender"),
    ]
    ctx = route_static(items, "searcher", 0, cfg)
    assert ctx.item_ids == ("p", "u")


def test_static_empty_filter_set_routes_nothing():
    cfg = StaticRoutingConfig(routes={"searcher": StaticRoute(filters=())})
    items = [make_item("p", 1, role_tag="planner")]
    ctx = route_static(items, "searcher", 0, cfg)
    assert ctx.items == ()


def test_static_cap_keeps_first_matches():
    cfg = StaticRoutingConfig(routes={"r": StaticRoute(filters=(("user", "*"),), cap=3)})
    items = [make_item(f"m{i}", 1, role_tag="user") for i in range(5)]
    ctx = route_static(items, "r", 0, cfg)
    assert ctx.item_ids == ("m0", "m1", "m2")


def test_static_kind_filter_applies():
    cfg = StaticRoutingConfig(
        routes={"r": StaticRoute(filters=(("user", "task_knowledge"),))}
    )
    items = [
        make_item("k", 1, role_tag="user", kind="task_knowledge"),
        make_item("s", 1, role_tag="user", kind="structured_state", sub_kind="tool_result"),
    ]
    ctx = route_static(items, "r", 0, cfg)
    assert ctx.item_ids == ("k",)


def test_default_static_routes_mirror_pipeline():
    cfg = default_static_routes()
    items = [
        make_item("u", 1, role_tag="user"),
        make_item("p", 1, role_tag="planner"),
        make_item("s", 1, role_tag="searcher"),
    ]
    assert route_static(items, "planner", 0, cfg).item_ids == ("u",)
    assert route_static(items, "searcher", 0, cfg).item_ids == ("p",)
    assert route_static(items, "recommender", 0, cfg).item_ids == ("p", "s")


def test_route_dispatch():
    items = [make_item("u", 1, role_tag="user")]
    assert route("full_context", items, "planner", "", 0, 0, FLAT).item_ids == ("u",)
    assert route("static", items, "planner", "", 0, 0, FLAT).item_ids == ("u",)
    assert route("rcr", items, "planner", "", 0, 5, FLAT).item_ids == ("u",)
    with pytest.raises(ValueError):
        route("fancy", items, "planner", "", 0, 0, FLAT)


# -- properties ----------------------------------------------------------------------

def _random_instance(rng: random.Random, max_items: int = 12, uniform: bool = False):
    n = rng.randint(0, max_items)
    length = rng.randint(1, 9)
    items = []
    for i in range(n):
        tokens = length if uniform else rng.randint(1, 9)
        kind = rng.choice(["task_knowledge", "structured_state"])
        sub = rng.choice(["fact", "plan"])
        word = rng.choice(["hit", "miss"])
        text = " ".join([word] + [f"w{k}" for k in range(tokens - 1)]) if tokens else ""
        items.append(
            make_item(f"m{i}", tokens, text=text, kind=kind, sub_kind=sub,
                      round_created=rng.randint(0, 4))
        )
    cfg = ScorerConfig(
        weights=(
            rng.choice([0.25, 0.5, 1.0, 2.0]),
            rng.choice([0.25, 0.5, 1.0, 2.0]),
            rng.choice([0.25, 0.5, 1.0, 2.0]),
        ),
        decay_lambda=0.0,
        role_keywords={"agent": frozenset({"hit"})},
        stage_types={"stage": frozenset({"plan"})},
    )
    return items, cfg


def test_budget_safety_and_subset_property():
    rng = random.Random(2001)
    for _ in range(2000):
        items, cfg = _random_instance(rng)
        budget = rng.choice([0, rng.randint(0, 60)])
        ctx = route_greedy(items, "agent", "stage", 4, budget, cfg)
        assert ctx.total_tokens <= budget
        ids = [m.id for m in items]
        assert all(i in ids for i in ctx.item_ids)
        assert len(set(ctx.item_ids)) == len(ctx.item_ids)
        assert list(ctx.scores) == sorted(ctx.scores, reverse=True)


def test_strict_reduction_when_over_budget():
    rng = random.Random(2002)
    for _ in range(1000):
        items, cfg = _random_instance(rng)
        total = sum(m.token_length for m in items)
        if total == 0:
            continue
        budget = rng.randint(0, total - 1)
        ctx = route_greedy(items, "agent", "stage", 4, budget, cfg)
        assert ctx.total_tokens < total


def test_uniform_lengths_greedy_matches_oracle():
    rng = random.Random(2003)
    for _ in range(300):
        items, cfg = _random_instance(rng, uniform=True)
        budget = rng.randint(0, 60)
        ctx = route_greedy(items, "agent", "stage", 4, budget, cfg)
        scores = [importance(m, "agent", "stage", 4, cfg) for m in items]
        _, best = knapsack_oracle(items, scores, budget)
        assert sum(ctx.scores) == best


def test_greedy_never_beats_oracle():
    rng = random.Random(2004)
    for _ in range(300):
        items, cfg = _random_instance(rng)
        budget = rng.randint(0, 60)
        ctx = route_greedy(items, "agent", "stage", 4, budget, cfg)
        scores = [importance(m, "agent", "stage", 4, cfg) for m in items]
        _, best = knapsack_oracle(items, scores, budget)
        assert sum(ctx.scores) <= best + 1e-9


def test_weight_scaling_leaves_selected_ids_unchanged():
    rng = random.Random(2005)
    for _ in range(300):
        items, cfg = _random_instance(rng)
        budget = rng.randint(0, 60)
        a = rng.choice([0.25, 0.5, 2.0, 4.0])
        scaled = ScorerConfig(
            weights=tuple(a * w for w in cfg.weights),
            decay_lambda=cfg.decay_lambda,
            role_keywords=cfg.role_keywords,
            stage_types=cfg.stage_types,
        )
        before = route_greedy(items, "agent", "stage", 4, budget, cfg).item_ids
        after = route_greedy(items, "agent", "stage", 4, budget, scaled).item_ids
        assert before == after
