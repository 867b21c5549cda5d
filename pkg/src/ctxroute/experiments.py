"""Experiment sweeps: run strategies over a dataset, aggregate, and emit reports.

Reports are deterministic under the mock and replay backends: sorted JSON
keys, floats fixed at six decimals, examples aggregated in input order, and
trace files named after (example, strategy). The aggregate row schema is
{strategy, rounds, avg_runtime_s, total_tokens, answer_quality, precision,
recall, f1, per_round} with a CSV mirror of the scalar columns.
"""

from __future__ import annotations

import csv
import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from .agents import AgentBackend
from .config import Runtime, build_backends, build_episode, build_judge, build_runtime
from .datasets import DatasetExample, ingest, seed_items
from .metrics import (
    build_judge_prompt,
    parse_judge_score,
    per_round_runtime,
    qa_prf1,
    total_latency_parallel,
    total_token_consumption,
)
from .orchestrator import EpisodeResult, context_quality, run_episode

REPORT_COLUMNS = (
    "strategy",
    "rounds",
    "avg_runtime_s",
    "total_tokens",
    "answer_quality",
    "precision",
    "recall",
    "f1",
)


def _round6(value):
    if isinstance(value, float):
        return round(value, 6)
    return value


def run_one_episode(
    cfg: dict,
    runtime: Runtime,
    strategy: str,
    example: DatasetExample,
) -> EpisodeResult:
    episode_cfg = build_episode(cfg, strategy=strategy, rounds=runtime.episode.rounds)
    backends = build_backends(cfg, episode_cfg.roles, runtime.estimator, scope=example.id)
    return run_episode(
        example.question,
        episode_cfg,
        profiles=runtime.profiles,
        backends=backends,
        scorer=runtime.scorer,
        budgets=runtime.budgets,
        estimator=runtime.estimator,
        static_routes=runtime.static_routes,
        update_policy=runtime.update_policy,
        seed_items=seed_items(example, runtime.estimator),
    )


def _judge_answer(judge: AgentBackend, question: str, answer: str) -> tuple[int | None, str | None]:
    prompt = build_judge_prompt(question, answer)
    try:
        score, _ = parse_judge_score(judge.invoke(prompt).raw_text)
        return score, None
    except Exception as exc:
        return None, f"judge: {type(exc).__name__}: {exc}"


def episode_row(result: EpisodeResult, example: DatasetExample) -> dict:
    precision, recall, f1 = qa_prf1(result.final_answer, example.gold_answer)
    return {
        "example_id": example.id,
        "strategy": result.strategy,
        "runtime_s": _round6(total_latency_parallel(result.records)),
        "total_tokens": total_token_consumption(result.records),
        "answer_quality": None,
        "precision": _round6(precision),
        "recall": _round6(recall),
        "f1": _round6(f1),
        "final_answer": result.final_answer,
    }


def episode_round_rows(result: EpisodeResult) -> list[dict]:
    rows = []
    for record in result.records:
        qualities = [context_quality(a.context) for a in record.per_agent.values()]
        rows.append(
            {
                "round": record.round,
                "runtime_s": per_round_runtime(record),
                "tokens": sum(
                    a.prompt_tokens + a.completion_tokens for a in record.per_agent.values()
                ),
                "context_quality": statistics.fmean(qualities) if qualities else 0.0,
            }
        )
    return rows


def trace_lines(result: EpisodeResult, example_id: str) -> list[str]:
    lines = []
    for record in result.records:
        agents = {}
        for role, agent in record.per_agent.items():
            agents[role] = {
                "context_ids": list(agent.context.item_ids),
                "scores": [_round6(s) for s in agent.context.scores],
                "total_tokens": agent.context.total_tokens,
                "budget": agent.context.budget,
                "context_quality": _round6(context_quality(agent.context)),
                "prompt_tokens": agent.prompt_tokens,
                "completion_tokens": agent.completion_tokens,
                "latency_seconds": _round6(agent.latency_seconds),
                "error": agent.error,
            }
        lines.append(
            json.dumps(
                {
                    "type": "round",
                    "example_id": example_id,
                    "strategy": result.strategy,
                    "round": record.round,
                    "stage": record.stage,
                    "memory_size_before": record.memory_size_before,
                    "memory_size_after": record.memory_size_after,
                    "agents": agents,
                },
                sort_keys=True,
                ensure_ascii=False,
            )
        )
    lines.append(
        json.dumps(
            {
                "type": "final",
                "example_id": example_id,
                "strategy": result.strategy,
                "final_answer": result.final_answer,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
    )
    return lines


def _mean(values: Sequence[float]) -> float:
    return statistics.fmean(values) if values else 0.0


def aggregate_rows(strategy: str, rounds: int, rows: list[dict], round_rows: list[list[dict]]) -> dict:
    """Mean the per-example rows into one report row (fixed schema)."""
    qualities = [r["answer_quality"] for r in rows if r["answer_quality"] is not None]
    per_round = []
    for idx in range(rounds):
        slices = [rr[idx] for rr in round_rows if len(rr) > idx]
        per_round.append(
            {
                "round": idx + 1,
                "avg_runtime_s": _round6(_mean([s["runtime_s"] for s in slices])),
                "avg_tokens": _round6(_mean([s["tokens"] for s in slices])),
                "avg_context_quality": _round6(_mean([s["context_quality"] for s in slices])),
            }
        )
    return {
        "strategy": strategy,
        "rounds": rounds,
        "avg_runtime_s": _round6(_mean([r["runtime_s"] for r in rows])),
        "total_tokens": _round6(_mean([float(r["total_tokens"]) for r in rows])),
        "answer_quality": _round6(_mean(qualities)) if qualities else None,
        "precision": _round6(_mean([r["precision"] for r in rows])),
        "recall": _round6(_mean([r["recall"] for r in rows])),
        "f1": _round6(_mean([r["f1"] for r in rows])),
        "per_round": per_round,
    }


def _load_examples(cfg: dict, dataset_path, dataset_format: str) -> list[DatasetExample]:
    examples = ingest(dataset_path, dataset_format)
    limit = int(cfg["run"]["limit"])
    if limit:
        examples = examples[:limit]
    return examples


def _run_strategy(
    cfg: dict,
    runtime: Runtime,
    strategy: str,
    examples: Sequence[DatasetExample],
    judge: AgentBackend | None,
    trace_dir: Path | None,
    trace_suffix: str = "",
) -> tuple[list[dict], list[list[dict]], list[dict]]:
    """Per-example rows, per-example round rows, and errors for one strategy."""
    workers = max(1, int(cfg["run"]["workers"]))
    errors: list[dict] = []
    results: list[EpisodeResult | None] = [None] * len(examples)

    def attempt(i: int) -> None:
        try:
            results[i] = run_one_episode(cfg, runtime, strategy, examples[i])
        except Exception as exc:
            errors.append(
                {
                    "example_id": examples[i].id,
                    "strategy": strategy,
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )

    if workers == 1:
        for i in range(len(examples)):
            attempt(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(attempt, range(len(examples))))

    rows: list[dict] = []
    round_rows: list[list[dict]] = []
    for example, result in zip(examples, results):
        if result is None:
            continue
        row = episode_row(result, example)
        if judge is not None:
            score, err = _judge_answer(judge, example.question, result.final_answer)
            row["answer_quality"] = score
            if err:
                errors.append({"example_id": example.id, "strategy": strategy, "error": err})
        rows.append(row)
        round_rows.append(episode_round_rows(result))
        if trace_dir is not None:
            name = f"{example.id}__{strategy}{trace_suffix}.jsonl"
            (trace_dir / name).write_text(
                "\n".join(trace_lines(result, example.id)) + "\n", encoding="utf-8"
            )
    return rows, round_rows, errors


def run_experiment(cfg: dict, dataset_path, dataset_format: str, out_dir) -> dict:
    """Every strategy over every example; writes report.json, report.csv, traces."""
    out = Path(out_dir)
    trace_dir = out / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)

    examples = _load_examples(cfg, dataset_path, dataset_format)
    runtime = build_runtime(cfg)
    judge = build_judge(cfg, runtime.estimator)
    strategies = list(cfg["run"]["strategies"])

    reports: list[dict] = []
    per_example: list[dict] = []
    errors: list[dict] = []
    for strategy in strategies:
        rows, round_rows, strategy_errors = _run_strategy(
            cfg, runtime, strategy, examples, judge, trace_dir
        )
        errors.extend(strategy_errors)
        per_example.extend(rows)
        reports.append(aggregate_rows(strategy, runtime.episode.rounds, rows, round_rows))

    report = {
        "examples": len(examples),
        "strategies": strategies,
        "reports": reports,
        "per_example": per_example,
        "errors": errors,
    }
    write_report(report, out, csv_rows=reports)
    return report


def run_budget_ablation(cfg: dict, dataset_path, dataset_format: str, out_dir, budgets: Sequence[int]) -> dict:
    """One aggregate row per budget value, with uniform per-role budgets."""
    out = Path(out_dir)
    trace_dir = out / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    examples = _load_examples(cfg, dataset_path, dataset_format)
    strategies = list(cfg["run"]["strategies"])

    rows_out: list[dict] = []
    errors: list[dict] = []
    for budget in budgets:
        swept = json.loads(json.dumps(cfg))
        swept["budget"]["base_budget"] = int(budget)
        swept["budget"]["role_offsets"] = {}
        runtime = build_runtime(swept)
        judge = build_judge(swept, runtime.estimator)
        for strategy in strategies:
            rows, round_rows, strategy_errors = _run_strategy(
                swept, runtime, strategy, examples, judge, trace_dir, trace_suffix=f"__b{budget}"
            )
            errors.extend(strategy_errors)
            agg = aggregate_rows(strategy, runtime.episode.rounds, rows, round_rows)
            rows_out.append({"budget": int(budget), **agg})

    report = {"sweep": "budget", "examples": len(examples), "rows": rows_out, "errors": errors}
    write_report(report, out, csv_rows=rows_out, extra_columns=("budget",))
    return report


def run_rounds_ablation(cfg: dict, dataset_path, dataset_format: str, out_dir, rounds_values: Sequence[int]) -> dict:
    """One aggregate row per iteration-count value."""
    out = Path(out_dir)
    trace_dir = out / "traces"
    trace_dir.mkdir(parents=True, exist_ok=True)
    examples = _load_examples(cfg, dataset_path, dataset_format)
    strategies = list(cfg["run"]["strategies"])

    rows_out: list[dict] = []
    errors: list[dict] = []
    for rounds in rounds_values:
        runtime = build_runtime(cfg, rounds=int(rounds))
        judge = build_judge(cfg, runtime.estimator)
        for strategy in strategies:
            rows, round_rows, strategy_errors = _run_strategy(
                cfg, runtime, strategy, examples, judge, trace_dir, trace_suffix=f"__t{rounds}"
            )
            errors.extend(strategy_errors)
            agg = aggregate_rows(strategy, int(rounds), rows, round_rows)
            rows_out.append(agg)

    report = {"sweep": "rounds", "examples": len(examples), "rows": rows_out, "errors": errors}
    write_report(report, out, csv_rows=rows_out)
    return report


def write_report(report: dict, out_dir: Path, csv_rows: list[dict], extra_columns: Sequence[str] = ()) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    columns = tuple(extra_columns) + REPORT_COLUMNS
    with open(out_dir / "report.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in csv_rows:
            writer.writerow([_format_cell(row.get(col)) for col in columns])


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)
