"""Command-line experiment runner.

Subcommands: run (strategy comparison over a dataset), ablate-budget,
ablate-rounds, route (one-shot routing of a memory dump, for debugging),
judge (score an answers file). Flag values override the config file, which
overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .budget import allocate
from .config import build_judge, build_runtime, resolve_config
from .errors import CtxRouteError
from .experiments import run_budget_ablation, run_experiment, run_rounds_ablation
from .memory import MemoryStore
from .metrics import build_judge_prompt, parse_judge_score
from .router import route_greedy

DEFAULT_BUDGET_SWEEP = (512, 1024, 2048, 4096)
DEFAULT_ROUNDS_SWEEP = (1, 2, 3, 4, 5)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON or YAML config file")
    parser.add_argument("--seed", type=int, default=None, help="base seed for mock backends")
    parser.add_argument(
        "--backend", choices=("mock", "replay", "live"), default=None, help="agent backend kind"
    )


def _add_experiment_args(parser: argparse.ArgumentParser) -> None:
    _add_common(parser)
    parser.add_argument("--dataset", type=Path, required=True)
    parser.add_argument(
        "--format", default="generic", choices=("hotpotqa", "musique", "2wiki", "generic")
    )
    parser.add_argument(
        "--strategy",
        action="append",
        default=None,
        choices=("rcr", "full_context", "static"),
        help="repeatable; default from config",
    )
    parser.add_argument("--rounds", type=int, default=None)
    parser.add_argument("--budget", type=int, default=None, help="uniform per-role budget")
    parser.add_argument("--limit", type=int, default=None, help="max examples (0 = all)")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", type=Path, required=True, help="report/trace output directory")


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    run_section: dict = {}
    if getattr(args, "seed", None) is not None:
        run_section["seed"] = args.seed
    if getattr(args, "limit", None) is not None:
        run_section["limit"] = args.limit
    if getattr(args, "workers", None) is not None:
        run_section["workers"] = args.workers
    if getattr(args, "strategy", None):
        run_section["strategies"] = list(args.strategy)
    if run_section:
        overrides["run"] = run_section
    if getattr(args, "backend", None):
        overrides["backend"] = {"kind": args.backend}
    if getattr(args, "rounds", None) is not None:
        overrides.setdefault("episode", {})["rounds"] = args.rounds
    if getattr(args, "budget", None) is not None:
        overrides["budget"] = {"base_budget": args.budget, "role_offsets": {}}
    return overrides


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = resolve_config(args.config, _overrides_from_args(args))
    report = run_experiment(cfg, args.dataset, args.format, args.out)
    for row in report["reports"]:
        print(
            f"{row['strategy']}: runtime {row['avg_runtime_s']}s, "
            f"tokens {row['total_tokens']}, f1 {row['f1']}"
        )
    print(f"report written to {args.out}/report.json")
    return 0


def _cmd_ablate_budget(args: argparse.Namespace) -> int:
    cfg = resolve_config(args.config, _overrides_from_args(args))
    budgets = args.budgets or DEFAULT_BUDGET_SWEEP
    report = run_budget_ablation(cfg, args.dataset, args.format, args.out, budgets)
    for row in report["rows"]:
        print(f"budget {row['budget']}: tokens {row['total_tokens']}, f1 {row['f1']}")
    return 0


def _cmd_ablate_rounds(args: argparse.Namespace) -> int:
    cfg = resolve_config(args.config, _overrides_from_args(args))
    sweeps = args.rounds_sweep or DEFAULT_ROUNDS_SWEEP
    report = run_rounds_ablation(cfg, args.dataset, args.format, args.out, sweeps)
    for row in report["rows"]:
        print(f"rounds {row['rounds']}: tokens {row['total_tokens']}, f1 {row['f1']}")
    return 0


def _cmd_route(args: argparse.Namespace) -> int:
    cfg = resolve_config(args.config, _overrides_from_args(args))
    runtime = build_runtime(cfg)
    store = MemoryStore.read_jsonl(args.memory, runtime.estimator)
    round_index = args.round if args.round is not None else store.current_round
    budget = args.budget if args.budget is not None else allocate(args.role, runtime.budgets)
    context = route_greedy(
        store.snapshot(), args.role, args.stage, round_index, budget, runtime.scorer
    )
    print(
        json.dumps(
            {
                "role": args.role,
                "stage": args.stage,
                "round": round_index,
                "budget": budget,
                "total_tokens": context.total_tokens,
                "selected": [
                    {"id": m.id, "score": round(s, 6), "tokens": m.token_length}
                    for m, s in zip(context.items, context.scores)
                ],
            },
            indent=2,
            sort_keys=True,
            ensure_ascii=False,
        )
    )
    return 0


def _cmd_judge(args: argparse.Namespace) -> int:
    overrides = _overrides_from_args(args)
    overrides["judge"] = {"enabled": True}
    if args.backend == "live":
        overrides["judge"]["kind"] = "live"
    cfg = resolve_config(args.config, overrides)
    runtime = build_runtime(cfg)
    judge = build_judge(cfg, runtime.estimator)

    rows = []
    with open(args.answers, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))

    scored = []
    for row in rows:
        question = row.get("question") or row.get("query") or ""
        answer = row.get("answer", "")
        prompt = build_judge_prompt(question, answer)
        result = judge.invoke(prompt)
        entry = dict(row)
        try:
            score, justification = parse_judge_score(result.raw_text)
            entry["score"] = score
            entry["justification"] = justification
        except CtxRouteError as exc:
            entry["score"] = None
            entry["error"] = f"{type(exc).__name__}: {exc}"
        scored.append(entry)

    out_path = args.out or Path(str(args.answers) + ".judged.jsonl")
    with open(out_path, "w", encoding="utf-8") as fh:
        for entry in scored:
            fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
    valid = [e["score"] for e in scored if e.get("score") is not None]
    mean = sum(valid) / len(valid) if valid else 0.0
    print(f"judged {len(scored)} answers, mean score {mean:.6f}, wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxroute",
        description="Role-aware, token-budgeted context routing experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="compare routing strategies over a dataset")
    _add_experiment_args(run_p)
    run_p.set_defaults(func=_cmd_run)

    ab = sub.add_parser("ablate-budget", help="sweep the uniform per-role token budget")
    _add_experiment_args(ab)
    ab.add_argument("--budgets", type=int, nargs="+", default=None)
    ab.set_defaults(func=_cmd_ablate_budget)

    ar = sub.add_parser("ablate-rounds", help="sweep the iteration count")
    _add_experiment_args(ar)
    ar.add_argument("--rounds-sweep", type=int, nargs="+", default=None)
    ar.set_defaults(func=_cmd_ablate_rounds)

    rt = sub.add_parser("route", help="route one memory dump for a role (debugging)")
    _add_common(rt)
    rt.add_argument("--memory", type=Path, required=True, help="JSON-Lines memory dump")
    rt.add_argument("--role", required=True)
    rt.add_argument("--stage", default="")
    rt.add_argument("--round", type=int, default=None)
    rt.add_argument("--budget", type=int, default=None)
    rt.set_defaults(func=_cmd_route)

    jd = sub.add_parser("judge", help="score an answers file with the judge protocol")
    _add_common(jd)
    jd.add_argument("--answers", type=Path, required=True, help="JSONL of {question, answer}")
    jd.add_argument("--out", type=Path, default=None)
    jd.set_defaults(func=_cmd_judge)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CtxRouteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
