"""Command-line entry point: gen, solve, verify, run, eval, report.

Exit codes: 0 success, 1 usage error, 2 runtime failure; `verify --strict`
exits 3 when the schedule is infeasible (the tool itself still succeeded).
Precedence for settings: command-line flag > config file > built-in
default. Environment overrides: SCHEDLOOP_OUT (default output directory)
and SCHEDLOOP_AGENT (default agent descriptor).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .agents import InstanceRegistry, RegisteredInstance, build_agent
from .core import verify
from .evaluation import (
    EvalCondition,
    RunReport,
    _heatmap_jsonable,
    emit_report,
    eval_per_tier,
)
from .generator import default_tiers, generate_certified
from .loop import CorrectnessMode, RunConfig
from .loop import run as run_pipeline
from .seeding import mix
from .solver import DEFAULT_NODE_BUDGET, SolveStatus, solve_optimal
from .textio import (
    canonical_json,
    read_instance,
    read_schedule,
    render_feedback,
    schedule_to_text,
    write_instance,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_INFEASIBLE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage errors, not argparse's 2
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="schedloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate canonical instance files")
    gen.add_argument("--tier", type=int, required=True, choices=range(6))
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--out", type=Path, default=None)

    solve = sub.add_parser("solve", help="exact optimal makespan for an instance")
    solve.add_argument("instance", type=Path)
    solve.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    solve.add_argument(
        "--require-optimal-witness",
        action="store_true",
        help="re-verify the witness before printing (sanity mode)",
    )

    ver = sub.add_parser("verify", help="check a schedule against an instance")
    ver.add_argument("instance", type=Path)
    ver.add_argument("schedule", type=Path)
    ver.add_argument("--oracle-makespan", type=int, default=None)
    ver.add_argument(
        "--strict",
        action="store_true",
        help="exit 3 when the schedule is infeasible",
    )

    run = sub.add_parser("run", help="training loop + evaluation pipeline")
    run.add_argument("--config", type=Path, default=None)
    run.add_argument("--agent", default=None, help="mock:NAME | stdio:CMD | http:URL")
    run.add_argument("--seed", type=int, default=None, help="single run seed override")
    run.add_argument("--out", type=Path, default=None)
    run.add_argument("--parallel", type=int, default=1)
    run.add_argument("--iterations", type=int, default=None)
    run.add_argument("--rollouts", type=int, default=None)
    run.add_argument("--no-buffer", action="store_true")
    run.add_argument("--no-cot", action="store_true")
    run.add_argument("--dedup", action="store_true")
    run.add_argument("--timeout", type=float, default=None)
    run.add_argument(
        "--require-optimal",
        action="store_true",
        help="correctness requires matching the oracle makespan",
    )

    ev = sub.add_parser("eval", help="per-tier evaluation of an agent")
    ev.add_argument("--agent", default=None)
    ev.add_argument(
        "--condition",
        default="zero-shot",
        help="zero-shot | k-shot:K | multi-turn:N",
    )
    ev.add_argument("--no-cot", action="store_true")
    ev.add_argument("--tiers", default="0,1,2,3,4,5", help="comma list or A..B")
    ev.add_argument("--n", type=int, default=5, help="problems per tier")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", type=Path, default=None)
    ev.add_argument("--config", type=Path, default=None)
    ev.add_argument("--timeout", type=float, default=None)

    rep = sub.add_parser("report", help="regenerate aggregate files for a run dir")
    rep.add_argument("--run", type=Path, required=True)
    rep.add_argument("--format", choices=("table", "structured"), default="table")
    return parser


def _parse_condition(text: str) -> EvalCondition:
    if text == "zero-shot":
        return EvalCondition(kind="zero_shot")
    if text.startswith("k-shot:"):
        return EvalCondition(kind="k_shot", k=int(text.split(":", 1)[1]))
    if text.startswith("multi-turn:"):
        return EvalCondition(kind="multi_turn", max_turns=int(text.split(":", 1)[1]))
    raise _UsageError(f"unknown condition {text!r}")


def _parse_tiers(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t.strip()]


def _load_config(path: Optional[Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.from_dict(json.loads(Path(path).read_text()))


def _resolve_out(flag: Optional[Path], default_name: str) -> Path:
    if flag is not None:
        return flag
    env = os.environ.get("SCHEDLOOP_OUT")
    if env:
        return Path(env) / default_name
    return Path(default_name)


def _resolve_agent(flag: Optional[str]) -> str:
    descriptor = flag or os.environ.get("SCHEDLOOP_AGENT")
    if not descriptor:
        raise _UsageError("no agent given: pass --agent or set SCHEDLOOP_AGENT")
    return descriptor


def _cmd_gen(args) -> int:
    spec = default_tiers()[args.tier]
    out_dir = _resolve_out(args.out, "instances")
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        cert = generate_certified(spec, args.seed + i)
        path = out_dir / f"{cert.instance.instance_id}.json"
        write_instance(cert.instance, path)
        print(path)
    return EXIT_OK


def _cmd_solve(args) -> int:
    instance = read_instance(args.instance)
    result = solve_optimal(instance, node_budget=args.node_budget)
    if result.status is SolveStatus.ABORTED:
        print("aborted: node budget exhausted", file=sys.stderr)
        return EXIT_RUNTIME
    if result.status is SolveStatus.INFEASIBLE:
        print("infeasible")
        return EXIT_OK
    assert result.witness is not None
    if args.require_optimal_witness:
        verdict = verify(instance, result.witness, oracle_makespan=result.makespan)
        if not verdict.optimal:
            print("internal error: witness failed verification", file=sys.stderr)
            return EXIT_RUNTIME
    print(f"optimal makespan {result.makespan}")
    print(schedule_to_text(result.witness), end="")
    return EXIT_OK


def _cmd_verify(args) -> int:
    instance = read_instance(args.instance)
    schedule = read_schedule(args.schedule)
    verdict = verify(instance, schedule, oracle_makespan=args.oracle_makespan)
    if verdict.feasible:
        line = f"feasible, makespan {verdict.makespan}"
        if verdict.optimal is not None:
            line += ", optimal" if verdict.optimal else ", suboptimal"
        print(line)
        return EXIT_OK
    print(render_feedback(verdict))
    return EXIT_INFEASIBLE if args.strict else EXIT_OK


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    overrides: dict = {}
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.rollouts is not None:
        overrides["rollouts_per_iteration"] = args.rollouts
    if args.no_buffer:
        overrides["no_buffer"] = True
    if args.no_cot:
        overrides["no_cot"] = True
    if args.dedup:
        overrides["dedup"] = True
    if args.require_optimal:
        overrides["correctness_mode"] = CorrectnessMode.OPTIMAL_REQUIRED
    if args.parallel:
        overrides["parallel"] = args.parallel
    if args.timeout is not None:
        overrides["timeout"] = args.timeout
    config = replace(config, **overrides)
    descriptor = _resolve_agent(args.agent)
    out_dir = _resolve_out(args.out, "run")

    def factory(seed: int, registry: InstanceRegistry):
        return build_agent(descriptor, registry, timeout=config.timeout)

    report = run_pipeline(config, factory, out_dir)
    overall = report.aggregate["overall_accuracy"]
    print(f"run complete: {out_dir}")
    print(
        f"overall accuracy {overall['mean']:.3f} ± {overall['std']:.3f} "
        f"({report.aggregate['condition']})"
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = _load_config(args.config)
    if args.timeout is not None:
        config = replace(config, timeout=args.timeout)
    condition = _parse_condition(args.condition)
    if args.no_cot:
        condition = replace(condition, chain_of_thought=False)
    tiers = _parse_tiers(args.tiers)
    registry = InstanceRegistry()
    descriptor = _resolve_agent(args.agent)
    agent = build_agent(descriptor, registry, timeout=config.timeout)
    try:
        evals = eval_per_tier(
            agent,
            condition,
            tiers,
            args.n,
            args.seed,
            config,
            registry,
            eval_iteration=config.iterations + 1,
        )
    finally:
        agent.close()
    doc = {
        "condition": condition.label(),
        "seed": args.seed,
        "tiers": [e.to_dict() for e in evals],
    }
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "tier_evals.json").write_text(canonical_json(doc))
    for e in evals:
        print(f"tier {e.tier}: {e.correct}/{e.problems} = {e.accuracy:.3f}")
    return EXIT_OK


def _cmd_report(args) -> int:
    report_path = args.run / "report.json"
    doc = json.loads(report_path.read_text())
    heatmap = doc["heatmap"]
    if args.format == "structured":
        print(canonical_json(doc), end="")
        return EXIT_OK
    # Rebuild the flat tables from the stored per-seed data (read-only,
    # deterministic) and rewrite them next to the report.
    report = RunReport(
        config=doc["config"],
        per_seed=doc["per_seed"],
        heatmap=_heatmap_from_jsonable(heatmap),
        aggregate=doc["aggregate"],
        trainer_supported=doc["trainer_supported"],
    )
    for path in emit_report(report, args.run):
        print(path)
    return EXIT_OK


def _heatmap_from_jsonable(doc: dict) -> dict:
    def cell(v):
        return None if v == "unreached" else int(v)

    return {
        "per_seed": {
            int(seed): {int(t): cell(v) for t, v in row.items()}
            for seed, row in doc["per_seed"].items()
        },
        "modal": {int(t): cell(v) for t, v in doc["modal"].items()},
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    handlers = {
        "gen": _cmd_gen,
        "solve": _cmd_solve,
        "verify": _cmd_verify,
        "run": _cmd_run,
        "eval": _cmd_eval,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failures map to exit 2
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
