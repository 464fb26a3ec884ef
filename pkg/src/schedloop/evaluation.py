"""Evaluation conditions, dynamics metrics, and report emission.

Per-tier evaluation generates held-out instances from a seed stream
disjoint from training (namespaced mixing, audited at assembly time) and
queries the agent greedily (temperature 0, pinned seeds). Multi-turn
evaluation replays verifier feedback back to the agent and records the
full trajectory, one verdict per turn. The emergence heatmap is computed
twice, from the replay buffer's bookkeeping and from an independent scan
of the admission log, and the two derivations must agree.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .agents import (
    AgentHandle,
    AgentRequest,
    InstanceRegistry,
    RegisteredInstance,
    TransportError,
)
from .core import verify
from .generator import generate_certified
from .loop import (
    AgentFactory,
    CorrectnessMode,
    ReplayBuffer,
    RunConfig,
    SeedRunResult,
    run_training_for_seed,
)
from .seeding import NS_EVAL_INSTANCE, NS_EVAL_REQUEST, NS_SHOT_BANK, mix
from .textio import (
    PromptStyle,
    canonical_json,
    instance_to_dict,
    parse_response,
    render_feedback,
    render_prompt,
)


class ConsistencyError(RuntimeError):
    """Buffer bookkeeping and the admission log disagree: a harness bug."""


@dataclass(frozen=True)
class EvalCondition:
    kind: str = "zero_shot"  # zero_shot | k_shot | multi_turn
    k: int = 0
    max_turns: int = 1
    chain_of_thought: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("zero_shot", "k_shot", "multi_turn"):
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.kind == "k_shot" and self.k < 1:
            raise ValueError("k_shot requires k >= 1")
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")

    def label(self) -> str:
        base = {
            "zero_shot": "zero-shot",
            "k_shot": f"{self.k}-shot",
            "multi_turn": f"multi-turn:{self.max_turns}",
        }[self.kind]
        return base if self.chain_of_thought else base + ":no-cot"


@dataclass(frozen=True)
class TierEval:
    tier: int
    problems: int
    correct: int
    records: tuple[dict, ...]

    @property
    def accuracy(self) -> float:
        return self.correct / self.problems if self.problems else 0.0

    def to_dict(self) -> dict:
        return {
            "tier": self.tier,
            "problems": self.problems,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "records": list(self.records),
        }


def _verdict_dict(verdict) -> dict:
    return {
        "feasible": verdict.feasible,
        "makespan": verdict.makespan,
        "optimal": verdict.optimal,
        "violations": [repr(v) for v in verdict.violations],
    }


def _is_correct(verdict, mode: CorrectnessMode) -> bool:
    if mode is CorrectnessMode.FEASIBLE:
        return verdict.feasible
    return bool(verdict.optimal)


def _shot_bank(config: RunConfig, eval_seed: int, k: int):
    spec = config.tier_spec(0)
    bank = []
    for j in range(k):
        cert = generate_certified(
            spec, mix(eval_seed, NS_SHOT_BANK, j), node_budget=config.node_budget
        )
        bank.append((cert.instance, cert.witness))
    return bank


def multi_turn_eval(
    agent: AgentHandle,
    item: RegisteredInstance,
    max_turns: int,
    request_seed: int,
    mode: CorrectnessMode = CorrectnessMode.FEASIBLE,
    chain_of_thought: bool = True,
    eval_iteration: int = 0,
    request_prefix: str = "mt",
) -> dict:
    """Revision-with-feedback trajectory for one instance.

    Turn 1 is the base prompt; each later turn appends the previous
    verdict's rendered feedback. Stops early on success. The returned
    record holds every turn's raw text, parse outcome, and verdict.
    """
    oracle = item.makespan if mode is CorrectnessMode.OPTIMAL_REQUIRED else None
    turns: list[dict] = []
    feedback: Optional[str] = None
    success = False
    for turn in range(1, max_turns + 1):
        style = PromptStyle(chain_of_thought=chain_of_thought, feedback=feedback)
        prompt = render_prompt(item.instance, style)
        request = AgentRequest(
            request_id=f"{request_prefix}-{item.instance.instance_id}-t{turn}",
            prompt=prompt,
            temperature=0.0,
            seed=mix(request_seed, turn),
            max_tokens=4096,
            meta={
                "tier": item.instance.tier,
                "iteration": eval_iteration,
                "instance_id": item.instance.instance_id,
            },
        )
        try:
            response = agent.complete(request)
        except TransportError as exc:
            turns.append(
                {"turn": turn, "prompt": prompt, "error": f"transport: {exc}"}
            )
            break
        outcome = parse_response(response.text)
        record: dict = {"turn": turn, "prompt": prompt, "response": response.text}
        if not outcome.ok:
            record["parse_error"] = repr(outcome.error)
            # An unparseable reply still consumes a turn; feedback repeats.
            turns.append(record)
            continue
        assert outcome.schedule is not None
        verdict = verify(item.instance, outcome.schedule, oracle_makespan=oracle)
        record["schedule"] = dict(sorted(outcome.schedule.starts.items()))
        record["verdict"] = _verdict_dict(verdict)
        turns.append(record)
        if _is_correct(verdict, mode):
            success = True
            break
        feedback = render_feedback(verdict) if not verdict.feasible else None
    return {
        "instance_id": item.instance.instance_id,
        "success": success,
        "turns": turns,
    }


def eval_per_tier(
    agent: AgentHandle,
    condition: EvalCondition,
    tiers: Sequence[int],
    problems_per_tier: int,
    eval_seed: int,
    config: RunConfig,
    registry: InstanceRegistry,
    eval_iteration: int = 0,
    seed_log: Optional[set[int]] = None,
) -> list[TierEval]:
    """Accuracy per tier on freshly generated, eval-namespaced instances."""
    if problems_per_tier < 1:
        raise ValueError("problems_per_tier must be >= 1")
    bank = _shot_bank(config, eval_seed, condition.k) if condition.kind == "k_shot" else []
    evals = []
    for tier in tiers:
        spec = config.tier_spec(tier)
        correct = 0
        records: list[dict] = []
        for index in range(problems_per_tier):
            instance_seed = mix(eval_seed, NS_EVAL_INSTANCE, tier, index)
            if seed_log is not None:
                seed_log.add(instance_seed)
            cert = generate_certified(
                spec, instance_seed, node_budget=config.node_budget
            )
            item = RegisteredInstance(
                instance=cert.instance, makespan=cert.makespan, witness=cert.witness
            )
            registry.register(item)
            request_seed = mix(eval_seed, NS_EVAL_REQUEST, tier, index)
            if condition.kind == "multi_turn":
                trajectory = multi_turn_eval(
                    agent,
                    item,
                    condition.max_turns,
                    request_seed,
                    mode=config.correctness_mode,
                    chain_of_thought=condition.chain_of_thought,
                    eval_iteration=eval_iteration,
                    request_prefix=f"eval-{eval_seed}",
                )
                if trajectory["success"]:
                    correct += 1
                records.append(
                    {
                        "instance_id": item.instance.instance_id,
                        "turns": len(trajectory["turns"]),
                        "success": trajectory["success"],
                        "trajectory": trajectory,
                    }
                )
                continue
            style = PromptStyle(
                chain_of_thought=condition.chain_of_thought,
                shots=condition.k if condition.kind == "k_shot" else 0,
            )
            prompt = render_prompt(item.instance, style, shot_bank=bank)
            request = AgentRequest(
                request_id=f"eval-{eval_seed}-{tier}-{index}",
                prompt=prompt,
                temperature=0.0,
                seed=request_seed,
                max_tokens=4096,
                meta={
                    "tier": tier,
                    "iteration": eval_iteration,
                    "instance_id": item.instance.instance_id,
                },
            )
            record: dict = {"instance_id": item.instance.instance_id, "turns": 1}
            try:
                response = agent.complete(request)
            except TransportError as exc:
                record.update({"success": False, "error": f"transport: {exc}"})
                records.append(record)
                continue
            outcome = parse_response(response.text)
            if not outcome.ok:
                record.update({"success": False, "error": repr(outcome.error)})
                records.append(record)
                continue
            assert outcome.schedule is not None
            oracle = (
                item.makespan
                if config.correctness_mode is CorrectnessMode.OPTIMAL_REQUIRED
                else None
            )
            verdict = verify(item.instance, outcome.schedule, oracle_makespan=oracle)
            ok = _is_correct(verdict, config.correctness_mode)
            if ok:
                correct += 1
            record.update({"success": ok, "verdict": _verdict_dict(verdict)})
            records.append(record)
        evals.append(
            TierEval(
                tier=tier,
                problems=problems_per_tier,
                correct=correct,
                records=tuple(records),
            )
        )
    return evals


def first_correct_from_log(
    admission_log: Sequence[tuple[int, int, str]]
) -> dict[int, int]:
    """Independent derivation of the emergence map from the admission log."""
    first: dict[int, int] = {}
    for iteration, tier, _ in admission_log:
        if tier not in first or iteration < first[tier]:
            first[tier] = iteration
    return first


def emergence_heatmap(
    buffers: dict[int, ReplayBuffer], tiers: Sequence[int]
) -> dict:
    """Per-seed first-correct iteration per tier, plus a modal aggregate.

    Cross-checks buffer bookkeeping against the admission log; a mismatch
    raises ConsistencyError.
    """
    per_seed: dict[int, dict[int, Optional[int]]] = {}
    for seed, buffer in buffers.items():
        from_log = first_correct_from_log(buffer.admission_log)
        if from_log != buffer.first_correct:
            raise ConsistencyError(
                f"seed {seed}: buffer first_correct {buffer.first_correct} "
                f"!= log-derived {from_log}"
            )
        per_seed[seed] = {t: buffer.first_correct.get(t) for t in tiers}
    modal: dict[int, Optional[int]] = {}
    for tier in tiers:
        values = [per_seed[s][tier] for s in per_seed]
        counts: dict[Optional[int], int] = {}
        for v in values:
            counts[v] = counts.get(v, 0) + 1
        best = max(
            counts.items(),
            key=lambda kv: (kv[1], -(kv[0] if kv[0] is not None else 1 << 30)),
        )
        modal[tier] = best[0]
    return {"per_seed": per_seed, "modal": modal}


@dataclass
class RunReport:
    config: dict
    per_seed: list[dict]
    heatmap: dict
    aggregate: dict
    trainer_supported: bool

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "per_seed": self.per_seed,
            "heatmap": _heatmap_jsonable(self.heatmap),
            "aggregate": self.aggregate,
            "trainer_supported": self.trainer_supported,
        }


def _heatmap_jsonable(heatmap: dict) -> dict:
    def cell(v: Optional[int]):
        return v if v is not None else "unreached"

    return {
        "per_seed": {
            str(seed): {str(t): cell(v) for t, v in row.items()}
            for seed, row in heatmap["per_seed"].items()
        },
        "modal": {str(t): cell(v) for t, v in heatmap["modal"].items()},
    }


def _mean_std(values: Sequence[float]) -> dict:
    mean = statistics.mean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return {"mean": mean, "std": std}


def assemble_run_report(
    config: RunConfig, agent_factory: AgentFactory, out_dir: Path
) -> RunReport:
    """Run training + evaluation for every configured seed and emit files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(canonical_json(config.to_dict()))

    all_tiers = sorted({spec.tier for spec in config.tiers})
    eval_tiers = sorted(config.training_tiers | config.holdout_tiers)
    condition = EvalCondition(
        kind="zero_shot", chain_of_thought=not config.no_cot
    )

    buffers: dict[int, ReplayBuffer] = {}
    per_seed_docs: list[dict] = []
    per_seed_accuracy: dict[int, list[float]] = {t: [] for t in eval_tiers}
    overall_accuracy: list[float] = []
    trainer_supported = True

    for run_seed in config.seeds:
        seed_dir = out_dir / f"seed_{run_seed}"
        registry = InstanceRegistry()
        agent = agent_factory(run_seed, registry)
        try:
            training: SeedRunResult = run_training_for_seed(
                config, run_seed, agent, registry, seed_dir
            )
            eval_seed_log: set[int] = set()
            evals = eval_per_tier(
                agent,
                condition,
                eval_tiers,
                config.eval_problems_per_tier,
                run_seed,
                config,
                registry,
                eval_iteration=config.iterations + 1,
                seed_log=eval_seed_log,
            )
        finally:
            agent.close()
        overlap = training.train_instance_seeds & eval_seed_log
        if overlap:
            raise ConsistencyError(
                f"seed {run_seed}: training and eval instance seeds overlap: "
                f"{sorted(overlap)[:5]}"
            )
        buffers[run_seed] = training.buffer
        if any(ack != "train_ack" for ack in training.trainer_acks):
            trainer_supported = False

        eval_dir = seed_dir / "eval"
        eval_dir.mkdir(parents=True, exist_ok=True)
        (eval_dir / "tier_evals.json").write_text(
            canonical_json(
                {
                    "condition": condition.label(),
                    "tiers": [e.to_dict() for e in evals],
                }
            )
        )
        instances_dir = seed_dir / "instances"
        instances_dir.mkdir(parents=True, exist_ok=True)
        for item in registry.all_items():
            (instances_dir / f"{item.instance.instance_id}.json").write_text(
                canonical_json(instance_to_dict(item.instance))
            )

        accuracies = {e.tier: e.accuracy for e in evals}
        for t in eval_tiers:
            per_seed_accuracy[t].append(accuracies[t])
        overall_accuracy.append(statistics.mean(accuracies.values()))
        per_seed_docs.append(
            {
                "seed": run_seed,
                "iterations": [m.to_dict() for m in training.metrics],
                "first_correct": {
                    str(t): training.buffer.first_correct.get(t, "unreached")
                    for t in all_tiers
                },
                "trainer_acks": training.trainer_acks,
                "buffer_size": len(training.buffer),
                "tier_evals": [e.to_dict() for e in evals],
            }
        )

    heatmap = emergence_heatmap(buffers, all_tiers)
    aggregate = {
        "per_tier_accuracy": {
            str(t): _mean_std(per_seed_accuracy[t]) for t in eval_tiers
        },
        "overall_accuracy": _mean_std(overall_accuracy),
        "condition": condition.label(),
    }
    report = RunReport(
        config=config.to_dict(),
        per_seed=per_seed_docs,
        heatmap=heatmap,
        aggregate=aggregate,
        trainer_supported=trainer_supported,
    )
    emit_report(report, out_dir)
    return report


def emit_report(report: RunReport, out_dir: Path) -> list[Path]:
    """Write the structured report plus flat CSV plot-data tables."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    report_path = out_dir / "report.json"
    try:
        report_path.write_text(canonical_json(report.to_dict()))
    except OSError as exc:
        raise RuntimeError(f"failed to write report: {exc}") from exc
    written.append(report_path)

    hit_lines = ["seed,iteration,rollouts_attempted,rollouts_correct,hit_rate"]
    comp_lines = ["seed,iteration,tier,count"]
    for seed_doc in report.per_seed:
        for m in seed_doc["iterations"]:
            hit_lines.append(
                f"{seed_doc['seed']},{m['iteration']},{m['rollouts_attempted']},"
                f"{m['rollouts_correct']},{m['hit_rate']:.6f}"
            )
            for tier, count in sorted(m["buffer_composition"].items(), key=lambda kv: int(kv[0])):
                comp_lines.append(
                    f"{seed_doc['seed']},{m['iteration']},{tier},{count}"
                )

    acc_lines = ["seed,condition,tier,problems,correct,accuracy"]
    condition = report.aggregate["condition"]
    for seed_doc in report.per_seed:
        for e in seed_doc["tier_evals"]:
            acc_lines.append(
                f"{seed_doc['seed']},{condition},{e['tier']},{e['problems']},"
                f"{e['correct']},{e['accuracy']:.6f}"
            )

    heat = _heatmap_jsonable(report.heatmap)
    heat_lines = ["seed,tier,first_correct"]
    for seed, row in heat["per_seed"].items():
        for tier, value in sorted(row.items(), key=lambda kv: int(kv[0])):
            heat_lines.append(f"{seed},{tier},{value}")
    for tier, value in sorted(heat["modal"].items(), key=lambda kv: int(kv[0])):
        heat_lines.append(f"modal,{tier},{value}")

    for name, lines in (
        ("hit_rate.csv", hit_lines),
        ("buffer_composition.csv", comp_lines),
        ("tier_accuracy.csv", acc_lines),
        ("heatmap.csv", heat_lines),
    ):
        path = out_dir / name
        path.write_text("".join(line + "\n" for line in lines))
        written.append(path)
    return written
