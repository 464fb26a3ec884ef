"""Rejection-sampling training loop with an accumulating replay buffer.

Each iteration samples problems round-robin over the training tiers,
requests high-temperature completions, verifies them against ground truth,
and admits only verified-correct traces to the replay buffer. The batch
emitted after each iteration contains everything the buffer has
accumulated (the implicit curriculum), or only the current iteration's
traces under the no-buffer ablation. All randomness is derived from the
run seed through the public mixing function, so parallel execution admits
exactly the same traces in exactly the same order as sequential.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence

from .agents import (
    AgentHandle,
    AgentRequest,
    InstanceRegistry,
    RegisteredInstance,
    TransportError,
)
from .core import Schedule, verify
from .generator import (
    TierSpec,
    default_tiers,
    generate_certified,
    tier_spec_from_dict,
    tier_spec_to_dict,
)
from .seeding import NS_ROLLOUT, NS_TRAIN_INSTANCE, mix
from .solver import DEFAULT_NODE_BUDGET
from .textio import ParseOutcome, PromptStyle, TraceRecord, parse_response, render_prompt, write_trace_file


class CorrectnessMode(Enum):
    FEASIBLE = "feasible"
    OPTIMAL_REQUIRED = "optimal_required"


@dataclass(frozen=True)
class RunConfig:
    iterations: int = 6
    rollouts_per_iteration: int = 84
    temperature: float = 0.8
    seeds: tuple[int, ...] = (42, 123, 456)
    training_tiers: frozenset[int] = frozenset({0, 1, 2, 3, 4})
    holdout_tiers: frozenset[int] = frozenset({5})
    correctness_mode: CorrectnessMode = CorrectnessMode.FEASIBLE
    no_buffer: bool = False
    no_cot: bool = False
    dedup: bool = False
    eval_problems_per_tier: int = 5
    max_tokens: int = 1024
    node_budget: int = DEFAULT_NODE_BUDGET
    tiers: tuple[TierSpec, ...] = tuple(default_tiers())
    # Execution-only knobs; deliberately excluded from serialized config so
    # parallel and sequential runs produce byte-identical artifacts.
    parallel: int = 1
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if self.iterations < 1 or self.rollouts_per_iteration < 1:
            raise ValueError("iterations and rollouts_per_iteration must be positive")
        if self.training_tiers & self.holdout_tiers:
            raise ValueError("training and holdout tiers must be disjoint")
        known = {spec.tier for spec in self.tiers}
        missing = (self.training_tiers | self.holdout_tiers) - known
        if missing:
            raise ValueError(f"no tier spec for tiers {sorted(missing)}")

    def tier_spec(self, tier: int) -> TierSpec:
        for spec in self.tiers:
            if spec.tier == tier:
                return spec
        raise KeyError(tier)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "rollouts_per_iteration": self.rollouts_per_iteration,
            "temperature": self.temperature,
            "seeds": list(self.seeds),
            "training_tiers": sorted(self.training_tiers),
            "holdout_tiers": sorted(self.holdout_tiers),
            "correctness_mode": self.correctness_mode.value,
            "no_buffer": self.no_buffer,
            "no_cot": self.no_cot,
            "dedup": self.dedup,
            "eval_problems_per_tier": self.eval_problems_per_tier,
            "max_tokens": self.max_tokens,
            "node_budget": self.node_budget,
            "tiers": [tier_spec_to_dict(spec) for spec in self.tiers],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        kwargs: dict = {}
        for key in (
            "iterations",
            "rollouts_per_iteration",
            "temperature",
            "no_buffer",
            "no_cot",
            "dedup",
            "eval_problems_per_tier",
            "max_tokens",
            "node_budget",
        ):
            if key in doc:
                kwargs[key] = doc[key]
        if "seeds" in doc:
            kwargs["seeds"] = tuple(doc["seeds"])
        if "training_tiers" in doc:
            kwargs["training_tiers"] = frozenset(doc["training_tiers"])
        if "holdout_tiers" in doc:
            kwargs["holdout_tiers"] = frozenset(doc["holdout_tiers"])
        if "correctness_mode" in doc:
            kwargs["correctness_mode"] = CorrectnessMode(doc["correctness_mode"])
        if "tiers" in doc:
            kwargs["tiers"] = tuple(tier_spec_from_dict(t) for t in doc["tiers"])
        return cls(**kwargs)


@dataclass(frozen=True)
class TrainingTrace:
    instance_id: str
    tier: int
    iteration_admitted: int
    prompt: str
    completion: str
    schedule: Schedule


class ReplayBuffer:
    """Append-only store of verified-correct traces with tier bookkeeping."""

    def __init__(self) -> None:
        self.traces: list[TrainingTrace] = []
        self.per_tier_counts: dict[int, int] = {}
        self.first_correct: dict[int, int] = {}
        self.admission_log: list[tuple[int, int, str]] = []

    def admit(self, trace: TrainingTrace) -> None:
        self.traces.append(trace)
        self.per_tier_counts[trace.tier] = self.per_tier_counts.get(trace.tier, 0) + 1
        if trace.tier not in self.first_correct:
            self.first_correct[trace.tier] = trace.iteration_admitted
        self.admission_log.append(
            (trace.iteration_admitted, trace.tier, trace.instance_id)
        )

    def composition(self, tiers: Sequence[int]) -> dict[int, int]:
        return {t: self.per_tier_counts.get(t, 0) for t in tiers}

    def __len__(self) -> int:
        return len(self.traces)


@dataclass(frozen=True)
class IterationMetrics:
    iteration: int
    rollouts_attempted: int
    rollouts_correct: int
    hit_rate: float
    buffer_composition: dict[int, int]
    errors: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "rollouts_attempted": self.rollouts_attempted,
            "rollouts_correct": self.rollouts_correct,
            "hit_rate": self.hit_rate,
            "buffer_composition": {str(k): v for k, v in sorted(self.buffer_composition.items())},
            "errors": dict(sorted(self.errors.items())),
        }


@dataclass
class _Rollout:
    index: int
    tier: int
    item: RegisteredInstance
    prompt: str
    request: AgentRequest


def _prepare_rollouts(
    config: RunConfig,
    run_seed: int,
    iteration: int,
    registry: InstanceRegistry,
    seed_log: Optional[set[int]] = None,
) -> list[_Rollout]:
    tiers = sorted(config.training_tiers)
    style = PromptStyle(chain_of_thought=not config.no_cot)
    rollouts = []
    for i in range(config.rollouts_per_iteration):
        tier = tiers[i % len(tiers)]
        instance_seed = mix(run_seed, NS_TRAIN_INSTANCE, iteration, i)
        if seed_log is not None:
            seed_log.add(instance_seed)
        cert = generate_certified(
            config.tier_spec(tier), instance_seed, node_budget=config.node_budget
        )
        item = RegisteredInstance(
            instance=cert.instance, makespan=cert.makespan, witness=cert.witness
        )
        registry.register(item)
        prompt = render_prompt(cert.instance, style)
        request = AgentRequest(
            request_id=f"rollout-{run_seed}-{iteration}-{i}",
            prompt=prompt,
            temperature=config.temperature,
            seed=mix(run_seed, NS_ROLLOUT, iteration, i),
            max_tokens=config.max_tokens,
            meta={
                "tier": tier,
                "iteration": iteration,
                "instance_id": cert.instance.instance_id,
            },
        )
        rollouts.append(
            _Rollout(index=i, tier=tier, item=item, prompt=prompt, request=request)
        )
    return rollouts


def _attempt(
    rollout: _Rollout, agent: AgentHandle, mode: CorrectnessMode
) -> tuple[str, Optional[TrainingTrace]]:
    """One rollout: complete, parse, verify. Returns (outcome kind, trace)."""
    try:
        response = agent.complete(rollout.request)
    except TransportError:
        return "transport", None
    outcome: ParseOutcome = parse_response(response.text)
    if not outcome.ok:
        return "parse", None
    assert outcome.schedule is not None
    oracle = rollout.item.makespan if mode is CorrectnessMode.OPTIMAL_REQUIRED else None
    verdict = verify(rollout.item.instance, outcome.schedule, oracle_makespan=oracle)
    correct = verdict.feasible if mode is CorrectnessMode.FEASIBLE else bool(verdict.optimal)
    if not correct:
        return "verify", None
    trace = TrainingTrace(
        instance_id=rollout.item.instance.instance_id,
        tier=rollout.tier,
        iteration_admitted=rollout.request.meta["iteration"],  # type: ignore[arg-type]
        prompt=rollout.prompt,
        completion=response.text,
        schedule=outcome.schedule,
    )
    return "ok", trace


def run_iteration(
    config: RunConfig,
    run_seed: int,
    iteration: int,
    agent: AgentHandle,
    buffer: ReplayBuffer,
    registry: InstanceRegistry,
    seed_log: Optional[set[int]] = None,
) -> IterationMetrics:
    """Execute one iteration's rollouts and admit correct traces.

    Rollouts may run on a thread pool (config.parallel > 1); results are
    always collected and admitted in rollout-index order, so the buffer is
    identical to sequential execution.
    """
    rollouts = _prepare_rollouts(config, run_seed, iteration, registry, seed_log)
    if config.parallel > 1:
        with ThreadPoolExecutor(max_workers=config.parallel) as pool:
            results = list(
                pool.map(
                    lambda r: _attempt(r, agent, config.correctness_mode), rollouts
                )
            )
    else:
        results = [_attempt(r, agent, config.correctness_mode) for r in rollouts]

    correct = 0
    errors = {"transport": 0, "parse": 0}
    for kind, trace in results:
        if kind == "ok":
            assert trace is not None
            buffer.admit(trace)
            correct += 1
        elif kind in errors:
            errors[kind] += 1
    attempted = len(rollouts)
    all_tiers = sorted({spec.tier for spec in config.tiers})
    return IterationMetrics(
        iteration=iteration,
        rollouts_attempted=attempted,
        rollouts_correct=correct,
        hit_rate=correct / attempted,
        buffer_composition=buffer.composition(all_tiers),
        errors=errors,
    )


def emit_training_batch(
    config: RunConfig, buffer: ReplayBuffer, iteration: int, path: Path
) -> Path:
    """Write the training batch for this iteration as a JSONL trace file.

    Default: the whole accumulated buffer. Under the no-buffer ablation:
    only traces admitted this iteration. Under dedup: exact
    (instance_id, completion) duplicates collapse to the earliest.
    """
    traces = buffer.traces
    if config.no_buffer:
        traces = [t for t in traces if t.iteration_admitted == iteration]
    if config.dedup:
        seen: set[tuple[str, str]] = set()
        unique = []
        for t in traces:
            key = (t.instance_id, t.completion)
            if key not in seen:
                seen.add(key)
                unique.append(t)
        traces = unique
    records = [
        TraceRecord(
            prompt=t.prompt,
            completion=t.completion,
            tier=t.tier,
            iteration=t.iteration_admitted,
            instance_id=t.instance_id,
        )
        for t in traces
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        write_trace_file(records, path)
    except OSError as exc:
        raise RuntimeError(f"failed to write training batch {path}: {exc}") from exc
    return path


def notify_trainer(agent: AgentHandle, path: Path) -> str:
    """Deliver a trace file path to the agent's trainer hook.

    Returns the acknowledgment kind; transport failures are recorded, not
    raised, because evaluation-only agents are valid.
    """
    try:
        return agent.notify_train(str(path))
    except TransportError:
        return "transport_error"


@dataclass
class SeedRunResult:
    seed: int
    metrics: list[IterationMetrics]
    buffer: ReplayBuffer
    trainer_acks: list[str]
    train_instance_seeds: set[int] = field(default_factory=set)


AgentFactory = Callable[[int, InstanceRegistry], AgentHandle]


def run_training_for_seed(
    config: RunConfig,
    run_seed: int,
    agent: AgentHandle,
    registry: InstanceRegistry,
    seed_dir: Optional[Path] = None,
) -> SeedRunResult:
    """All training iterations for one seed: rollouts, batch, notify."""
    buffer = ReplayBuffer()
    result = SeedRunResult(
        seed=run_seed, metrics=[], buffer=buffer, trainer_acks=[]
    )
    for iteration in range(1, config.iterations + 1):
        metrics = run_iteration(
            config,
            run_seed,
            iteration,
            agent,
            buffer,
            registry,
            seed_log=result.train_instance_seeds,
        )
        result.metrics.append(metrics)
        if seed_dir is not None:
            batch_path = seed_dir / "traces" / f"iter_{iteration}.jsonl"
            metrics_path = seed_dir / "metrics" / f"iter_{iteration}.json"
            metrics_path.parent.mkdir(parents=True, exist_ok=True)
            metrics_path.write_text(
                json.dumps(metrics.to_dict(), sort_keys=True, indent=2) + "\n"
            )
        else:
            import tempfile

            batch_path = Path(tempfile.mkdtemp()) / f"iter_{iteration}.jsonl"
        emit_training_batch(config, buffer, iteration, batch_path)
        result.trainer_acks.append(notify_trainer(agent, batch_path))
    return result


def run(config: RunConfig, agent_factory: AgentFactory, out_dir: Path):
    """Full pipeline per seed plus per-tier evaluation; returns a RunReport.

    Report assembly lives in the evaluation module; imported lazily to keep
    the module dependency graph acyclic.
    """
    from .evaluation import assemble_run_report

    return assemble_run_report(config, agent_factory, Path(out_dir))
