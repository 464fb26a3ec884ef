import pytest

from schedloop.agents import (
    FailingAgent,
    InstanceRegistry,
    NoisyAgent,
    OracleAgent,
    SkillSchedule,
    build_agent,
)
from schedloop.core import verify
from schedloop.loop import (
    CorrectnessMode,
    ReplayBuffer,
    RunConfig,
    TrainingTrace,
    emit_training_batch,
    notify_trainer,
    run_iteration,
    run_training_for_seed,
)
from schedloop.textio import read_trace_file


SMALL = RunConfig(
    iterations=3,
    rollouts_per_iteration=10,
    seeds=(42,),
    training_tiers=frozenset({0, 1, 3}),
    eval_problems_per_tier=2,
)


def test_config_invariants():
    with pytest.raises(ValueError):
        RunConfig(training_tiers=frozenset({0, 5}), holdout_tiers=frozenset({5}))
    with pytest.raises(ValueError):
        RunConfig(iterations=0)
    with pytest.raises(ValueError):
        RunConfig(training_tiers=frozenset({9}))


def test_config_round_trip():
    config = RunConfig(
        iterations=4, no_buffer=True,
        correctness_mode=CorrectnessMode.OPTIMAL_REQUIRED,
    )
    assert RunConfig.from_dict(config.to_dict()) == config


def test_oracle_iteration_hits_everything():
    registry = InstanceRegistry()
    buffer = ReplayBuffer()
    agent = OracleAgent(registry)
    metrics = run_iteration(SMALL, 42, 1, agent, buffer, registry)
    assert metrics.rollouts_attempted == 10
    assert metrics.rollouts_correct == 10
    assert metrics.hit_rate == 1.0
    assert len(buffer) == 10
    assert metrics.errors == {"transport": 0, "parse": 0}


def test_dead_agent_iteration():
    registry = InstanceRegistry()
    buffer = ReplayBuffer()
    metrics = run_iteration(SMALL, 42, 1, FailingAgent(), buffer, registry)
    assert metrics.hit_rate == 0.0
    assert len(buffer) == 0
    assert metrics.errors["transport"] == 10


def test_optimal_mode_admits_only_optima():
    registry = InstanceRegistry()
    buffer = ReplayBuffer()
    config_opt = RunConfig(
        iterations=1, rollouts_per_iteration=6, seeds=(42,),
        training_tiers=frozenset({0}),
        correctness_mode=CorrectnessMode.OPTIMAL_REQUIRED,
    )
    agent = OracleAgent(registry)
    metrics = run_iteration(config_opt, 42, 1, agent, buffer, registry)
    assert metrics.hit_rate == 1.0
    for trace in buffer.traces:
        item = registry.lookup(trace.instance_id)
        verdict = verify(item.instance, trace.schedule, oracle_makespan=item.makespan)
        assert verdict.optimal


def test_admission_soundness_and_monotonicity():
    registry = InstanceRegistry()
    agent = NoisyAgent(
        SkillSchedule(rates={0: ((1, 0.6),), 1: ((2, 0.5),), 3: ((1, 0.3),)}),
        registry,
    )
    buffer = ReplayBuffer()
    previous = {t: 0 for t in (0, 1, 3)}
    for iteration in (1, 2, 3):
        metrics = run_iteration(SMALL, 42, iteration, agent, buffer, registry)
        for tier, count in metrics.buffer_composition.items():
            if tier in previous:
                assert count >= previous[tier]
                previous[tier] = count
        assert metrics.rollouts_correct == sum(
            1 for t in buffer.traces if t.iteration_admitted == iteration
        )
    for trace in buffer.traces:
        item = registry.lookup(trace.instance_id)
        assert verify(item.instance, trace.schedule).feasible
    assert buffer.first_correct.get(1, None) in (2, 3)  # locked until iter 2


def test_parallel_matches_sequential():
    import dataclasses

    results = {}
    for parallel in (1, 4):
        config = dataclasses.replace(SMALL, parallel=parallel)
        registry = InstanceRegistry()
        agent = build_agent("mock:noisy", registry)
        buffer = ReplayBuffer()
        metrics = [
            run_iteration(config, 42, it, agent, buffer, registry)
            for it in (1, 2, 3)
        ]
        results[parallel] = (
            metrics,
            [(t.instance_id, t.tier, t.iteration_admitted, t.completion)
             for t in buffer.traces],
        )
    assert results[1] == results[4]


def test_emit_batch_accumulates(tmp_path):
    buffer = ReplayBuffer()
    for iteration, count in ((1, 3), (2, 2)):
        for i in range(count):
            buffer.admit(
                TrainingTrace(
                    instance_id=f"i{iteration}-{i}", tier=0,
                    iteration_admitted=iteration,
                    prompt="p", completion=f"c{iteration}-{i}",
                    schedule=None,
                )
            )
    full = RunConfig(seeds=(42,))
    path = emit_training_batch(full, buffer, 2, tmp_path / "full.jsonl")
    assert len(read_trace_file(path)) == 5

    ablated = RunConfig(seeds=(42,), no_buffer=True)
    path = emit_training_batch(ablated, buffer, 2, tmp_path / "nobuf.jsonl")
    records = read_trace_file(path)
    assert len(records) == 2
    assert all(r.iteration == 2 for r in records)


def test_emit_batch_dedup(tmp_path):
    buffer = ReplayBuffer()
    for iteration in (1, 2):
        buffer.admit(
            TrainingTrace(
                instance_id="same", tier=0, iteration_admitted=iteration,
                prompt="p", completion="same text", schedule=None,
            )
        )
    config = RunConfig(seeds=(42,), dedup=True)
    path = emit_training_batch(config, buffer, 2, tmp_path / "dedup.jsonl")
    records = read_trace_file(path)
    assert len(records) == 1
    assert records[0].iteration == 1  # earliest kept


def test_emit_batch_empty_buffer(tmp_path):
    path = emit_training_batch(
        RunConfig(seeds=(42,)), ReplayBuffer(), 1, tmp_path / "empty.jsonl"
    )
    assert path.read_text() == ""


def test_notify_trainer_acks():
    registry = InstanceRegistry()
    noisy = build_agent("mock:noisy", registry)
    assert notify_trainer(noisy, "x.jsonl") == "train_ack"
    assert noisy.trained_iterations == 1
    assert notify_trainer(build_agent("mock:oracle", registry), "x.jsonl") == "train_ack"
    assert notify_trainer(FailingAgent(), "x.jsonl") == "transport_error"


def test_training_for_seed_writes_layout(tmp_path):
    registry = InstanceRegistry()
    agent = OracleAgent(registry)
    result = run_training_for_seed(SMALL, 42, agent, registry, tmp_path)
    assert len(result.metrics) == 3
    assert result.trainer_acks == ["train_ack"] * 3
    for iteration in (1, 2, 3):
        assert (tmp_path / "traces" / f"iter_{iteration}.jsonl").exists()
        assert (tmp_path / "metrics" / f"iter_{iteration}.json").exists()
    assert len(result.buffer) == 30


def test_tier_round_robin_covers_training_tiers():
    registry = InstanceRegistry()
    buffer = ReplayBuffer()
    run_iteration(SMALL, 42, 1, OracleAgent(registry), buffer, registry)
    tiers = {t.tier for t in buffer.traces}
    assert tiers == {0, 1, 3}
