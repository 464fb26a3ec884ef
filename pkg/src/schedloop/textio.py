"""Natural-language prompt rendering, response parsing, canonical files.

Prompts describe one instance in plain English and instruct the agent to
emit a final fenced answer block of `JOB: START` lines. Parsing is total:
any input text yields either a schedule or a typed parse error, never an
exception. Instances serialize to canonical JSON (sorted keys, two-space
indent, trailing newline) which is the determinism surface for golden
tests; training traces serialize as JSON lines with prompt and completion
kept in separate fields so an external trainer can mask prompt tokens.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .core import (
    CapacityViolation,
    DeadlineViolation,
    HorizonExceeded,
    Job,
    MissingJob,
    NegativeStart,
    PrecedenceViolation,
    ProblemInstance,
    Schedule,
    UnknownJob,
    Verdict,
)

MAX_SHOTS = 8

COT_INSTRUCTION = (
    "Think through the constraints step by step before committing to an "
    "answer. Work out the ordering implied by the dependencies, then check "
    "resource usage and the deadline."
)

ANSWER_INSTRUCTION = (
    "Give your final answer as a fenced code block (```) containing exactly "
    "one line per job in the form `JOB: START`, where START is a "
    "non-negative integer start time."
)


@dataclass(frozen=True)
class PromptStyle:
    chain_of_thought: bool = False
    shots: int = 0
    feedback: Optional[str] = None

    def __post_init__(self) -> None:
        if not 0 <= self.shots <= MAX_SHOTS:
            raise ValueError(f"shots must be in 0..{MAX_SHOTS}")


# Parse errors

@dataclass(frozen=True)
class NoAnswerBlock:
    pass


@dataclass(frozen=True)
class MalformedBlock:
    detail: str


@dataclass(frozen=True)
class NonIntegerStart:
    job: str


ParseError = Union[NoAnswerBlock, MalformedBlock, NonIntegerStart]


@dataclass(frozen=True)
class ParseOutcome:
    schedule: Optional[Schedule] = None
    error: Optional[ParseError] = None

    def __post_init__(self) -> None:
        if (self.schedule is None) == (self.error is None):
            raise ValueError("exactly one of schedule/error must be set")

    @property
    def ok(self) -> bool:
        return self.schedule is not None


def render_instance_text(instance: ProblemInstance) -> str:
    """The problem statement paragraph used in prompts."""
    lines = [
        f"You are scheduling a project with {len(instance.jobs)} jobs. "
        f"All times are integers; the schedule must finish within "
        f"{instance.horizon} time units."
    ]
    lines.append("Jobs:")
    for job in instance.jobs:
        entry = f"- {job.id}: takes {job.duration} time unit" + (
            "s" if job.duration != 1 else ""
        )
        if instance.capacities:
            usage = ", ".join(
                f"{d} unit(s) of resource {r}" for r, d in enumerate(job.demand)
            )
            entry += f", uses {usage} while running"
        lines.append(entry + ".")
    if instance.precedence:
        lines.append("Dependencies:")
        for pred, succ in instance.precedence:
            lines.append(f"- {pred} must finish before {succ} starts.")
    else:
        lines.append("There are no dependencies between jobs.")
    if instance.capacities:
        lines.append("Resource limits:")
        for r, cap in enumerate(instance.capacities):
            lines.append(
                f"- Resource {r} has capacity {cap}; the total demand of jobs "
                f"running at the same time must never exceed it."
            )
    if instance.deadline is not None:
        lines.append(
            f"Deadline: every job must be finished by time {instance.deadline}."
        )
    return "\n".join(lines)


def render_answer_block(schedule: Schedule) -> str:
    body = "\n".join(f"{j}: {schedule.starts[j]}" for j in sorted(schedule.starts))
    return f"```\n{body}\n```"


def render_prompt(
    instance: ProblemInstance,
    style: PromptStyle = PromptStyle(),
    shot_bank: Sequence[tuple[ProblemInstance, Schedule]] = (),
) -> str:
    """Deterministic prompt text for one instance under a style."""
    if style.shots > len(shot_bank):
        raise ValueError("shot bank smaller than requested shot count")
    parts: list[str] = []
    if style.chain_of_thought:
        parts.append(COT_INSTRUCTION)
    for shot_instance, shot_witness in shot_bank[: style.shots]:
        parts.append("Example problem:")
        parts.append(render_instance_text(shot_instance))
        parts.append("Example answer:")
        parts.append(render_answer_block(shot_witness))
    parts.append("Problem:")
    parts.append(render_instance_text(instance))
    parts.append(ANSWER_INSTRUCTION)
    if style.feedback is not None:
        parts.append("Your previous schedule was rejected:")
        parts.append(style.feedback)
        parts.append("Produce a corrected schedule.")
    return "\n\n".join(parts)


_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_LINE_RE = re.compile(r"^\s*`?([A-Za-z_][\w-]*)`?\s*:\s*(.+?)\s*$")


def _parse_lines(lines: Iterable[str]) -> ParseOutcome:
    starts: dict[str, int] = {}
    for line in lines:
        if not line.strip():
            continue
        match = _LINE_RE.match(line)
        if match is None:
            return ParseOutcome(error=MalformedBlock(detail=line.strip()))
        job_id, value = match.groups()
        try:
            starts[job_id] = int(value)
        except ValueError:
            return ParseOutcome(error=NonIntegerStart(job=job_id))
    if not starts:
        return ParseOutcome(error=NoAnswerBlock())
    return ParseOutcome(schedule=Schedule(starts=starts))


def parse_response(text: str) -> ParseOutcome:
    """Extract a schedule from arbitrary agent text. Total: never raises.

    The last fenced block wins (drafts earlier in chain-of-thought text are
    ignored); without any fence, a contiguous run of `JOB: START` lines at
    the end of the text is accepted.
    """
    blocks = _FENCE_RE.findall(text)
    if blocks:
        return _parse_lines(blocks[-1].splitlines())
    tail: list[str] = []
    for line in reversed(text.splitlines()):
        if not line.strip():
            if tail:
                break
            continue
        match = _LINE_RE.match(line)
        if match is None:
            break
        tail.append(line)
    if tail:
        return _parse_lines(reversed(tail))
    return ParseOutcome(error=NoAnswerBlock())


def render_feedback(verdict: Verdict) -> str:
    """One sentence per violation, in the verdict's deterministic order."""
    if verdict.feasible:
        raise ValueError("feedback is only rendered for infeasible verdicts")
    sentences = []
    for v in verdict.violations:
        if isinstance(v, MissingJob):
            sentences.append(f"Job {v.job} is missing from the schedule.")
        elif isinstance(v, UnknownJob):
            sentences.append(f"Job {v.job} does not exist in this problem.")
        elif isinstance(v, NegativeStart):
            sentences.append(f"Job {v.job} has a negative start time.")
        elif isinstance(v, HorizonExceeded):
            sentences.append(
                f"Job {v.job} finishes after the scheduling horizon."
            )
        elif isinstance(v, PrecedenceViolation):
            sentences.append(
                f"Job {v.succ} starts before its prerequisite {v.pred} finishes."
            )
        elif isinstance(v, CapacityViolation):
            sentences.append(
                f"Resource {v.resource} is over capacity at time {v.time}: "
                f"usage {v.usage} exceeds capacity {v.capacity}."
            )
        elif isinstance(v, DeadlineViolation):
            sentences.append(
                f"The schedule finishes at time {v.completion}, after the "
                f"deadline of {v.deadline}."
            )
        else:  # pragma: no cover - exhaustive over Violation kinds
            raise TypeError(f"unknown violation {v!r}")
    return "\n".join(sentences)


# Canonical instance files

def instance_to_dict(instance: ProblemInstance) -> dict:
    doc: dict = {
        "instance_id": instance.instance_id,
        "tier": instance.tier,
        "seed": instance.seed,
        "jobs": [
            {"id": j.id, "duration": j.duration, "demand": list(j.demand)}
            for j in instance.jobs
        ],
        "precedence": [[p, s] for p, s in instance.precedence],
        "capacities": list(instance.capacities),
        "horizon": instance.horizon,
    }
    if instance.deadline is not None:
        doc["deadline"] = instance.deadline
    return doc


def instance_from_dict(doc: dict) -> ProblemInstance:
    return ProblemInstance(
        instance_id=doc["instance_id"],
        tier=doc["tier"],
        jobs=tuple(
            Job(id=j["id"], duration=j["duration"], demand=tuple(j["demand"]))
            for j in doc["jobs"]
        ),
        precedence=tuple((p, s) for p, s in doc["precedence"]),
        capacities=tuple(doc["capacities"]),
        deadline=doc.get("deadline"),
        horizon=doc["horizon"],
        seed=doc["seed"],
    )


def canonical_json(doc: object) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def instance_to_text(instance: ProblemInstance) -> str:
    return canonical_json(instance_to_dict(instance))


def instance_from_text(text: str) -> ProblemInstance:
    return instance_from_dict(json.loads(text))


def write_instance(instance: ProblemInstance, path: Path) -> None:
    path.write_text(instance_to_text(instance))


def read_instance(path: Path) -> ProblemInstance:
    return instance_from_text(Path(path).read_text())


def schedule_to_text(schedule: Schedule) -> str:
    return "\n".join(f"{j}: {schedule.starts[j]}" for j in sorted(schedule.starts)) + "\n"


def read_schedule(path: Path) -> Schedule:
    outcome = parse_response(Path(path).read_text())
    if not outcome.ok:
        raise ValueError(f"unparseable schedule file {path}: {outcome.error}")
    assert outcome.schedule is not None
    return outcome.schedule


# Training trace files (JSON lines)

@dataclass(frozen=True)
class TraceRecord:
    prompt: str
    completion: str
    tier: int
    iteration: int
    instance_id: str


def write_trace_file(records: Sequence[TraceRecord], path: Path) -> None:
    lines = [
        json.dumps(
            {
                "prompt": r.prompt,
                "completion": r.completion,
                "tier": r.tier,
                "iteration": r.iteration,
                "instance_id": r.instance_id,
            },
            sort_keys=True,
        )
        for r in records
    ]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_trace_file(path: Path) -> list[TraceRecord]:
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        records.append(
            TraceRecord(
                prompt=doc["prompt"],
                completion=doc["completion"],
                tier=doc["tier"],
                iteration=doc["iteration"],
                instance_id=doc["instance_id"],
            )
        )
    return records
