"""The pluggable agent boundary: mocks and wire transports.

An agent is anything with a `complete(request) -> response` method. Mock
agents (oracle, noisy, scripted, failing) are deterministic per request
seed and make every training/eval dynamics test runnable offline. Two
transports reach external agents: a child process speaking JSON lines over
stdio, and an HTTP endpoint receiving the same records via POST.

Wire schema (one JSON object per line on the stdio transport):
  request   {"type": "complete", "request_id", "prompt", "temperature",
             "seed", "max_tokens", "meta": {"tier", "iteration", "instance_id"}}
  response  {"type": "completion", "request_id", "text", "meta"?}
  handshake {"type": "hello", "protocol": 1}  ->  {"type": "ready"}
  training  {"type": "train", "path"}  ->  {"type": "train_ack"} or
             {"type": "train_unsupported"}
  failure   {"type": "error", "request_id", "detail"}
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from random import Random
from typing import Mapping, Protocol, Sequence

from .core import ProblemInstance, Schedule
from .textio import render_answer_block

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 120.0


class TransportError(RuntimeError):
    """The agent process or connection failed."""


class AgentTimeoutError(TransportError):
    """No reply within the per-request deadline."""


class ProtocolError(RuntimeError):
    """The agent sent a malformed or unexpected record."""


class MissingMetadata(RuntimeError):
    """A mock agent needs tier/iteration metadata the caller did not attach."""


@dataclass(frozen=True)
class AgentRequest:
    request_id: str
    prompt: str
    temperature: float = 0.8
    seed: int = 0
    max_tokens: int = 1024
    meta: Mapping[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class AgentResponse:
    request_id: str
    text: str
    meta: Mapping[str, object] = field(default_factory=dict)


class AgentHandle(Protocol):
    def complete(self, request: AgentRequest) -> AgentResponse: ...

    def notify_train(self, path: str) -> str: ...

    def close(self) -> None: ...


# In-process registry giving mock agents access to the instances (and
# oracle witnesses) behind the prompts they are asked about.

@dataclass(frozen=True)
class RegisteredInstance:
    instance: ProblemInstance
    makespan: int
    witness: Schedule


class InstanceRegistry:
    def __init__(self) -> None:
        self._items: dict[str, RegisteredInstance] = {}
        self._lock = threading.Lock()

    def register(self, item: RegisteredInstance) -> None:
        with self._lock:
            self._items[item.instance.instance_id] = item

    def lookup(self, instance_id: str) -> RegisteredInstance:
        with self._lock:
            return self._items[instance_id]

    def all_items(self) -> list[RegisteredInstance]:
        with self._lock:
            return sorted(self._items.values(), key=lambda i: i.instance.instance_id)


class Corruption:
    SHIFT_ONE_START = "shift_one_start"
    DROP_ONE_JOB = "drop_one_job"
    GARBAGE_TEXT = "garbage_text"


@dataclass(frozen=True)
class SkillSchedule:
    """Per-tier success probability as a step function of the iteration.

    `rates[tier]` is a tuple of (from_iteration, probability) steps in
    ascending iteration order; the latest step at or before the current
    iteration applies, and a tier with no applicable step has probability 0.
    """

    rates: Mapping[int, tuple[tuple[int, float], ...]]
    corruption: str = Corruption.SHIFT_ONE_START

    def __post_init__(self) -> None:
        for tier, steps in self.rates.items():
            for _, p in steps:
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"tier {tier}: probability {p} outside [0,1]")

    def probability(self, tier: int, iteration: int) -> float:
        prob = 0.0
        for start, p in self.rates.get(tier, ()):
            if iteration >= start:
                prob = p
        return prob


# The standard skill ramp mirroring a model that knows warmup and deadline
# tiers from the start, unlocks sequencing at iteration 2 and pairwise
# composition (weakly) at iteration 3, and never cracks resource tiers.
RAMP_SKILL = SkillSchedule(
    rates={
        0: ((1, 0.8),),
        1: ((2, 0.3),),
        2: (),
        3: ((1, 0.4),),
        4: ((3, 0.05),),
        5: (),
    }
)


def _require_meta(request: AgentRequest, key: str) -> int:
    value = request.meta.get(key)
    if not isinstance(value, int):
        raise MissingMetadata(f"request {request.request_id} lacks meta '{key}'")
    return value


def _witness_text(item: RegisteredInstance) -> str:
    return (
        "All constraints check out with the following assignment.\n"
        + render_answer_block(item.witness)
    )


class OracleAgent:
    """Always answers with the exact solver's witness."""

    def __init__(self, registry: InstanceRegistry) -> None:
        self._registry = registry

    def complete(self, request: AgentRequest) -> AgentResponse:
        instance_id = request.meta.get("instance_id")
        if not isinstance(instance_id, str):
            raise MissingMetadata(
                f"request {request.request_id} lacks meta 'instance_id'"
            )
        item = self._registry.lookup(instance_id)
        return AgentResponse(request_id=request.request_id, text=_witness_text(item))

    def notify_train(self, path: str) -> str:
        return "train_ack"

    def close(self) -> None:
        pass


class NoisyAgent:
    """Succeeds with the skill schedule's probability, else corrupts.

    Deterministic: the success draw and corruption choice come from a
    generator seeded by the request seed alone. Corruptions are always
    verifier-rejected (shifted starts land past the horizon).
    """

    def __init__(self, skill: SkillSchedule, registry: InstanceRegistry) -> None:
        self._skill = skill
        self._registry = registry
        self.trained_iterations = 0

    def complete(self, request: AgentRequest) -> AgentResponse:
        tier = _require_meta(request, "tier")
        iteration = _require_meta(request, "iteration")
        instance_id = request.meta.get("instance_id")
        if not isinstance(instance_id, str):
            raise MissingMetadata(
                f"request {request.request_id} lacks meta 'instance_id'"
            )
        item = self._registry.lookup(instance_id)
        rng = Random(request.seed)
        if rng.random() < self._skill.probability(tier, iteration):
            text = _witness_text(item)
        else:
            text = self._corrupt(item, rng)
        return AgentResponse(request_id=request.request_id, text=text)

    def _corrupt(self, item: RegisteredInstance, rng: Random) -> str:
        mode = self._skill.corruption
        if mode == Corruption.GARBAGE_TEXT:
            return "I could not find a consistent assignment for this one."
        starts = dict(item.witness.starts)
        victim = rng.choice(sorted(starts))
        if mode == Corruption.DROP_ONE_JOB:
            del starts[victim]
        elif mode == Corruption.SHIFT_ONE_START:
            # Past the horizon: guaranteed infeasible, differs in one start.
            starts[victim] = item.instance.horizon
        else:
            raise ValueError(f"unknown corruption mode {mode!r}")
        if not starts:
            return "I could not find a consistent assignment for this one."
        return "Here is my best attempt.\n" + render_answer_block(
            Schedule(starts=starts)
        )

    def notify_train(self, path: str) -> str:
        self.trained_iterations += 1
        return "train_ack"

    def close(self) -> None:
        pass


class ScriptedAgent:
    """Replays a fixed sequence of response texts (optionally cycling)."""

    def __init__(self, responses: Sequence[str], cycle: bool = False) -> None:
        if not responses:
            raise ValueError("scripted agent needs at least one response")
        self._responses = list(responses)
        self._cycle = cycle
        self._index = 0

    def complete(self, request: AgentRequest) -> AgentResponse:
        if self._index >= len(self._responses):
            if not self._cycle:
                raise TransportError("scripted agent exhausted its responses")
            self._index = 0
        text = self._responses[self._index]
        self._index += 1
        return AgentResponse(request_id=request.request_id, text=text)

    def notify_train(self, path: str) -> str:
        return "train_unsupported"

    def close(self) -> None:
        pass


class FailingAgent:
    """Times out on every request; stands in for a dead endpoint."""

    def complete(self, request: AgentRequest) -> AgentResponse:
        raise AgentTimeoutError(f"request {request.request_id} timed out")

    def notify_train(self, path: str) -> str:
        raise TransportError("agent unreachable")

    def close(self) -> None:
        pass


def _request_record(request: AgentRequest) -> dict:
    return {
        "type": "complete",
        "request_id": request.request_id,
        "prompt": request.prompt,
        "temperature": request.temperature,
        "seed": request.seed,
        "max_tokens": request.max_tokens,
        "meta": dict(request.meta),
    }


def _response_from_record(record: dict, request_id: str) -> AgentResponse:
    if record.get("type") == "error":
        raise TransportError(f"agent error: {record.get('detail')}")
    if record.get("type") != "completion":
        raise ProtocolError(f"unexpected record type {record.get('type')!r}")
    if record.get("request_id") != request_id:
        raise ProtocolError(
            f"response for {record.get('request_id')!r}, expected {request_id!r}"
        )
    if not isinstance(record.get("text"), str):
        raise ProtocolError("completion record lacks text")
    return AgentResponse(
        request_id=request_id, text=record["text"], meta=record.get("meta") or {}
    )


class StdioAgent:
    """Child process speaking one JSON record per line over stdin/stdout.

    Writes are serialized; responses may arrive out of order and are
    matched back to callers by request_id.
    """

    def __init__(self, command: Sequence[str], timeout: float = DEFAULT_TIMEOUT):
        self.timeout = timeout
        try:
            self._proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise TransportError(f"cannot launch agent: {exc}") from exc
        self._write_lock = threading.Lock()
        self._pending_lock = threading.Lock()
        self._pending: dict[str, queue.Queue] = {}
        self._control: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._handshake()

    def _read_loop(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                record = {"type": "protocol_garbage", "raw": line}
            request_id = record.get("request_id") if isinstance(record, dict) else None
            with self._pending_lock:
                target = self._pending.get(request_id)
            if target is not None:
                target.put(record)
            else:
                self._control.put(record)
        self._control.put(None)  # EOF sentinel

    def _send(self, record: dict) -> None:
        assert self._proc.stdin is not None
        payload = json.dumps(record)
        with self._write_lock:
            try:
                self._proc.stdin.write(payload + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"agent process gone: {exc}") from exc

    def _await_control(self) -> dict:
        try:
            record = self._control.get(timeout=self.timeout)
        except queue.Empty:
            raise AgentTimeoutError("no reply from agent") from None
        if record is None:
            raise TransportError("agent closed its output stream")
        return record

    def _handshake(self) -> None:
        self._send({"type": "hello", "protocol": PROTOCOL_VERSION})
        record = self._await_control()
        if record.get("type") != "ready":
            raise ProtocolError(f"expected ready, got {record.get('type')!r}")

    def complete(self, request: AgentRequest) -> AgentResponse:
        mailbox: queue.Queue = queue.Queue()
        with self._pending_lock:
            self._pending[request.request_id] = mailbox
        try:
            self._send(_request_record(request))
            try:
                record = mailbox.get(timeout=self.timeout)
            except queue.Empty:
                raise AgentTimeoutError(
                    f"request {request.request_id} timed out"
                ) from None
        finally:
            with self._pending_lock:
                self._pending.pop(request.request_id, None)
        return _response_from_record(record, request.request_id)

    def notify_train(self, path: str) -> str:
        self._send({"type": "train", "path": path})
        record = self._await_control()
        kind = record.get("type")
        if kind not in ("train_ack", "train_unsupported"):
            raise ProtocolError(f"unexpected train reply {kind!r}")
        return kind

    def close(self) -> None:
        try:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        except Exception:
            self._proc.kill()


class HttpAgent:
    """POSTs the same records to a single endpoint, one request at a time."""

    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.url = url
        self.timeout = timeout

    def _post(self, record: dict) -> dict:
        data = json.dumps(record).encode()
        req = urllib.request.Request(
            self.url, data=data, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as reply:
                body = reply.read().decode()
        except urllib.error.HTTPError as exc:
            raise TransportError(f"HTTP {exc.code} from agent endpoint") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                raise AgentTimeoutError(str(exc)) from exc
            raise TransportError(str(exc)) from exc
        except TimeoutError as exc:
            raise AgentTimeoutError(str(exc)) from exc
        try:
            return json.loads(body)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"non-JSON reply: {body[:200]!r}") from exc

    def complete(self, request: AgentRequest) -> AgentResponse:
        record = self._post(_request_record(request))
        return _response_from_record(record, request.request_id)

    def notify_train(self, path: str) -> str:
        try:
            record = self._post({"type": "train", "path": path})
        except TransportError:
            return "train_unsupported"
        kind = record.get("type")
        if kind not in ("train_ack", "train_unsupported"):
            return "train_unsupported"
        return kind

    def close(self) -> None:
        pass


def build_agent(
    descriptor: str,
    registry: InstanceRegistry,
    timeout: float = DEFAULT_TIMEOUT,
) -> AgentHandle:
    """Resolve an `--agent` descriptor: mock:NAME, stdio:CMD, or http:URL."""
    if descriptor.startswith(("http://", "https://")):
        return HttpAgent(descriptor, timeout=timeout)
    kind, _, rest = descriptor.partition(":")
    if kind == "mock":
        if rest == "oracle":
            return OracleAgent(registry)
        if rest == "noisy":
            return NoisyAgent(RAMP_SKILL, registry)
        if rest == "fail":
            return FailingAgent()
        raise ValueError(f"unknown mock agent {rest!r}")
    if kind == "stdio":
        import shlex

        return StdioAgent(shlex.split(rest), timeout=timeout)
    if kind == "http":
        return HttpAgent(rest, timeout=timeout)
    raise ValueError(f"unknown agent descriptor {descriptor!r}")
