"""Stdio agent adapter: bridges the harness wire protocol to an LLM endpoint.

The harness launches this program as a child process and speaks
line-delimited JSON over stdin/stdout:

  handshake {"type": "hello", "protocol": 1}  ->  {"type": "ready"}
  request   {"type": "complete", "request_id", "prompt", "temperature",
             "seed", "max_tokens", "meta"}     ->  {"type": "completion",
             "request_id", "text"}
  training  {"type": "train", "path"}          ->  {"type": "train_ack"}
  failure                                      ->  {"type": "error",
             "request_id", "detail"}

Two endpoint modes:

  http     forwards prompt and sampling parameters to a JSON inference
           endpoint and relays the returned text verbatim.
  fixture  answers from a recorded fixture file (prompt -> text), no
           network; the playback mode used by every test.

Requests are handled serially, one in flight at a time — sufficient for
the stdio transport, and it guarantees replies never reorder relative to
their requests. The adapter never alters a request_id. Actual fine-tuning
on delivered trace files is out of scope: the train hook records the path
(optionally to a log file) and acknowledges, leaving training to an
external process that honors the prompt/completion split.
"""

from __future__ import annotations

import argparse
import json
import sys
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, TextIO

PROTOCOL_VERSION = 1


class EndpointError(RuntimeError):
    """The inference endpoint could not produce a completion."""


@dataclass(frozen=True)
class AdapterConfig:
    mode: str = "fixture"  # fixture | http
    endpoint: Optional[str] = None
    fixture: Optional[str] = None
    model: str = "fixture-playback"
    temperature: float = 0.0  # default only; the request's value wins
    max_tokens: int = 1024
    train_log: Optional[str] = None

    def __post_init__(self) -> None:
        if self.mode not in ("fixture", "http"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "http" and not self.endpoint:
            raise ValueError("http mode requires an endpoint address")
        if self.mode == "fixture" and not self.fixture:
            raise ValueError("fixture mode requires a fixture file")

    @classmethod
    def from_file(cls, path: Path) -> "AdapterConfig":
        doc = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class FixtureEndpoint:
    """Recorded prompt -> text playback; the no-network test endpoint."""

    responses: dict[str, str]
    default: Optional[str] = None

    @classmethod
    def from_file(cls, path: Path) -> "FixtureEndpoint":
        doc = json.loads(Path(path).read_text())
        return cls(
            responses=dict(doc.get("responses", {})),
            default=doc.get("default"),
        )

    def complete(self, record: dict) -> str:
        prompt = record.get("prompt", "")
        if prompt in self.responses:
            return self.responses[prompt]
        if self.default is not None:
            return self.default
        raise EndpointError("no fixture recorded for this prompt")


@dataclass
class HttpEndpoint:
    """Minimal JSON inference client: POST sampling params, read text."""

    url: str
    model: str
    timeout: float = 120.0

    def complete(self, record: dict) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "prompt": record.get("prompt", ""),
                "temperature": record.get("temperature", 0.0),
                "seed": record.get("seed"),
                "max_tokens": record.get("max_tokens"),
            }
        ).encode()
        request = urllib.request.Request(
            self.url, data=payload,
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as reply:
                doc = json.loads(reply.read().decode())
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise EndpointError(str(exc)) from exc
        if "text" not in doc:
            raise EndpointError("endpoint reply carries no text field")
        return doc["text"]


def build_endpoint(config: AdapterConfig):
    if config.mode == "fixture":
        return FixtureEndpoint.from_file(Path(config.fixture))
    return HttpEndpoint(url=config.endpoint, model=config.model)


@dataclass
class _TrainLogger:
    path: Optional[Path]
    received: list[str] = field(default_factory=list)

    def record(self, trace_path: str) -> None:
        self.received.append(trace_path)
        if self.path is not None:
            with open(self.path, "a") as handle:
                handle.write(trace_path + "\n")


def _emit(out: TextIO, record: dict) -> None:
    out.write(json.dumps(record, sort_keys=True) + "\n")
    out.flush()


def handle_record(record: dict, endpoint, trainer: _TrainLogger) -> dict:
    """Map one inbound wire record to its reply record."""
    kind = record.get("type")
    if kind == "hello":
        return {"type": "ready"}
    if kind == "complete":
        request_id = record.get("request_id")
        # Defaults fill gaps; a temperature in the request always wins.
        try:
            text = endpoint.complete(record)
        except EndpointError as exc:
            return {"type": "error", "request_id": request_id, "detail": str(exc)}
        return {"type": "completion", "request_id": request_id, "text": text}
    if kind == "train":
        trainer.record(record.get("path", ""))
        return {"type": "train_ack"}
    return {
        "type": "error",
        "request_id": record.get("request_id"),
        "detail": f"unknown record type {kind!r}",
    }


def serve_stdio(
    config: AdapterConfig,
    stdin: Optional[TextIO] = None,
    stdout: Optional[TextIO] = None,
) -> None:
    """Serve the wire protocol until the input stream closes."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    endpoint = build_endpoint(config)
    trainer = _TrainLogger(Path(config.train_log) if config.train_log else None)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            _emit(stdout, {"type": "error", "request_id": None,
                           "detail": f"bad JSON: {exc}"})
            continue
        _emit(stdout, handle_record(record, endpoint, trainer))


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="llm-agent-adapter", description=__doc__
    )
    parser.add_argument("config", type=Path, help="adapter config JSON file")
    args = parser.parse_args(argv)
    try:
        config = AdapterConfig.from_file(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    serve_stdio(config)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
