import io
import json
import subprocess
import sys
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from llm_agent_adapter import (
    AdapterConfig,
    EndpointError,
    FixtureEndpoint,
    HttpEndpoint,
    handle_record,
    serve_stdio,
)
from llm_agent_adapter.adapter import _TrainLogger


def test_config_validation():
    with pytest.raises(ValueError):
        AdapterConfig(mode="telepathy")
    with pytest.raises(ValueError):
        AdapterConfig(mode="http")  # endpoint missing
    with pytest.raises(ValueError):
        AdapterConfig(mode="fixture", fixture=None)
    AdapterConfig(mode="fixture", fixture="f.json")
    AdapterConfig(mode="http", endpoint="http://localhost:1/x")


def test_config_from_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"mode": "fixture", "fixture": "f.json",
                                "train_log": "log.txt"}))
    config = AdapterConfig.from_file(path)
    assert config.fixture == "f.json"
    assert config.train_log == "log.txt"

    path.write_text(json.dumps({"mode": "fixture", "fixture": "f.json",
                                "surprise": 1}))
    with pytest.raises(ValueError, match="surprise"):
        AdapterConfig.from_file(path)


def test_fixture_endpoint_lookup_default_and_miss():
    endpoint = FixtureEndpoint(responses={"p1": "r1"}, default="fallback")
    assert endpoint.complete({"prompt": "p1"}) == "r1"
    assert endpoint.complete({"prompt": "unknown"}) == "fallback"
    strict = FixtureEndpoint(responses={})
    with pytest.raises(EndpointError):
        strict.complete({"prompt": "unknown"})


def test_handle_record_dispatch(tmp_path):
    endpoint = FixtureEndpoint(responses={"p": "answer"})
    log = tmp_path / "train.log"
    trainer = _TrainLogger(log)

    assert handle_record({"type": "hello", "protocol": 1}, endpoint, trainer) == {
        "type": "ready"
    }
    reply = handle_record(
        {"type": "complete", "request_id": "r7", "prompt": "p"}, endpoint, trainer
    )
    assert reply == {"type": "completion", "request_id": "r7", "text": "answer"}

    miss = handle_record(
        {"type": "complete", "request_id": "r8", "prompt": "??"}, endpoint, trainer
    )
    assert miss["type"] == "error" and miss["request_id"] == "r8"

    assert handle_record({"type": "train", "path": "a.jsonl"}, endpoint, trainer) == {
        "type": "train_ack"
    }
    assert log.read_text() == "a.jsonl\n"

    unknown = handle_record({"type": "dance"}, endpoint, trainer)
    assert unknown["type"] == "error"


def _fixture_config(tmp_path, responses, default=None, **extra):
    fixture = tmp_path / "fixture.json"
    fixture.write_text(json.dumps({"responses": responses, "default": default}))
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps({"mode": "fixture", "fixture": str(fixture), **extra})
    )
    return config_path


def _serve(config_path, lines):
    stdin = io.StringIO("".join(json.dumps(r) + "\n" for r in lines))
    stdout = io.StringIO()
    serve_stdio(AdapterConfig.from_file(config_path), stdin, stdout)
    return stdout.getvalue()


SESSION = [
    {"type": "hello", "protocol": 1},
    {"type": "complete", "request_id": "a", "prompt": "p1", "temperature": 0.8},
    {"type": "complete", "request_id": "b", "prompt": "p2", "temperature": 0.0},
    {"type": "train", "path": "iter_1.jsonl"},
]


def test_serve_stdio_session_order_and_ids(tmp_path):
    config = _fixture_config(tmp_path, {"p1": "r1", "p2": "r2"})
    out = _serve(config, SESSION)
    replies = [json.loads(line) for line in out.splitlines()]
    assert [r["type"] for r in replies] == [
        "ready", "completion", "completion", "train_ack"
    ]
    # replies keep request order and never alter request ids
    assert [r.get("request_id") for r in replies[1:3]] == ["a", "b"]
    assert [r["text"] for r in replies[1:3]] == ["r1", "r2"]


def test_serve_stdio_bad_json_is_survivable(tmp_path):
    config = _fixture_config(tmp_path, {"p": "r"})
    stdin = io.StringIO('not json\n{"type": "hello"}\n')
    stdout = io.StringIO()
    serve_stdio(AdapterConfig.from_file(config), stdin, stdout)
    replies = [json.loads(line) for line in stdout.getvalue().splitlines()]
    assert replies[0]["type"] == "error"
    assert replies[1] == {"type": "ready"}


def test_transcript_replay_is_byte_identical(tmp_path):
    """A recorded session replayed through the adapter matches exactly."""
    config = _fixture_config(tmp_path, {"p1": "r1", "p2": "r2"})
    stdin_bytes = "".join(json.dumps(r) + "\n" for r in SESSION).encode()

    def run_once():
        return subprocess.run(
            [sys.executable, "-m", "llm_agent_adapter", str(config)],
            input=stdin_bytes, capture_output=True, check=True,
        ).stdout

    recorded = run_once()
    assert recorded == run_once()
    assert recorded.decode() == _serve(config, SESSION)


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        record = json.loads(self.rfile.read(length))
        body = json.dumps({"text": f"echo:{record['prompt']}"}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_url():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/complete"
    server.shutdown()


def test_http_endpoint_round_trip(http_url):
    endpoint = HttpEndpoint(url=http_url, model="m")
    assert endpoint.complete({"prompt": "hi", "temperature": 0.5}) == "echo:hi"


def test_http_endpoint_failure_becomes_error_record(tmp_path):
    endpoint = HttpEndpoint(url="http://127.0.0.1:1/x", model="m", timeout=1)
    trainer = _TrainLogger(None)
    reply = handle_record(
        {"type": "complete", "request_id": "r", "prompt": "p"}, endpoint, trainer
    )
    assert reply["type"] == "error" and reply["request_id"] == "r"
