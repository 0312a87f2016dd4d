import http.server
import json
import socket
import threading
import time

import pytest

from adarec.errors import BackendError, CassetteMiss, HttpStatus, ScriptExhausted
from adarec.llm_client import (
    CompletionRequest,
    LiveBackend,
    MockBackend,
    ReplayBackend,
    canonical_hash,
    canonical_serialization,
    complete,
    serialize_body,
)

REQ = CompletionRequest(model="m", user="hello")


class TestCanonicalHash:
    def test_deterministic(self):
        a = CompletionRequest(model="m", user="u", system="s", temperature=0, max_tokens=10)
        b = CompletionRequest(model="m", user="u", system="s", temperature=0, max_tokens=10)
        assert canonical_hash(a) == canonical_hash(b)

    def test_differs_on_max_tokens(self):
        a = CompletionRequest(model="m", user="u", max_tokens=10)
        b = CompletionRequest(model="m", user="u", max_tokens=11)
        assert canonical_hash(a) != canonical_hash(b)

    def test_frozen_fixture_digest(self):
        # digest computed once with the sha256sum command-line tool over the
        # canonical serialization below and frozen here
        req = CompletionRequest(
            model="test-model", user="ping", system=None, temperature=0, max_tokens=1000
        )
        assert canonical_serialization(req) == (
            b'{"max_tokens":1000,"model":"test-model","system":null,'
            b'"temperature":0,"user":"ping"}'
        )
        assert canonical_hash(req) == (
            "a23bcc184dd3a503bf2cf7a2611baa0d330e7cdfe39c88349d292ddc84f7d098"
        )


class TestBodySerialization:
    def test_paper_defaults_in_body(self):
        body = serialize_body(CompletionRequest(model="m", user="u"))
        assert '"temperature":0' in body
        assert '"max_tokens":1000' in body

    def test_system_message_included_when_present(self):
        body = json.loads(serialize_body(CompletionRequest(model="m", user="u", system="s")))
        assert body["messages"][0] == {"role": "system", "content": "s"}
        body = json.loads(serialize_body(CompletionRequest(model="m", user="u")))
        assert [m["role"] for m in body["messages"]] == ["user"]

    def test_bad_request_fields_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(model="m", user="u", temperature=-1)
        with pytest.raises(ValueError):
            CompletionRequest(model="m", user="u", max_tokens=0)


class TestMockBackend:
    def test_scripted_hello(self):
        backend = MockBackend(script=["hello"])
        assert complete(backend, REQ).text == "hello"

    def test_fifo_order(self):
        backend = MockBackend(script=["one", "two"])
        assert backend.complete(REQ).text == "one"
        assert backend.complete(REQ).text == "two"
        with pytest.raises(ScriptExhausted):
            backend.complete(REQ)

    def test_keyed_by_hash(self):
        backend = MockBackend(by_hash={canonical_hash(REQ): "keyed answer"})
        assert backend.complete(REQ).text == "keyed answer"
        other = CompletionRequest(model="m", user="different")
        with pytest.raises(ScriptExhausted):
            backend.complete(other)

    def test_handler(self):
        backend = MockBackend(handler=lambda req: req.user.upper())
        assert backend.complete(REQ).text == "HELLO"

    def test_pure_for_same_script(self):
        first = MockBackend(script=["a", "b"])
        second = MockBackend(script=["a", "b"])
        reqs = [REQ, CompletionRequest(model="m", user="x")]
        assert [first.complete(r).text for r in reqs] == [
            second.complete(r).text for r in reqs
        ]


class TestReplayBackend:
    def test_record_then_replay(self, tmp_path):
        cassette = tmp_path / "c.jsonl"
        recorder = ReplayBackend(cassette, record=True, inner=MockBackend(script=["answer"]))
        assert recorder.complete(REQ).text == "answer"
        replay = ReplayBackend(cassette)
        assert replay.complete(REQ).text == "answer"

    def test_replay_miss(self, tmp_path):
        cassette = tmp_path / "c.jsonl"
        cassette.write_text("", encoding="utf-8")
        replay = ReplayBackend(cassette)
        with pytest.raises(CassetteMiss):
            replay.complete(REQ)

    def test_record_dedupes_repeat_requests(self, tmp_path):
        cassette = tmp_path / "c.jsonl"
        recorder = ReplayBackend(cassette, record=True, inner=MockBackend(script=["only"]))
        recorder.complete(REQ)
        recorder.complete(REQ)  # served from the cassette, script not consumed
        lines = [l for l in cassette.read_text().splitlines() if l]
        assert len(lines) == 1

    def test_replay_never_touches_sockets(self, tmp_path, monkeypatch):
        cassette = tmp_path / "c.jsonl"
        ReplayBackend(cassette, record=True, inner=MockBackend(script=["net-free"])).complete(REQ)

        def explode(*args, **kwargs):
            raise AssertionError("socket use during replay")

        monkeypatch.setattr(socket, "socket", explode)
        monkeypatch.setattr(socket, "create_connection", explode)
        assert ReplayBackend(cassette).complete(REQ).text == "net-free"


class TestConcurrencyBound:
    def test_in_flight_never_exceeds_limit(self):
        lock = threading.Lock()
        state = {"now": 0, "peak": 0}

        def handler(req):
            with lock:
                state["now"] += 1
                state["peak"] = max(state["peak"], state["now"])
            time.sleep(0.01)
            with lock:
                state["now"] -= 1
            return "ok"

        backend = MockBackend(handler=handler, max_in_flight=3)
        threads = [
            threading.Thread(target=backend.complete, args=(REQ,)) for _ in range(12)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert state["peak"] <= 3


class _Handler(http.server.BaseHTTPRequestHandler):
    fail_first = {"count": 0}

    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        if self.path == "/status500":
            self.send_response(500)
            self.end_headers()
            self.wfile.write(b"boom")
            return
        payload = {
            "model": body["model"],
            "choices": [
                {"message": {"role": "assistant", "content": f"echo:{body['messages'][-1]['content']}"}}
            ],
            "usage": {"total_tokens": 3},
        }
        data = json.dumps(payload).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture(scope="module")
def http_server():
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


class TestLiveBackend:
    def test_round_trip(self, http_server):
        backend = LiveBackend(http_server + "/chat", api_key="k", timeout_secs=5)
        resp = backend.complete(REQ)
        assert resp.text == "echo:hello"
        assert resp.usage == {"total_tokens": 3}
        assert resp.latency >= 0

    def test_http_status_error(self, http_server):
        backend = LiveBackend(http_server + "/status500", api_key="k", timeout_secs=5)
        with pytest.raises(HttpStatus) as err:
            backend.complete(REQ)
        assert err.value.code == 500

    def test_transport_error_after_retry(self):
        backend = LiveBackend(
            "http://127.0.0.1:9", api_key="k", timeout_secs=0.2, backoff_secs=0.01
        )
        started = time.monotonic()
        with pytest.raises(BackendError):
            backend.complete(REQ)
        assert time.monotonic() - started >= 0.01  # one backoff happened
