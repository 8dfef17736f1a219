import json
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import httpx
import pytest

from fault2flow.compiler import compile_tree
from fault2flow.errors import AuthError, NetworkError, PushError, SchemaRejected
from fault2flow.n8n_client import API_KEY_HEADER, N8nClient, push_workflow
from fault2flow.workflow import export_n8n
from transcript import Replay

ENDPOINT = "http://n8n.test:5678"


@pytest.fixture
def document(three_ratio):
    return json.loads(export_n8n(compile_tree(three_ratio)))


def test_push_and_activate(document):
    replay = Replay("push_ok")
    assert push_workflow(document, ENDPOINT, "test-key", transport=replay.transport()) == "w123"
    assert replay.done
    body = json.loads(replay.seen[0].content)
    assert body["nodes"] == document["nodes"] and body["settings"] == {"executionOrder": "v1"}


def test_wrong_key_is_auth_error(document):
    replay = Replay("auth_rejected")
    with pytest.raises(AuthError):
        push_workflow(document, ENDPOINT, "wrong-key", transport=replay.transport())
    assert replay.done


def test_schema_rejection_keeps_body_verbatim(document):
    replay = Replay("schema_rejected")
    with pytest.raises(SchemaRejected) as info:
        push_workflow(document, ENDPOINT, "test-key", transport=replay.transport())
    assert info.value.status == 400
    assert info.value.body == replay.body_text(0)
    assert info.value.exit_code == 4


def test_activation_server_error(document):
    replay = Replay("activation_failed")
    with pytest.raises(PushError, match="HTTP 500"):
        push_workflow(document, ENDPOINT, "test-key", transport=replay.transport())
    assert replay.done


def test_network_error_from_transport(document):
    def refuse(request):
        raise httpx.ConnectError("connection refused", request=request)

    with pytest.raises(NetworkError):
        push_workflow(document, ENDPOINT, "k", transport=httpx.MockTransport(refuse))


def test_reply_without_id(document):
    transport = httpx.MockTransport(lambda r: httpx.Response(200, json={"name": "x"}))
    with pytest.raises(PushError, match="no id"):
        push_workflow(document, ENDPOINT, "k", transport=transport)


def test_non_json_reply(document):
    transport = httpx.MockTransport(lambda r: httpx.Response(200, text="<html>"))
    with pytest.raises(PushError, match="not JSON"):
        push_workflow(document, ENDPOINT, "k", transport=transport)


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_unreachable_endpoint_fails_fast(document):
    started = time.perf_counter()
    with pytest.raises(NetworkError):
        push_workflow(document, f"http://127.0.0.1:{free_port()}", "k", timeout=2)
    assert time.perf_counter() - started < 2.5


class _StubHost(BaseHTTPRequestHandler):
    calls = []

    def do_POST(self):
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length)
        type(self).calls.append((self.path, self.headers.get(API_KEY_HEADER), body))
        if self.headers.get(API_KEY_HEADER) != "stub-key":
            self.send_response(403)
            payload = b'{"message":"forbidden"}'
        else:
            self.send_response(200)
            payload = b'{"id":"w123"}'
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_host():
    _StubHost.calls = []
    server = HTTPServer(("127.0.0.1", 0), _StubHost)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}", _StubHost.calls
    server.shutdown()
    server.server_close()


def test_real_socket_round_trip(document, stub_host):
    url, calls = stub_host
    assert push_workflow(document, url, "stub-key") == "w123"
    assert [c[0] for c in calls] == ["/api/v1/workflows", "/api/v1/workflows/w123/activate"]
    assert json.loads(calls[0][2])["name"] == "three_ratio"
    with pytest.raises(AuthError):
        push_workflow(document, url, "bad")


def test_client_strips_trailing_slash():
    with N8nClient(ENDPOINT + "/", "k", transport=httpx.MockTransport(lambda r: httpx.Response(200))) as c:
        assert c.endpoint == ENDPOINT
