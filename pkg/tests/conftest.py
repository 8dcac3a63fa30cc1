import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from rws.corpus import ingest_corpus
from rws.fixtures import make_planted_fixture
from rws.index import build_index

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class ScoreServer:
    """Local score-protocol-v1 service. ``behavior(payload)`` returns (status, body)."""

    def __init__(self):
        self.requests = []
        self.behavior = lambda payload: (200, {"scores": [0.5] * len(payload["candidates"])})
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                server.requests.append({"payload": payload, "headers": dict(self.headers)})
                status, body = server.behavior(payload)
                data = body if isinstance(body, bytes) else json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/score"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def score_server():
    srv = ScoreServer()
    yield srv
    srv.close()


@pytest.fixture(autouse=True)
def _fast_backoff(monkeypatch):
    monkeypatch.setattr("rws.scoring.BACKOFF_SECONDS", 0.01)


@pytest.fixture(scope="session")
def planted(tmp_path_factory):
    """The 50-question, 1,000-document planted fixture, ingested and indexed."""
    root = tmp_path_factory.mktemp("planted")
    fx = make_planted_fixture(root)
    res = ingest_corpus(fx.corpus_path, root / "store")
    build_index(res.store)
    fx.store_path = root / "store"
    return fx


@pytest.fixture(scope="session")
def small_planted(tmp_path_factory):
    """A 10-question, 150-document variant for the slower pipeline tests."""
    root = tmp_path_factory.mktemp("small_planted")
    fx = make_planted_fixture(root, n_questions=10, n_docs=150, seed=5)
    res = ingest_corpus(fx.corpus_path, root / "store")
    build_index(res.store)
    fx.store_path = root / "store"
    return fx
