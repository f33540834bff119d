from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from importlib import resources

import pytest

from lexeval.lexicon import parse_lexicon_lines, sample_lexicon
from lexeval.textproc import parse_gold


def data_path(name: str) -> str:
    return str(resources.files("lexeval").joinpath("data", name))


@pytest.fixture(scope="session")
def lexicon():
    return sample_lexicon()


@pytest.fixture(scope="session")
def gold_path():
    return data_path("mini_gold.tsv")


@pytest.fixture(scope="session")
def gold_docs(gold_path):
    with open(gold_path, encoding="utf-8") as fh:
        return parse_gold(fh, gold_path)


def synthetic_lexicon(n_words: int, k: int = 3):
    """``n_words`` made-up words with ``k`` senses each; every sense has an
    example sentence containing the word."""
    lines = []
    levels = ["A1", "A2", "B1", "B2", "C1", "C2"]
    for w in range(n_words):
        head = "zorb" + "".join(chr(ord("a") + int(d)) for d in str(w))
        for j in range(k):
            lines.append(json.dumps({
                "id": f"{head}-{j}",
                "head": head,
                "pos": "noun",
                "guideword": f"SENSE {j}",
                "level": levels[j % 6],
                "definition": f"meaning number {j} of {head}",
                "learner_example": f"The {head} was there in case {j}.",
            }))
    return parse_lexicon_lines(lines, "<synthetic>")


class StubHandler(BaseHTTPRequestHandler):
    """Chat-completions stub: replies with the server's canned top-k list."""

    def do_POST(self):  # noqa: N802 - http.server naming
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length))
        server = self.server
        server.requests.append({"body": body, "headers": dict(self.headers)})
        if server.failures:
            status = server.failures.pop(0)
            self.send_response(status)
            self.end_headers()
            self.wfile.write(b"busy")
            return
        top = [{"token": t, "logprob": lp} for t, lp in server.top]
        payload = {
            "choices": [{
                "message": {"role": "assistant", "content": server.top[0][0]},
                "logprobs": {"content": [{"token": server.top[0][0], "logprob": server.top[0][1], "top_logprobs": top}]},
            }]
        }
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    server.requests = []
    server.failures = []
    server.top = [("1", -0.1), ("2", -2.5), ("3", -4.0)]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


@pytest.fixture
def stub_url(stub_server):
    host, port = stub_server.server_address
    return f"http://{host}:{port}/v1"


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
