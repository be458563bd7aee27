"""Shared test utilities: random data generators and independent oracles.

The oracles here are deliberately naive (dense numpy TF-IDF, quadratic
min-only edit distance, direct recursive tree printer) so they stay
independent of the library code paths they check.
"""

from __future__ import annotations

import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from topaug.top import INTENT, SLOT, Node, NodeLabel, ParseTree

LABEL_NAMES = ["get_weather", "play_music", "create_alarm", "location", "song", "date_time", "argument_0"]
TOKEN_POOL = ["sydney", "london", "tokyo", "rain", "jazz", "nine", "am", "tomorrow", "the", "a7"]


def random_tree(rng: random.Random, max_depth: int = 6, max_arity: int = 5) -> ParseTree:
    """A random valid tree: intent root, alternating nesting, lowercase tokens."""

    def has_token(child) -> bool:
        if isinstance(child, str):
            return True
        return any(has_token(c) for c in child.children)

    def build(kind: str, depth: int) -> Node:
        arity = rng.randint(0 if kind == INTENT else 1, max_arity)
        children = []
        for _ in range(arity):
            if depth < max_depth and rng.random() < 0.35:
                children.append(build(SLOT if kind == INTENT else INTENT, depth + 1))
            else:
                children.append(rng.choice(TOKEN_POOL))
        if kind == SLOT and not any(has_token(c) for c in children):
            children.append(rng.choice(TOKEN_POOL))
        return Node(NodeLabel(kind, rng.choice(LABEL_NAMES)), tuple(children))

    return ParseTree(build(INTENT, 1))


def naive_print(tree: ParseTree) -> str:
    """Independent recursive printer for the canonical serialized form."""

    def render(node: Node) -> str:
        out = "[" + node.label.kind + ":" + node.label.name
        for child in node.children:
            out += " " + (render(child) if isinstance(child, Node) else child)
        return out + " ]"

    return render(tree.root)


def edit_distance(a, b) -> int:
    """Plain quadratic Levenshtein distance (counts only)."""
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def dense_tfidf_all(docs, doc_ids, query_tokens, exclude=frozenset()):
    """Brute-force dense TF-IDF/cosine ranking of every non-excluded doc."""
    vocab = sorted({t for doc in docs for t in doc})
    col = {t: i for i, t in enumerate(vocab)}
    n = len(docs)
    tf = np.zeros((n, len(vocab)))
    for d, doc in enumerate(docs):
        for t in doc:
            tf[d, col[t]] += 1.0
    df = (tf > 0).sum(axis=0)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    weights = tf * idf
    norms = np.linalg.norm(weights, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    weights = weights / norms
    q = np.zeros(len(vocab))
    for t in query_tokens:
        if t in col:
            q[col[t]] += 1.0
    q = q * idf
    qn = np.linalg.norm(q)
    if qn > 0.0:
        q = q / qn
    scores = weights @ q
    order = sorted(
        (d for d in range(n) if doc_ids[d] not in exclude),
        key=lambda d: (-scores[d], doc_ids[d]),
    )
    return [(doc_ids[d], float(scores[d])) for d in order]


def dense_tfidf_hits(docs, doc_ids, query_tokens, m, exclude=frozenset()):
    return dense_tfidf_all(docs, doc_ids, query_tokens, exclude)[:m]


def assert_hits_match_oracle(hits, oracle_all, m, tol=1e-9):
    """Compare a top-m hit list to the full oracle ranking, tie-aware.

    Two docs whose true cosine scores are equal can come out reordered purely
    from float accumulation order (one side sees a ~1e-16 gap, the other an
    exact tie broken by id), so ordering is asserted up to score-tie classes:
    positionwise scores agree within tol, class membership is identical for
    every class fully above the cutoff, and the class straddling the cutoff
    contributes a subset.
    """
    expected_len = min(m, len(oracle_all))
    assert len(hits) == expected_len
    assert [h.rank for h in hits] == list(range(1, expected_len + 1))
    for i, hit in enumerate(hits):
        assert abs(hit.score - oracle_all[i][1]) <= tol, (i, hit, oracle_all[i])
    # oracle tie classes: consecutive positions whose scores differ <= tol
    start = 0
    while start < expected_len:
        end = start + 1
        while end < len(oracle_all) and abs(oracle_all[end][1] - oracle_all[start][1]) <= tol:
            end += 1
        class_ids = {doc_id for doc_id, _ in oracle_all[start:end]}
        got_ids = {h.sample_id for h in hits[start:min(end, expected_len)]}
        if end <= expected_len:
            assert got_ids == class_ids, (start, end, got_ids, class_ids)
        else:
            assert got_ids <= class_ids, (start, end, got_ids, class_ids)
        start = end


class MockBridgeHandler(BaseHTTPRequestHandler):
    """Minimal deterministic stand-in for the model-serving protocol."""

    fill_table: dict[int, str] = {}
    parse_table: dict[str, str | None] = {}
    fail_next: list[int] = []  # queue of status codes to emit before behaving

    def log_message(self, *args):  # keep test output quiet
        pass

    def _reply(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/v1/health":
            self._reply(200, {"status": "ok", "proposer": "mock", "parser": "mock"})
        else:
            self._reply(404, {"error": "not found"})

    def do_POST(self):
        cls = type(self)
        if cls.fail_next:
            self._reply(cls.fail_next.pop(0), {"error": "injected"})
            return
        length = int(self.headers.get("Content-Length", 0))
        request = json.loads(self.rfile.read(length))
        if self.path == "/v1/fill_mask":
            proposals = [
                {"position": p, "token": cls.fill_table.get(p), "score": 0.83}
                for p in request["mask_positions"]
            ]
            self._reply(200, {"proposals": proposals})
        elif self.path == "/v1/parse":
            self._reply(200, {"parse": cls.parse_table.get(request["utterance"])})
        else:
            self._reply(404, {"error": "not found"})


class MockBridge:
    """Context manager running the mock protocol server on a free port."""

    def __init__(self, fill_table=None, parse_table=None):
        handler = type(
            "Handler",
            (MockBridgeHandler,),
            {
                "fill_table": dict(fill_table or {}),
                "parse_table": dict(parse_table or {}),
                "fail_next": [],
            },
        )
        self.handler = handler
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)
