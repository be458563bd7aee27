"""Inference interfaces needed by the augmentation pipeline.

Two abstractions: a TokenProposer fills masked positions with replacement
tokens, and a ParserOracle maps an utterance to its exact parse (or nothing).
Deterministic offline implementations live here alongside HTTP clients for a
model-serving bridge that speaks the same JSON protocol:

    POST /v1/fill_mask {"tokens": [...], "mask_positions": [...], "top_k": 1}
        -> {"proposals": [{"position": 6, "token": "london", "score": 0.83}]}
    POST /v1/parse     {"utterance": "..."} -> {"parse": "..."} | {"parse": null}
    GET  /v1/health    -> {"status": "ok", "proposer": "...", "parser": "..."}
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import requests

from .dataset import Manifest
from .errors import NoProposal, OracleUnavailable, ProposerUnavailable
from .top import canonicalize, serialize

MASK = "[MASK]"


@dataclass(frozen=True)
class MaskQuery:
    tokens: tuple[str, ...]
    mask_positions: tuple[int, ...]

    def __post_init__(self) -> None:
        last = -1
        for pos in self.mask_positions:
            if pos <= last:
                raise ValueError("mask positions must be strictly increasing")
            if not 0 <= pos < len(self.tokens):
                raise ValueError(f"mask position {pos} out of range")
            if self.tokens[pos] != MASK:
                raise ValueError(f"token at masked position {pos} is not {MASK}")
            last = pos


@dataclass(frozen=True)
class Proposal:
    position: int
    token: str
    score: float

    def __post_init__(self) -> None:
        if (
            not self.token
            or any(ch.isspace() for ch in self.token)
            or self.token != self.token.lower()
        ):
            raise ValueError(f"bad proposal token {self.token!r}")


class TokenProposer(ABC):
    @abstractmethod
    def fill(self, query: MaskQuery) -> list[Proposal]:
        """Return exactly one proposal per masked position."""


class ParserOracle(ABC):
    @abstractmethod
    def parse(self, utterance: str) -> str | None:
        """Best canonical parse for the utterance, or None."""


class LexiconProposer(TokenProposer):
    """Offline proposer driven by a substitution table keyed on context.

    The key for a masked position is the nearest unmasked token to its left
    ("^" when there is none); "*" is the fallback entry. Each table value is
    a replacement list ordered by priority; the head is always picked, so
    proposals are a pure function of the query.
    """

    def __init__(self, table: dict[str, list[str]]):
        self.table = {
            key if key in ("^", "*") else canonicalize(key): [canonicalize(t) for t in value]
            for key, value in table.items()
        }

    def _context(self, query: MaskQuery, position: int) -> str:
        for i in range(position - 1, -1, -1):
            if query.tokens[i] != MASK:
                return query.tokens[i]
        return "^"

    def fill(self, query: MaskQuery) -> list[Proposal]:
        proposals = []
        for pos in query.mask_positions:
            entry = self.table.get(self._context(query, pos)) or self.table.get("*")
            if not entry:
                raise NoProposal(f"no lexicon entry for mask at position {pos}")
            proposals.append(Proposal(position=pos, token=entry[0], score=1.0))
        return proposals


class MemorizingOracle(ParserOracle):
    """Exact-match lookup oracle over known (utterance, parse) pairs."""

    def __init__(self, pairs: dict[str, str] | None = None):
        self.table: dict[str, str] = {}
        for utterance, parse in (pairs or {}).items():
            self.add(utterance, parse)

    @classmethod
    def from_manifest(cls, manifest: Manifest) -> "MemorizingOracle":
        oracle = cls()
        for s in manifest:
            oracle.add(s.text, serialize(s.parse))
        return oracle

    def add(self, utterance: str, parse: str) -> None:
        self.table[canonicalize(utterance)] = canonicalize(parse)

    def parse(self, utterance: str) -> str | None:
        return self.table.get(canonicalize(utterance))


def _post_json(url: str, payload: dict, timeout: float, retries: int) -> dict:
    last_exc: Exception | None = None
    for _ in range(retries + 1):
        try:
            resp = requests.post(url, json=payload, timeout=timeout)
        except requests.RequestException as exc:
            last_exc = exc
            continue
        if resp.status_code != 200:
            raise _remote_error(url, f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
        except ValueError as exc:
            raise _remote_error(url, f"non-JSON response: {exc}")
        if not isinstance(body, dict):
            raise _remote_error(url, "response is not a JSON object")
        return body
    raise _remote_error(url, f"request failed: {last_exc}")


def _remote_error(url: str, message: str) -> Exception:
    cls = ProposerUnavailable if "fill_mask" in url else OracleUnavailable
    return cls(f"{url}: {message}")


class RemoteProposer(TokenProposer):
    """Client for the bridge /v1/fill_mask endpoint."""

    def __init__(
        self,
        base_url: str,
        proposals_per_mask: int = 1,
        timeout: float = 30.0,
        retries: int = 2,
    ):
        self.base_url = base_url.rstrip("/")
        self.proposals_per_mask = proposals_per_mask
        self.timeout = timeout
        self.retries = retries

    def fill(self, query: MaskQuery) -> list[Proposal]:
        body = _post_json(
            f"{self.base_url}/v1/fill_mask",
            {
                "tokens": list(query.tokens),
                "mask_positions": list(query.mask_positions),
                "top_k": self.proposals_per_mask,
            },
            self.timeout,
            self.retries,
        )
        raw = body.get("proposals")
        if not isinstance(raw, list):
            raise ProposerUnavailable(f"{self.base_url}: malformed proposals")
        best: dict[int, Proposal] = {}
        for item in raw:
            try:
                position = int(item["position"])
                token = item["token"]
                score = float(item.get("score", 0.0))
            except (TypeError, KeyError, ValueError) as exc:
                raise ProposerUnavailable(
                    f"{self.base_url}: malformed proposal entry: {exc}"
                ) from exc
            if token is None:
                continue  # server signalled no usable proposal at this slot
            try:
                proposal = Proposal(position=position, token=str(token), score=score)
            except ValueError as exc:
                raise ProposerUnavailable(f"{self.base_url}: {exc}") from exc
            kept = best.get(position)
            if kept is None or proposal.score > kept.score:
                best[position] = proposal
        missing = [p for p in query.mask_positions if p not in best]
        if missing:
            raise NoProposal(f"no proposal for mask position(s) {missing}")
        return [best[p] for p in query.mask_positions]


class RemoteOracle(ParserOracle):
    """Client for the bridge /v1/parse endpoint."""

    def __init__(self, base_url: str, timeout: float = 30.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries

    def parse(self, utterance: str) -> str | None:
        body = _post_json(
            f"{self.base_url}/v1/parse",
            {"utterance": utterance},
            self.timeout,
            self.retries,
        )
        if "parse" not in body:
            raise OracleUnavailable(f"{self.base_url}: response missing 'parse'")
        answer = body["parse"]
        if answer is None:
            return None
        # Pass the service answer through verbatim modulo canonicalization.
        return canonicalize(str(answer))


def remote_health(base_url: str, timeout: float = 5.0) -> dict:
    url = f"{base_url.rstrip('/')}/v1/health"
    try:
        resp = requests.get(url, timeout=timeout)
    except requests.RequestException as exc:
        raise OracleUnavailable(f"{url}: {exc}") from exc
    if resp.status_code != 200:
        raise OracleUnavailable(f"{url}: HTTP {resp.status_code}")
    return resp.json()
