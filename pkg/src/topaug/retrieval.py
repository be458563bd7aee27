"""TF-IDF exemplar retrieval and prompt construction.

An index is built over training utterances only (similarity is judged on
inputs, not parses). Weights are raw term count times a smoothed idf,
ln((1 + n_docs) / (1 + df)) + 1, L2-normalized, so cosine similarity is a
plain dot product of unit vectors. At train time exemplars are drawn from
the ranked hits with geometric rank weights p*(1-p)^(r-1) renormalized over
the remaining pool; at eval time the deterministic top k are used. The
exemplars are concatenated onto the base utterance as
``x ; x1 ; y1 ; ... ; xk ; yk``.
"""

from __future__ import annotations

import json
import math
import os
import random
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .dataset import Manifest, Sample, write_text_atomic
from .errors import EmptyManifest, MalformedRecord
from .top import ParseTree, serialize

INDEX_FORMAT_VERSION = 1
IDF_FORMULA = "ln((1+n_docs)/(1+df))+1"

DEFAULT_K = 4
DEFAULT_GEOMETRIC_P = 0.1
DEFAULT_POOL_SIZE = 100
DEFAULT_SEPARATOR = " ; "


@dataclass(frozen=True)
class RetrievalHit:
    sample_id: str
    rank: int  # 1-based
    score: float


@dataclass(frozen=True)
class ExemplarPrompt:
    base: tuple[str, ...]
    exemplars: tuple[tuple[tuple[str, ...], ParseTree, RetrievalHit], ...]
    rendered: str


class TfidfIndex:
    """Inverted index plus unit-norm document vectors over utterances."""

    def __init__(
        self,
        vocabulary: dict[str, int],
        idf: list[float],
        doc_ids: list[str],
        doc_vectors: list[dict[int, float]],
    ):
        self.vocabulary = vocabulary
        self.idf = idf
        self.doc_ids = doc_ids
        self.doc_vectors = doc_vectors
        self.postings: dict[int, list[tuple[int, float]]] = defaultdict(list)
        for doc, vector in enumerate(doc_vectors):
            for term_id, weight in vector.items():
                self.postings[term_id].append((doc, weight))
        # Documents ordered by sample id: zero-score padding and tie-breaking.
        self.docs_by_id = sorted(range(len(doc_ids)), key=lambda d: doc_ids[d])
        self.empty_docs = {d for d, v in enumerate(doc_vectors) if not v}

    def __len__(self) -> int:
        return len(self.doc_ids)

    def vectorize(self, tokens: Sequence[str]) -> dict[int, float]:
        """Unit-norm tf-idf vector of a query (index idf; OOV terms dropped)."""
        counts = Counter(tokens)
        vector = {
            self.vocabulary[t]: c * self.idf[self.vocabulary[t]]
            for t, c in counts.items()
            if t in self.vocabulary
        }
        norm = math.sqrt(sum(w * w for w in vector.values()))
        if norm == 0.0:
            return {}
        return {t: w / norm for t, w in vector.items()}


def build_index(manifest: Manifest) -> TfidfIndex:
    if len(manifest) == 0:
        raise EmptyManifest("cannot index an empty manifest")
    documents = [s.utterance for s in manifest]
    vocabulary = {term: i for i, term in enumerate(sorted({t for doc in documents for t in doc}))}
    n_docs = len(documents)
    df = [0] * len(vocabulary)
    for doc in documents:
        for term in set(doc):
            df[vocabulary[term]] += 1
    idf = [math.log((1 + n_docs) / (1 + d)) + 1 for d in df]
    doc_vectors: list[dict[int, float]] = []
    for doc in documents:
        counts = Counter(doc)
        vector = {vocabulary[t]: c * idf[vocabulary[t]] for t, c in counts.items()}
        norm = math.sqrt(sum(w * w for w in vector.values()))
        if norm > 0.0:
            vector = {t: w / norm for t, w in vector.items()}
        doc_vectors.append(vector)
    return TfidfIndex(
        vocabulary=vocabulary,
        idf=idf,
        doc_ids=[s.id for s in manifest],
        doc_vectors=doc_vectors,
    )


def query(
    index: TfidfIndex,
    tokens: Sequence[str],
    m: int,
    exclude: Iterable[str] = (),
) -> list[RetrievalHit]:
    """Top-m documents by cosine similarity, deterministically tie-broken.

    Ordering is score descending then sample id ascending; documents sharing
    no term with the query score 0.0 and fill the tail in id order, so small
    corpora still yield m hits.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    excluded = set(exclude)
    query_vector = index.vectorize(tokens)
    scores: dict[int, float] = defaultdict(float)
    for term_id, weight in query_vector.items():
        for doc, doc_weight in index.postings.get(term_id, ()):
            scores[doc] += weight * doc_weight
    matched = [
        (doc, min(score, 1.0))
        for doc, score in scores.items()
        if index.doc_ids[doc] not in excluded
    ]
    matched.sort(key=lambda item: (-item[1], index.doc_ids[item[0]]))
    chosen = matched[:m]
    if len(chosen) < m:
        with_scores = {doc for doc, _ in scores.items()}
        for doc in index.docs_by_id:
            if len(chosen) >= m:
                break
            if doc in with_scores or index.doc_ids[doc] in excluded:
                continue
            chosen.append((doc, 0.0))
    return [
        RetrievalHit(sample_id=index.doc_ids[doc], rank=r, score=score)
        for r, (doc, score) in enumerate(chosen, start=1)
    ]


def sample_exemplars(
    hits: Sequence[RetrievalHit],
    k: int,
    p_geom: float,
    seed: int,
    pool_size: int = DEFAULT_POOL_SIZE,
) -> list[RetrievalHit]:
    """Draw k distinct hits with geometric rank weights, for training.

    Each draw selects rank r with probability proportional to
    p_geom * (1 - p_geom)^(r-1), renormalized over the candidates still in
    the pool (which is truncated to the top `pool_size`). The selection is
    returned in score order and is a pure function of the seed.
    """
    if not 0.0 < p_geom < 1.0:
        raise ValueError(f"p_geom must be in (0, 1), got {p_geom}")
    if len(hits) <= k:
        return list(hits)
    pool = list(hits[: min(pool_size, len(hits))])
    if len(pool) <= k:
        return pool
    rng = random.Random(seed)
    weights = [p_geom * (1.0 - p_geom) ** (hit.rank - 1) for hit in pool]
    selected: list[RetrievalHit] = []
    for _ in range(k):
        total = sum(weights)
        target = rng.random() * total
        cumulative = 0.0
        pick = len(pool) - 1
        for i, w in enumerate(weights):
            cumulative += w
            if target < cumulative:
                pick = i
                break
        selected.append(pool.pop(pick))
        weights.pop(pick)
    selected.sort(key=lambda hit: hit.rank)
    return selected


def top_k_exemplars(hits: Sequence[RetrievalHit], k: int) -> list[RetrievalHit]:
    """Deterministic counterpart used at evaluation time."""
    return list(hits[:k])


def render_prompt(
    utterance: Sequence[str],
    exemplars: Sequence[tuple[Sequence[str], ParseTree, RetrievalHit]],
    separator: str = DEFAULT_SEPARATOR,
) -> ExemplarPrompt:
    """Concatenate the utterance with exemplar input-output pairs.

    Splitting the rendered string on the separator gives 1 + 2*len(exemplars)
    segments; that only inverts cleanly while no utterance token equals the
    separator token (";" by default).
    """
    segments = [" ".join(utterance)]
    for ex_utterance, ex_parse, _ in exemplars:
        segments.append(" ".join(ex_utterance))
        segments.append(serialize(ex_parse))
    return ExemplarPrompt(
        base=tuple(utterance),
        exemplars=tuple(
            (tuple(u), p, h) for u, p, h in exemplars
        ),
        rendered=separator.join(segments),
    )


def exemplars_for(
    index: TfidfIndex,
    corpus: dict[str, Sample],
    sample: Sample,
    mode: str,
    k: int = DEFAULT_K,
    p_geom: float = DEFAULT_GEOMETRIC_P,
    seed: int = 0,
    pool_size: int = DEFAULT_POOL_SIZE,
    separator: str = DEFAULT_SEPARATOR,
    exclude_self: bool | None = None,
) -> ExemplarPrompt:
    """Retrieve, select, and render exemplars for one sample.

    mode "sample" draws geometrically (training; the sample's own id is
    excluded from retrieval), "topk" takes the deterministic top k (eval).
    """
    if mode not in ("sample", "topk"):
        raise ValueError(f"unknown exemplar mode {mode!r}")
    if exclude_self is None:
        exclude_self = mode == "sample"
    exclude = {sample.id} if exclude_self else set()
    hits = query(index, sample.utterance, m=pool_size, exclude=exclude)
    if mode == "sample":
        chosen = sample_exemplars(hits, k, p_geom, seed, pool_size=pool_size)
    else:
        chosen = top_k_exemplars(hits, k)
    return render_prompt(
        sample.utterance,
        [(corpus[h.sample_id].utterance, corpus[h.sample_id].parse, h) for h in chosen],
        separator=separator,
    )


def save_index(index: TfidfIndex, path: str | os.PathLike) -> None:
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "idf_formula": IDF_FORMULA,
        "vocabulary": index.vocabulary,
        "idf": index.idf,
        "doc_ids": index.doc_ids,
        "doc_vectors": [
            {str(t): w for t, w in vector.items()} for vector in index.doc_vectors
        ],
    }
    write_text_atomic(path, json.dumps(payload) + "\n")


def load_index(path: str | os.PathLike) -> TfidfIndex:
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}: invalid index file: {exc}") from exc
    version = payload.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise MalformedRecord(
            f"{path}: unsupported index format version {version!r}"
        )
    return TfidfIndex(
        vocabulary={str(t): int(i) for t, i in payload["vocabulary"].items()},
        idf=[float(x) for x in payload["idf"]],
        doc_ids=[str(d) for d in payload["doc_ids"]],
        doc_vectors=[
            {int(t): float(w) for t, w in vector.items()}
            for vector in payload["doc_vectors"]
        ],
    )
