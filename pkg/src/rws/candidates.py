"""Candidate pooling from retrieved documents, reranking and top-K2 selection."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .corpus import DocumentStore
from .index import tokenize
from .scoring import DEFAULT_BATCH_SIZE, ScoreClient


@dataclass(frozen=True)
class Candidate:
    qid: str
    doc_id: int
    sent_idx: int
    text: str
    retrieval_score: float
    rerank_score: float | None = None


@dataclass(frozen=True)
class RerankerSpec:
    kind: str = "lexical"
    endpoint: str = ""
    batch_size: int = DEFAULT_BATCH_SIZE
    max_in_flight: int = 4

    def __post_init__(self):
        if self.kind not in ("lexical", "external"):
            raise ValueError(f"unknown reranker kind {self.kind!r}")
        if (self.kind == "external") != bool(self.endpoint):
            raise ValueError("reranker endpoint must be set iff kind is 'external'")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def pool_candidates(qid: str, retrieved: Sequence[tuple[int, float]], store: DocumentStore) -> list[Candidate]:
    """All sentences of the retrieved documents, deduplicated by exact text.

    The first occurrence in (retrieval rank, sent_idx) order is kept.
    """
    seen = set()
    out = []
    for doc_id, score in retrieved:
        for sent in store.sentences(doc_id):
            if sent.text in seen:
                continue
            seen.add(sent.text)
            out.append(Candidate(qid, doc_id, sent.sent_idx, sent.text, score))
    return out


def _coverage(weights: list[tuple[str, float]], total: float, tokens) -> float:
    if total <= 0.0:
        return 0.0
    hit = 0.0
    for term, w in weights:
        if term in tokens:
            hit += w
    return min(1.0, hit / total)


def question_weights(question: str, idf: Callable[[str], float]) -> tuple[list[tuple[str, float]], float]:
    """Sorted distinct question tokens with their IDF, plus the IDF total."""
    weights = [(t, idf(t)) for t in sorted(set(tokenize(question)))]
    return weights, sum(w for _, w in weights)


def lexical_rerank_score(question: str, candidate_text: str, idf: Callable[[str], float]) -> float:
    """IDF mass of question tokens found in the candidate over the total question IDF.

    ``idf`` maps a term to its IDF, e.g. ``InvertedIndex.idf``.
    """
    weights, total = question_weights(question, idf)
    return _coverage(weights, total, set(tokenize(candidate_text)))


class LexicalReranker:
    """Batch form of :func:`lexical_rerank_score` with a sentence-token cache."""

    def __init__(self, idf: Callable[[str], float]):
        self.idf = idf
        self._tokens: dict[tuple[int, int], frozenset[str]] = {}

    def _token_set(self, c: Candidate) -> frozenset[str]:
        key = (c.doc_id, c.sent_idx)
        toks = self._tokens.get(key)
        if toks is None:
            toks = frozenset(tokenize(c.text))
            self._tokens[key] = toks
        return toks

    def rerank(self, question: str, candidates: Sequence[Candidate]) -> list[Candidate]:
        weights, total = question_weights(question, self.idf)
        return [replace(c, rerank_score=_coverage(weights, total, self._token_set(c))) for c in candidates]


def external_rerank(question: str, candidates: Sequence[Candidate], spec: RerankerSpec) -> list[Candidate]:
    """Score candidates with a score-protocol-v1 service (``reference`` is null)."""
    if spec.kind != "external":
        raise ValueError("external_rerank needs an external RerankerSpec")
    client = ScoreClient(spec.endpoint, batch_size=spec.batch_size, max_in_flight=spec.max_in_flight)
    scores = client.score(question, None, [c.text for c in candidates])
    return [replace(c, rerank_score=s) for c, s in zip(candidates, scores)]


def rank_key(c: Candidate):
    return (-c.rerank_score, -c.retrieval_score, c.doc_id, c.sent_idx)


def select_topk2(candidates: Sequence[Candidate], k2: int = 25) -> list[Candidate]:
    """Highest rerank scores first; ties by retrieval score, doc_id, sent_idx."""
    if k2 < 1:
        raise ValueError("k2 must be a positive integer")
    if any(c.rerank_score is None for c in candidates):
        raise ValueError("every candidate needs a rerank_score before selection")
    return sorted(candidates, key=rank_key)[:k2]
