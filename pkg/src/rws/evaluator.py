"""Reference-based answer scoring and thresholding into weak labels."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .candidates import Candidate
from .index import tokenize
from .scoring import ScoreClient

DEFAULT_THRESHOLD = 0.9
DEFAULT_ALPHA = 0.75


@dataclass(frozen=True)
class ReferencePair:
    qid: str
    question: str
    reference: str

    def __post_init__(self):
        if not self.question.strip() or not self.reference.strip():
            raise ValueError(f"question {self.qid}: question and reference must be non-empty")


@dataclass(frozen=True)
class LabeledPair:
    qid: str
    question: str
    answer: str
    eval_score: float
    label: int
    doc_id: int
    sent_idx: int


@dataclass(frozen=True)
class EvaluatorSpec:
    kind: str = "proxy"
    endpoint: str = ""
    alpha: float = DEFAULT_ALPHA
    threshold: float = DEFAULT_THRESHOLD
    batch_size: int = 64
    max_in_flight: int = 4

    def __post_init__(self):
        if self.kind not in ("proxy", "external"):
            raise ValueError(f"unknown evaluator kind {self.kind!r}")
        if (self.kind == "external") != bool(self.endpoint):
            raise ValueError("evaluator endpoint must be set iff kind is 'external'")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must be in [0, 1]")


def token_f1(a: str, b: str) -> float:
    """Harmonic mean of token-multiset precision and recall; 0 if either side is empty."""
    ta, tb = Counter(tokenize(a)), Counter(tokenize(b))
    if not ta or not tb:
        return 0.0
    common = sum((ta & tb).values())
    if common == 0:
        return 0.0
    precision = common / sum(tb.values())
    recall = common / sum(ta.values())
    return 2 * precision * recall / (precision + recall)


def proxy_eval_score(question: str, reference: str, candidate_text: str, alpha: float = DEFAULT_ALPHA) -> float:
    """Lexical stand-in for a learned evaluator: reference F1 blended with question F1."""
    score = alpha * token_f1(reference, candidate_text) + (1.0 - alpha) * token_f1(question, candidate_text)
    return min(1.0, max(0.0, score))


def threshold_label(eval_score: float, threshold: float = DEFAULT_THRESHOLD) -> int:
    # inclusive: a score equal to the threshold is positive
    return 1 if eval_score >= threshold else 0


def external_eval(question: str, reference: str, candidates: Sequence[str], spec: EvaluatorSpec) -> list[float]:
    if spec.kind != "external":
        raise ValueError("external_eval needs an external EvaluatorSpec")
    client = ScoreClient(spec.endpoint, batch_size=spec.batch_size, max_in_flight=spec.max_in_flight)
    return client.score(question, reference, list(candidates))


def label_candidates(pairs, candidates: Sequence[Candidate], spec: EvaluatorSpec) -> list[LabeledPair]:
    """Score every candidate against the reference(s) and threshold the scores.

    ``pairs`` is one ReferencePair or several sharing a qid; with several
    references a candidate keeps its maximum score.
    """
    if isinstance(pairs, ReferencePair):
        pairs = [pairs]
    if not pairs:
        raise ValueError("at least one reference pair is required")
    question = pairs[0].question
    texts = [c.text for c in candidates]
    best = [0.0] * len(texts)
    for pair in pairs:
        if spec.kind == "proxy":
            scores = [proxy_eval_score(pair.question, pair.reference, t, spec.alpha) for t in texts]
        else:
            scores = external_eval(pair.question, pair.reference, texts, spec)
        best = [max(a, b) for a, b in zip(best, scores)]
    return [
        LabeledPair(pairs[0].qid, question, c.text, s, threshold_label(s, spec.threshold), c.doc_id, c.sent_idx)
        for c, s in zip(candidates, best)
    ]
