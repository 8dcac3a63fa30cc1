"""P@1, MAP and MRR over per-question ranked candidate lists.

Questions without any positive label are skipped and counted rather than
scored as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class RankedList:
    qid: str
    entries: tuple  # ((score, label), ...) best first

    def __post_init__(self):
        if not self.entries:
            raise ValueError(f"question {self.qid}: ranked list is empty")
        for (s0, _), (s1, _) in zip(self.entries, self.entries[1:]):
            if s1 > s0:
                raise ValueError(f"question {self.qid}: entries are not sorted by descending score")
        for _, label in self.entries:
            if label not in (0, 1):
                raise ValueError(f"question {self.qid}: labels must be 0 or 1")

    @classmethod
    def from_scores(cls, qid: str, scores: Sequence[float], labels: Sequence[int]) -> "RankedList":
        """Sort by descending score; equal scores keep their input order."""
        if len(scores) != len(labels):
            raise ValueError("scores and labels differ in length")
        order = sorted(range(len(scores)), key=lambda i: -scores[i])
        return cls(qid, tuple((float(scores[i]), int(labels[i])) for i in order))

    @property
    def labels(self) -> list[int]:
        return [label for _, label in self.entries]


@dataclass(frozen=True)
class MetricReport:
    p_at_1: float
    map: float
    mrr: float
    num_questions_scored: int
    num_questions_skipped: int

    def as_dict(self) -> dict:
        return {
            "p_at_1": self.p_at_1,
            "map": self.map,
            "mrr": self.mrr,
            "num_questions_scored": self.num_questions_scored,
            "num_questions_skipped": self.num_questions_skipped,
        }


def average_precision(lst: RankedList) -> float | None:
    """Mean of precision@k over the ranks k holding a positive; None if no positives."""
    hits = 0
    total = 0.0
    for k, label in enumerate(lst.labels, 1):
        if label:
            hits += 1
            total += hits / k
    return total / hits if hits else None


def reciprocal_rank(lst: RankedList) -> float | None:
    for k, label in enumerate(lst.labels, 1):
        if label:
            return 1.0 / k
    return None


def precision_at_1(lst: RankedList) -> int | None:
    if not any(lst.labels):
        return None
    return lst.labels[0]


def aggregate(lists: Iterable[RankedList]) -> MetricReport:
    aps, rrs, p1s = [], [], []
    skipped = 0
    for lst in lists:
        ap = average_precision(lst)
        if ap is None:
            skipped += 1
            continue
        aps.append(ap)
        rrs.append(reciprocal_rank(lst))
        p1s.append(precision_at_1(lst))
    if not aps:
        raise ValueError("no question has a positive label; nothing to score")
    n = len(aps)
    return MetricReport(sum(p1s) / n, sum(aps) / n, sum(rrs) / n, n, skipped)


def grade(gold, scores: Sequence[tuple[str, str, float]]) -> MetricReport:
    """Join system scores to gold labels on (qid, answer) and aggregate.

    ``gold`` is a dataset mapping qid to AS2 records. Repeated (qid, answer)
    keys are matched in file order. Any unmatched row on either side is an
    error.
    """
    pending: dict[tuple[str, str], list[int]] = {}
    for qid, recs in gold.items():
        for r in recs:
            pending.setdefault((qid, r.answer), []).append(r.label)
    per_q: dict[str, tuple[list[float], list[int]]] = {}
    for lineno, (qid, answer, score) in enumerate(scores, 1):
        queue = pending.get((qid, answer))
        if not queue:
            raise ValueError(f"score row {lineno}: no gold record for ({qid!r}, {answer[:40]!r})")
        s, l = per_q.setdefault(qid, ([], []))
        s.append(score)
        l.append(queue.pop(0))
    missing = [k for k, v in pending.items() if v]
    if missing:
        qid, answer = missing[0]
        raise ValueError(f"{len(missing)} gold records have no score, e.g. ({qid!r}, {answer[:40]!r})")
    return aggregate(RankedList.from_scores(q, s, l) for q, (s, l) in per_q.items())
