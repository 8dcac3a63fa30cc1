"""Rank answers with a toy scorer and grade the ranking with P@1, MAP and MRR."""

from rws.datasets import AS2Record
from rws.metrics import RankedList, aggregate, grade

# Per-question metrics work on a ranked list of (score, label) pairs.
lst = RankedList.from_scores("q1", scores=[0.9, 0.4, 0.7], labels=[1, 1, 0])
print("ranked labels:", lst.labels)

report = aggregate([
    lst,
    RankedList.from_scores("q2", [0.2, 0.8], [1, 0]),
    RankedList.from_scores("q3", [0.5, 0.3], [0, 0]),  # no positive: skipped, not zero
])
print(report.as_dict())

# grade() joins scores to gold labels by (qid, answer text).
gold = {
    "q1": [AS2Record("q1", "who wrote hamlet", "Shakespeare wrote Hamlet.", 1),
           AS2Record("q1", "who wrote hamlet", "Hamlet is a play.", 0)],
}
scores = [("q1", "Shakespeare wrote Hamlet.", 0.3), ("q1", "Hamlet is a play.", 0.6)]
print(grade(gold, scores).as_dict())
