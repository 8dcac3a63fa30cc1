"""AS2 dataset I/O, WikiQA-style question classes, and dataset statistics.

Interchange TSV: one record per line, no header, columns
``qid, question, answer, label``. Weakly labeled output adds
``eval_score, doc_id, sent_idx``. Text fields escape ``\\``, tab, newline
and carriage return as ``\\\\``, ``\\t``, ``\\n``, ``\\r``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .evaluator import LabeledPair


class DatasetParseError(ValueError):
    pass


@dataclass(frozen=True)
class AS2Record:
    qid: str
    question: str
    answer: str
    label: int


# qid -> records, in file order
Dataset = dict


@dataclass(frozen=True)
class DatasetStats:
    num_q: int = 0
    num_a: int = 0
    num_pos: int = 0
    num_neg: int = 0

    def __add__(self, other: "DatasetStats") -> "DatasetStats":
        return DatasetStats(
            self.num_q + other.num_q,
            self.num_a + other.num_a,
            self.num_pos + other.num_pos,
            self.num_neg + other.num_neg,
        )

    def as_dict(self) -> dict:
        return {"num_q": self.num_q, "num_a": self.num_a, "num_pos": self.num_pos, "num_neg": self.num_neg}


class QuestionClass(str, Enum):
    ALL_PLUS = "all_plus"
    ALL_MINUS = "all_minus"
    CLEAN = "clean"


FILTER_MODES = ("origin", "without_all_minus", "clean_only")

_ESC = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESC = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def escape_field(s: str) -> str:
    return "".join(_ESC.get(ch, ch) for ch in s)


def unescape_field(s: str) -> str:
    if "\\" not in s:
        return s
    out = []
    it = iter(s)
    for ch in it:
        if ch == "\\":
            nxt = next(it, "")
            out.append(_UNESC.get(nxt, "\\" + nxt))
        else:
            out.append(ch)
    return "".join(out)


def _parse_label(raw: str, path, lineno: int) -> int:
    if raw not in ("0", "1"):
        raise DatasetParseError(f"{path}:{lineno}: label must be 0 or 1, got {raw!r}")
    return int(raw)


def load_as2_tsv(path) -> Dataset:
    """Load an interchange TSV (4 columns, or 7 for weakly labeled output)."""
    data: Dataset = {}
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) not in (4, 7):
                raise DatasetParseError(f"{path}:{lineno}: expected 4 or 7 columns, got {len(cols)}")
            qid, question, answer = (unescape_field(c) for c in cols[:3])
            rec = AS2Record(qid, question, answer, _parse_label(cols[3], path, lineno))
            data.setdefault(qid, []).append(rec)
    return data


def write_as2_tsv(data: Dataset, path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for recs in data.values():
            for r in recs:
                fh.write("\t".join([escape_field(r.qid), escape_field(r.question), escape_field(r.answer), str(r.label)]) + "\n")
                n += 1
    return n


def classify_question(records: Sequence[AS2Record]) -> QuestionClass:
    if not records:
        raise ValueError("cannot classify an empty question group")
    labels = {r.label for r in records}
    if labels == {1}:
        return QuestionClass.ALL_PLUS
    if labels == {0}:
        return QuestionClass.ALL_MINUS
    return QuestionClass.CLEAN


def filter_split(data: Dataset, mode: str = "origin") -> Dataset:
    if mode == "origin":
        return dict(data)
    if mode == "without_all_minus":
        return {q: r for q, r in data.items() if classify_question(r) is not QuestionClass.ALL_MINUS}
    if mode == "clean_only":
        return {q: r for q, r in data.items() if classify_question(r) is QuestionClass.CLEAN}
    raise ValueError(f"unknown filter mode {mode!r}; expected one of {FILTER_MODES}")


def compute_stats(data: Dataset) -> DatasetStats:
    num_a = sum(len(r) for r in data.values())
    num_pos = sum(rec.label for recs in data.values() for rec in recs)
    return DatasetStats(len(data), num_a, num_pos, num_a - num_pos)


def labeled_pairs_stats(pairs: Iterable[LabeledPair]) -> DatasetStats:
    pairs = list(pairs)
    pos = sum(p.label for p in pairs)
    return DatasetStats(len({p.qid for p in pairs}), len(pairs), pos, len(pairs) - pos)


# --------------------------------------------------------------------------
# Weakly labeled output
# --------------------------------------------------------------------------

LABELED_FIELDS = ("qid", "question", "answer", "label", "eval_score", "doc_id", "sent_idx")


def _labeled_row(p: LabeledPair) -> dict:
    return {
        "qid": p.qid,
        "question": p.question,
        "answer": p.answer,
        "label": p.label,
        "eval_score": p.eval_score,
        "doc_id": p.doc_id,
        "sent_idx": p.sent_idx,
    }


def emit_labeled_pairs(pairs: Iterable[LabeledPair], path, format: str = "tsv") -> int:
    """Write labeled pairs in the given order; returns the number written.

    Scores are written with ``repr`` so they round-trip exactly.
    """
    if format not in ("tsv", "jsonl"):
        raise ValueError(f"unknown output format {format!r}")
    path = Path(path)
    n = 0
    try:
        fh = path.open("w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"{path}: cannot write output ({exc})") from exc
    with fh:
        for p in pairs:
            if format == "tsv":
                fh.write("\t".join([
                    escape_field(p.qid), escape_field(p.question), escape_field(p.answer),
                    str(p.label), repr(float(p.eval_score)), str(p.doc_id), str(p.sent_idx),
                ]) + "\n")
            else:
                fh.write(json.dumps(_labeled_row(p), ensure_ascii=False) + "\n")
            n += 1
    return n


def load_labeled_pairs(path) -> list[LabeledPair]:
    """Read back a file written by :func:`emit_labeled_pairs` (format from content)."""
    out = []
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("{"):
                r = json.loads(line)
                out.append(LabeledPair(r["qid"], r["question"], r["answer"], float(r["eval_score"]),
                                       int(r["label"]), int(r["doc_id"]), int(r["sent_idx"])))
                continue
            cols = line.split("\t")
            if len(cols) != 7:
                raise DatasetParseError(f"{path}:{lineno}: expected 7 columns, got {len(cols)}")
            qid, question, answer = (unescape_field(c) for c in cols[:3])
            out.append(LabeledPair(qid, question, answer, float(cols[4]),
                                   _parse_label(cols[3], path, lineno), int(cols[5]), int(cols[6])))
    return out


# --------------------------------------------------------------------------
# Adapters from native formats
# --------------------------------------------------------------------------


def convert_wikiqa(src, dst) -> DatasetStats:
    """Convert a native WikiQA TSV (with its header row) to interchange TSV."""
    data: Dataset = {}
    with open(src, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        need = {"QuestionID", "Question", "Sentence", "Label"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise DatasetParseError(f"{src}: missing WikiQA columns {sorted(need)}")
        for lineno, row in enumerate(reader, 2):
            label = _parse_label((row["Label"] or "").strip(), src, lineno)
            qid = row["QuestionID"]
            data.setdefault(qid, []).append(AS2Record(qid, row["Question"], row["Sentence"], label))
    write_as2_tsv(data, dst)
    return compute_stats(data)


def convert_plain3(src, dst) -> DatasetStats:
    """Convert ``question<TAB>answer<TAB>label`` files (no qid column).

    Question ids are assigned as ``Q0, Q1, ...`` in order of first appearance.
    """
    data: Dataset = {}
    qids: dict[str, str] = {}
    with open(src, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise DatasetParseError(f"{src}:{lineno}: expected 3 columns, got {len(cols)}")
            question, answer, raw = cols
            qid = qids.setdefault(question, f"Q{len(qids)}")
            data.setdefault(qid, []).append(AS2Record(qid, question, answer, _parse_label(raw.strip(), src, lineno)))
    write_as2_tsv(data, dst)
    return compute_stats(data)


CONVERTERS = {"wikiqa": convert_wikiqa, "plain3": convert_plain3}
