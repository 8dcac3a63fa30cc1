"""Document store: corpus ingestion and rule-based sentence segmentation.

A store is a directory holding three files:

``documents.jsonl``
    One UTF-8 JSON object per document, ``{"doc_id", "source_id", "text"}``,
    keys sorted, no ASCII escaping, ``\\n`` line terminator.
``offsets.u64``
    ``N + 1`` little-endian uint64 byte offsets into ``documents.jsonl``;
    document ``i`` occupies ``[offsets[i], offsets[i + 1])``.
``store.json``
    Format name, version, document count and the ingestion skip count.

All three are written deterministically, so ingesting the same input twice
yields byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterator

import numpy as np

STORE_FORMAT = "rws-store"
STORE_VERSION = 1
DOCUMENTS_FILE = "documents.jsonl"
OFFSETS_FILE = "offsets.u64"
META_FILE = "store.json"

MAX_SENTENCE_CHARS = 1000


class IngestError(Exception):
    pass


@dataclass(frozen=True)
class Document:
    doc_id: int
    source_id: str
    text: str


@dataclass(frozen=True)
class Sentence:
    doc_id: int
    sent_idx: int
    text: str


# --------------------------------------------------------------------------
# Normalization
# --------------------------------------------------------------------------

_CONTROL = re.compile(r"[\x00-\x08\x0b-\x1f\x7f-\x9f]")


def normalize_text(text: str) -> str:
    """NFC-normalize and drop control characters, keeping newlines.

    CRLF/CR line endings become ``\\n`` and tabs become spaces before the
    remaining control characters (including NUL) are removed.
    """
    text = unicodedata.normalize("NFC", text)
    text = text.replace("\r\n", "\n").replace("\r", "\n").replace("\t", " ")
    return _CONTROL.sub("", text).strip()


# --------------------------------------------------------------------------
# Segmentation
# --------------------------------------------------------------------------


def _load_abbreviations() -> frozenset[str]:
    raw = resources.files("rws").joinpath("data/abbreviations.txt").read_text("utf-8")
    return frozenset(
        line.strip().lower() for line in raw.splitlines() if line.strip() and not line.startswith("#")
    )


ABBREVIATIONS = _load_abbreviations()

_PARAGRAPH_BREAK = re.compile(r"\n[ \t]*\n\s*")
# terminal punctuation, optional closing quotes/brackets, then whitespace or end
_TERMINAL = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s|$)")
_PREV_WORD = re.compile(r"(\S+)$")


def _is_abbreviation(before: str) -> bool:
    m = _PREV_WORD.search(before)
    if m is None:
        return False
    word = m.group(1).lstrip("\"'(“‘[")
    if len(word) == 1 and word.isupper():
        return True
    return word.lower() in ABBREVIATIONS


def _sentence_spans(text: str, start: int, end: int) -> Iterator[tuple[int, int]]:
    """Yield (start, end) spans of sentences inside one paragraph."""
    pos = start
    for m in _TERMINAL.finditer(text, start, end):
        stop = m.end()
        rest = text[stop:end].lstrip()
        if rest and not rest[0].isupper():
            continue
        if text[m.start()] == "." and m.end() - m.start() == 1 and _is_abbreviation(text[pos:m.start()]):
            continue
        yield pos, stop
        pos = stop
    if pos < end:
        yield pos, end


def _hard_wrap(piece: str, limit: int) -> list[str]:
    out = []
    while len(piece) > limit:
        cut = max(piece.rfind(" ", 0, limit + 1), piece.rfind("\n", 0, limit + 1))
        if cut <= 0:
            cut = limit
        head, piece = piece[:cut].rstrip(), piece[cut:].lstrip()
        if head:
            out.append(head)
    if piece:
        out.append(piece)
    return out


def split_text(text: str, max_chars: int = MAX_SENTENCE_CHARS) -> list[str]:
    """Split raw text into sentence strings (see :func:`segment_sentences`)."""
    pieces = []
    para_start = 0
    bounds = [(m.start(), m.end()) for m in _PARAGRAPH_BREAK.finditer(text)]
    bounds.append((len(text), len(text)))
    for brk_start, brk_end in bounds:
        for s, e in _sentence_spans(text, para_start, brk_start):
            piece = text[s:e].strip()
            if piece:
                pieces.extend(_hard_wrap(piece, max_chars))
        para_start = brk_end
    return pieces


def segment_sentences(doc: Document, max_chars: int = MAX_SENTENCE_CHARS) -> list[Sentence]:
    """Split a document into ordered sentences.

    Boundaries fall after ``.``, ``!`` or ``?`` (plus closing quotes) when the
    next non-space character is uppercase or the text ends. A single period
    after an uppercase initial or a listed abbreviation does not split. Blank
    lines always split. Sentences longer than ``max_chars`` are wrapped at
    the last whitespace before the limit.
    """
    return [Sentence(doc.doc_id, i, s) for i, s in enumerate(split_text(doc.text, max_chars))]


# --------------------------------------------------------------------------
# Store
# --------------------------------------------------------------------------


def _iter_jsonl(path: Path) -> Iterator[tuple[str, str]]:
    try:
        fh = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"{path}: cannot read input ({exc})") from exc
    with fh:
        try:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise IngestError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
                if not isinstance(rec, dict) or not isinstance(rec.get("text"), str):
                    raise IngestError(f"{path}:{lineno}: record has no string 'text' field")
                url = rec.get("url") or ""
                yield str(url), rec["text"]
        except UnicodeDecodeError as exc:
            raise IngestError(f"{path}: not valid UTF-8 ({exc})") from exc


def _iter_plain_dir(path: Path) -> Iterator[tuple[str, str]]:
    if not path.is_dir():
        raise IngestError(f"{path}: not a directory")
    for f in sorted(p for p in path.rglob("*") if p.is_file()):
        rel = f.relative_to(path).as_posix()
        try:
            text = f.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise IngestError(f"{f}: cannot read document ({exc})") from exc
        yield rel, text


@dataclass
class IngestResult:
    store: "DocumentStore"
    num_documents: int
    num_skipped: int


def ingest_corpus(input_path, store_dir, format: str = "jsonl") -> IngestResult:
    """Ingest a jsonl file or a directory of text files into ``store_dir``.

    Records whose text is empty after normalization are skipped and counted.
    """
    input_path = Path(input_path)
    store_dir = Path(store_dir)
    if not input_path.exists():
        raise IngestError(f"{input_path}: input does not exist")
    if format == "jsonl":
        records = _iter_jsonl(input_path)
    elif format == "plain_dir":
        records = _iter_plain_dir(input_path)
    else:
        raise ValueError(f"unknown corpus format {format!r}")

    store_dir.mkdir(parents=True, exist_ok=True)
    offsets = [0]
    skipped = 0
    with (store_dir / DOCUMENTS_FILE).open("wb") as out:
        for source_id, raw in records:
            text = normalize_text(raw)
            if not text:
                skipped += 1
                continue
            rec = {"doc_id": len(offsets) - 1, "source_id": source_id, "text": text}
            line = (json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n").encode("utf-8")
            out.write(line)
            offsets.append(offsets[-1] + len(line))
    np.asarray(offsets, dtype="<u8").tofile(store_dir / OFFSETS_FILE)
    meta = {
        "format": STORE_FORMAT,
        "version": STORE_VERSION,
        "num_documents": len(offsets) - 1,
        "num_skipped": skipped,
    }
    (store_dir / META_FILE).write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return IngestResult(DocumentStore(store_dir), len(offsets) - 1, skipped)


class DocumentStore:
    """Read-only view over an ingested store; safe for concurrent readers."""

    def __init__(self, path):
        self.path = Path(path)
        meta_path = self.path / META_FILE
        if not meta_path.exists():
            raise FileNotFoundError(f"{self.path}: not a document store (missing {META_FILE})")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("format") != STORE_FORMAT or meta.get("version") != STORE_VERSION:
            raise ValueError(f"{self.path}: unsupported store format {meta.get('format')} v{meta.get('version')}")
        self.meta = meta
        self._offsets = np.fromfile(self.path / OFFSETS_FILE, dtype="<u8")
        self._data = (self.path / DOCUMENTS_FILE).read_bytes()
        if len(self._offsets) != meta["num_documents"] + 1 or int(self._offsets[-1]) != len(self._data):
            raise ValueError(f"{self.path}: offsets file does not match documents file")
        self._sentences: dict[int, list[Sentence]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._offsets) - 1

    def __iter__(self) -> Iterator[Document]:
        for i in range(len(self)):
            yield self.get(i)

    def get(self, doc_id: int) -> Document:
        if not 0 <= doc_id < len(self):
            raise KeyError(f"unknown doc_id {doc_id}")
        rec = json.loads(self._data[self._offsets[doc_id]:self._offsets[doc_id + 1]])
        return Document(rec["doc_id"], rec["source_id"], rec["text"])

    def sentences(self, doc_id: int) -> list[Sentence]:
        """Segmented sentences of a document, cached after first use."""
        cached = self._sentences.get(doc_id)
        if cached is None:
            cached = segment_sentences(self.get(doc_id))
            with self._lock:
                self._sentences.setdefault(doc_id, cached)
        return cached

    def sentence(self, doc_id: int, sent_idx: int) -> Sentence:
        return self.sentences(doc_id)[sent_idx]

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in (META_FILE, OFFSETS_FILE, DOCUMENTS_FILE):
            h.update(name.encode())
            h.update((self.path / name).read_bytes())
        return h.hexdigest()
