"""Tokenizer, inverted index and BM25 retrieval.

On disk an index is a directory (``<store>/index`` by default) containing

``index.json``
    Version header: format name, version, BM25 parameters, document count,
    total token count and the digest of the store it was built from.
``vocab.txt``
    Terms in sorted order, one per line. Term ``i`` owns postings
    ``term_ptr[i]:term_ptr[i + 1]``.
``term_ptr.npy``, ``post_docs.npy``, ``post_tfs.npy``, ``doc_lens.npy``
    CSR posting arrays (int64/int32, little-endian ``.npy``).
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import DocumentStore

INDEX_FORMAT = "rws-index"
INDEX_VERSION = 1
DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_TOKEN = re.compile(r"[^\W_]+")


class IndexBuildError(Exception):
    """Index cannot be built or loaded."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit."""
    return _TOKEN.findall(text.lower())


def bm25_idf(df: int, n_docs: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


@dataclass(frozen=True)
class IndexStats:
    doc_count: int
    avg_doc_len: float
    doc_lens: np.ndarray


class InvertedIndex:
    """Immutable CSR inverted index; queries are pure and thread-safe."""

    def __init__(self, vocab, term_ptr, post_docs, post_tfs, doc_lens, *, k1=DEFAULT_K1, b=DEFAULT_B, store_digest=""):
        self.vocab = list(vocab)
        self.term_ids = {t: i for i, t in enumerate(self.vocab)}
        self.term_ptr = np.asarray(term_ptr, dtype=np.int64)
        self.post_docs = np.asarray(post_docs, dtype=np.int32)
        self.post_tfs = np.asarray(post_tfs, dtype=np.int32)
        self.doc_lens = np.asarray(doc_lens, dtype=np.int32)
        self.k1 = float(k1)
        self.b = float(b)
        self.store_digest = store_digest
        self.total_len = int(self.doc_lens.sum())
        n = len(self.doc_lens)
        self.stats = IndexStats(n, self.total_len / n if n else 0.0, self.doc_lens)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_texts(cls, texts, **kw) -> "InvertedIndex":
        postings: dict[str, list[tuple[int, int]]] = {}
        doc_lens = []
        for doc_id, text in enumerate(texts):
            toks = tokenize(text)
            doc_lens.append(len(toks))
            for term, tf in Counter(toks).items():
                postings.setdefault(term, []).append((doc_id, tf))
        if not doc_lens:
            raise IndexBuildError("cannot build an index over an empty store")
        vocab = sorted(postings)
        ptr = np.zeros(len(vocab) + 1, dtype=np.int64)
        docs, tfs = [], []
        for i, term in enumerate(vocab):
            entries = postings[term]
            ptr[i + 1] = ptr[i] + len(entries)
            docs.extend(d for d, _ in entries)
            tfs.extend(f for _, f in entries)
        return cls(vocab, ptr, docs, tfs, doc_lens, **kw)

    def save(self, path) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        header = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "k1": self.k1,
            "b": self.b,
            "doc_count": self.stats.doc_count,
            "total_len": self.total_len,
            "num_terms": len(self.vocab),
            "store_digest": self.store_digest,
        }
        (path / "index.json").write_text(json.dumps(header, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        (path / "vocab.txt").write_text("".join(t + "\n" for t in self.vocab), encoding="utf-8")
        for name in ("term_ptr", "post_docs", "post_tfs", "doc_lens"):
            arr = getattr(self, name)
            np.save(path / f"{name}.npy", arr.astype(arr.dtype.newbyteorder("<")), allow_pickle=False)

    @classmethod
    def load(cls, path) -> "InvertedIndex":
        path = Path(path)
        header_path = path / "index.json"
        if not header_path.exists():
            raise IndexBuildError(f"{path}: no index found (missing index.json)")
        header = json.loads(header_path.read_text(encoding="utf-8"))
        if header.get("format") != INDEX_FORMAT or header.get("version") != INDEX_VERSION:
            raise IndexBuildError(f"{path}: unsupported index format {header.get('format')} v{header.get('version')}")
        vocab = (path / "vocab.txt").read_text(encoding="utf-8").splitlines()
        arrays = {n: np.load(path / f"{n}.npy", allow_pickle=False) for n in ("term_ptr", "post_docs", "post_tfs", "doc_lens")}
        idx = cls(vocab, k1=header["k1"], b=header["b"], store_digest=header["store_digest"], **arrays)
        if idx.stats.doc_count != header["doc_count"] or len(vocab) != header["num_terms"]:
            raise IndexBuildError(f"{path}: index files disagree with header")
        return idx

    # -- lookups ----------------------------------------------------------

    def postings(self, term: str) -> list[tuple[int, int]]:
        """Posting list of ``term`` as ascending ``(doc_id, tf)`` pairs."""
        tid = self.term_ids.get(term)
        if tid is None:
            return []
        lo, hi = self.term_ptr[tid], self.term_ptr[tid + 1]
        return list(zip(self.post_docs[lo:hi].tolist(), self.post_tfs[lo:hi].tolist()))

    def df(self, term: str) -> int:
        tid = self.term_ids.get(term)
        return 0 if tid is None else int(self.term_ptr[tid + 1] - self.term_ptr[tid])

    def idf(self, term: str) -> float:
        return bm25_idf(self.df(term), self.stats.doc_count)

    def _term_weight(self, tf, dl):
        norm = self.k1 * (1.0 - self.b + self.b * dl / self.stats.avg_doc_len)
        return tf * (self.k1 + 1.0) / (tf + norm)

    def bm25_score(self, query_terms, doc_id: int) -> float:
        if not 0 <= doc_id < self.stats.doc_count:
            raise KeyError(f"unknown doc_id {doc_id}")
        dl = float(self.doc_lens[doc_id])
        score = 0.0
        for term in query_terms:
            tid = self.term_ids.get(term)
            if tid is None:
                continue
            lo, hi = self.term_ptr[tid], self.term_ptr[tid + 1]
            pos = lo + np.searchsorted(self.post_docs[lo:hi], doc_id)
            if pos < hi and self.post_docs[pos] == doc_id:
                idf = bm25_idf(int(hi - lo), self.stats.doc_count)
                score += idf * self._term_weight(float(self.post_tfs[pos]), dl)
        return score

    def score_all(self, query_terms) -> np.ndarray:
        """BM25 score of every document, accumulated term by term."""
        scores = np.zeros(self.stats.doc_count, dtype=np.float64)
        dl = self.doc_lens.astype(np.float64)
        for term in query_terms:
            tid = self.term_ids.get(term)
            if tid is None:
                continue
            lo, hi = self.term_ptr[tid], self.term_ptr[tid + 1]
            docs = self.post_docs[lo:hi]
            idf = bm25_idf(int(hi - lo), self.stats.doc_count)
            tf = self.post_tfs[lo:hi].astype(np.float64)
            scores[docs] += idf * self._term_weight(tf, dl[docs])
        return scores

    def retrieve_topk(self, question: str, k1: int = 1000) -> list[tuple[int, float]]:
        """Top ``k1`` documents with positive score, ties by ascending doc_id."""
        if k1 < 1:
            raise ValueError("k1 must be a positive integer")
        terms = tokenize(question)
        if not terms:
            return []
        scores = self.score_all(terms)
        hits = np.flatnonzero(scores > 0.0)
        if len(hits) > k1:
            # keep everything tied with the k1-th score so the tie rule applies
            kth = np.partition(scores[hits], len(hits) - k1)[len(hits) - k1]
            hits = hits[scores[hits] >= kth]
        order = np.lexsort((hits, -scores[hits]))[:k1]
        return [(int(d), float(scores[d])) for d in hits[order]]


def index_dir(store_path) -> Path:
    return Path(store_path) / "index"


def build_index(store: DocumentStore, out_dir=None, *, k1=DEFAULT_K1, b=DEFAULT_B) -> InvertedIndex:
    """Build the BM25 index over ``store`` and persist it (default ``<store>/index``)."""
    if len(store) == 0:
        raise IndexBuildError(f"{store.path}: cannot build an index over an empty store")
    idx = InvertedIndex.from_texts((d.text for d in store), k1=k1, b=b, store_digest=store.digest())
    idx.save(out_dir if out_dir is not None else index_dir(store.path))
    return idx


def load_index(store_path) -> InvertedIndex:
    return InvertedIndex.load(index_dir(store_path))


def bm25_score(query_terms, doc_id: int, index: InvertedIndex) -> float:
    return index.bm25_score(query_terms, doc_id)


def retrieve_topk(question: str, k1: int, index: InvertedIndex) -> list[tuple[int, float]]:
    return index.retrieve_topk(question, k1)
