"""Ingest a small corpus, look at its sentences, and query the BM25 index.

Run with ``python demos/01_build_index.py``. Everything happens in a
temporary directory.
"""

import json
import tempfile
from pathlib import Path

from rws.corpus import ingest_corpus
from rws.index import build_index

DOCS = [
    "The Eiffel Tower was completed in 1889. It was designed by the company of Gustave Eiffel.",
    "Mount Everest is the highest mountain above sea level. Its summit is 8,849 m high.",
    "Dr. Smith visited Paris in May. She climbed the Eiffel Tower on a sunny day.",
]

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    src = tmp / "corpus.jsonl"
    src.write_text("".join(json.dumps({"id": f"doc{i}", "text": t}) + "\n" for i, t in enumerate(DOCS)), encoding="utf-8")

    # Ingestion normalizes text and writes a random-access document store.
    result = ingest_corpus(src, tmp / "store")
    store = result.store
    print(f"ingested {result.num_documents} documents, skipped {result.num_skipped}")

    # Sentences are produced on demand. Note that "Dr." does not end a sentence.
    for doc in store:
        for sent in store.sentences(doc.doc_id):
            print(f"  ({sent.doc_id}, {sent.sent_idx}) {sent.text}")

    # The index lives next to the store and records the store digest it was built from.
    index = build_index(store)
    print(f"\nindex: {index.stats.doc_count} docs, {len(index.vocab)} terms, avg length {index.stats.avg_doc_len:.1f}")

    question = "When was the Eiffel Tower completed?"
    print(f"\ntop documents for {question!r}:")
    for doc_id, score in index.retrieve_topk(question, k1=10):
        print(f"  doc {doc_id}  bm25={score:.4f}  {store.get(doc_id).text[:50]}...")
