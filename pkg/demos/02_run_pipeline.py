"""Run the full weak-labeling pipeline on a synthetic planted corpus.

The fixture hides a reordered copy of each reference answer in one document.
A working pipeline should retrieve that sentence, select it among the top
candidates, and label it positive.
"""

import tempfile
from collections import Counter
from pathlib import Path

from rws.corpus import ingest_corpus
from rws.datasets import load_labeled_pairs
from rws.fixtures import make_planted_fixture
from rws.index import build_index
from rws.pipeline import run_pipeline, validate_config

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    fx = make_planted_fixture(tmp, n_questions=10, n_docs=200)
    build_index(ingest_corpus(fx.corpus_path, tmp / "store").store)

    q = fx.questions[0]
    print("question: ", q.question)
    print("reference:", q.reference)
    print("plant:    ", q.plant)

    config = validate_config({
        "corpus_store": tmp / "store",
        "input_pairs": fx.pairs_path,
        "output": tmp / "out" / "rws.tsv",
        "k1": 200,
        "k2": 10,
    })
    result = run_pipeline(config)
    print("\nstage counts:", result.manifest["stage_counts"])
    print("stats:       ", result.stats.as_dict())

    pairs = load_labeled_pairs(result.output)
    print(f"\ntop candidates for question {q.qid}:")
    for p in [p for p in pairs if p.qid == q.qid][:5]:
        print(f"  label={p.label} score={p.eval_score:.3f}  {p.answer}")

    found = sum(1 for p in pairs if p.label and p.answer == fx.plants[p.qid])
    print(f"\nplants recovered: {found}/{len(fx.plants)}")
    print("labels:", dict(Counter(p.label for p in pairs)))
    print("manifest written to", result.manifest_path.name)
