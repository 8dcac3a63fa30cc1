"""Convert a WikiQA-style file and compare the three question filters.

Questions fall into three classes: all answers positive, all negative, or
mixed ("clean"). Training sets usually drop the all-negative ones, and
evaluation often keeps only the mixed ones.
"""

import tempfile
from pathlib import Path

from rws.datasets import classify_question, compute_stats, convert_wikiqa, filter_split, load_as2_tsv

SAMPLE = Path(__file__).resolve().parent.parent / "tests" / "data" / "wikiqa_sample.tsv"

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "wikiqa.tsv"
    convert_wikiqa(SAMPLE, out)
    data = load_as2_tsv(out)

for qid, records in data.items():
    labels = "".join(str(r.label) for r in records)
    print(f"{qid:4} {classify_question(records).value:10} {labels:6} {records[0].question}")

print()
for mode in ("origin", "without_all_minus", "clean_only"):
    s = compute_stats(filter_split(data, mode))
    print(f"{mode:18} #Q={s.num_q:3} #A={s.num_a:3} (+{s.num_pos} / -{s.num_neg})")
