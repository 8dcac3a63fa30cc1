"""Command-line entry point: ``rws <group> <command>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import datasets as ds
from .corpus import DocumentStore, IngestError, ingest_corpus
from .index import IndexBuildError, build_index, load_index
from .metrics import grade
from .pipeline import ConfigError, PipelineError, load_config, run_pipeline, validate_config


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


def cmd_ingest(args) -> int:
    res = ingest_corpus(args.input, args.store, args.format)
    _print_json({"store": str(args.store), "documents": res.num_documents, "skipped": res.num_skipped})
    return 0


def cmd_index_build(args) -> int:
    idx = build_index(DocumentStore(args.store))
    _print_json({"documents": idx.stats.doc_count, "terms": len(idx.vocab), "avg_doc_len": idx.stats.avg_doc_len})
    return 0


def cmd_index_query(args) -> int:
    idx = load_index(args.store)
    for rank, (doc_id, score) in enumerate(idx.retrieve_topk(args.question, args.k1), 1):
        print(f"{rank}\t{doc_id}\t{score:.6f}")
    return 0


def cmd_run(args) -> int:
    raw = load_config(args.config) if args.config else {}
    overrides = {
        "k1": args.k1, "k2": args.k2, "threshold": args.threshold, "alpha": args.alpha,
        "reranker": args.reranker, "evaluator": args.evaluator, "parallelism": args.parallelism,
        "corpus_store": args.store, "input_pairs": args.pairs, "output": args.output,
    }
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if args.endpoint:
        if raw.get("reranker") == "external":
            raw["reranker_endpoint"] = args.endpoint
        if raw.get("evaluator") == "external":
            raw["evaluator_endpoint"] = args.endpoint
    res = run_pipeline(validate_config(raw))
    _print_json({"output": str(res.output), "manifest": str(res.manifest_path), "stats": res.stats.as_dict()})
    return 0


def cmd_dataset_stats(args) -> int:
    data = ds.load_as2_tsv(args.path)
    out = {"all": ds.compute_stats(data).as_dict()}
    for mode in ds.FILTER_MODES[1:]:
        out[mode] = ds.compute_stats(ds.filter_split(data, mode)).as_dict()
    _print_json(out)
    return 0


def cmd_dataset_filter(args) -> int:
    data = ds.filter_split(ds.load_as2_tsv(args.input), args.mode)
    ds.write_as2_tsv(data, args.output)
    _print_json(ds.compute_stats(data).as_dict())
    return 0


def cmd_dataset_convert(args) -> int:
    stats = ds.CONVERTERS[args.source_format](args.input, args.output)
    _print_json(stats.as_dict())
    return 0


def _load_scores(path):
    rows = []
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ds.DatasetParseError(f"{path}:{lineno}: expected qid, answer, score")
            try:
                score = float(cols[2])
            except ValueError:
                raise ds.DatasetParseError(f"{path}:{lineno}: score is not a number") from None
            rows.append((ds.unescape_field(cols[0]), ds.unescape_field(cols[1]), score))
    return rows


def cmd_metrics_grade(args) -> int:
    report = grade(ds.load_as2_tsv(args.gold), _load_scores(args.scores))
    _print_json(report.as_dict())
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rws", description="Reference-based weak supervision pipeline.")
    ap.add_argument("-v", "--verbose", action="store_true")
    groups = ap.add_subparsers(dest="group", required=True)

    corpus = groups.add_parser("corpus", help="document store").add_subparsers(dest="cmd", required=True)
    p = corpus.add_parser("ingest", help="ingest a jsonl file or a text directory")
    p.add_argument("--input", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--format", choices=["jsonl", "plain_dir"], default="jsonl")
    p.set_defaults(func=cmd_ingest)

    index = groups.add_parser("index", help="BM25 index").add_subparsers(dest="cmd", required=True)
    p = index.add_parser("build")
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_index_build)
    p = index.add_parser("query")
    p.add_argument("--store", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--k1", type=int, default=10)
    p.set_defaults(func=cmd_index_query)

    p = groups.add_parser("run", help="run the weak-labeling pipeline")
    p.add_argument("--config")
    p.add_argument("--store", help="corpus store (overrides corpus_store)")
    p.add_argument("--pairs", help="reference pairs (overrides input_pairs)")
    p.add_argument("--output")
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--reranker", choices=["lexical", "external"])
    p.add_argument("--evaluator", choices=["proxy", "external"])
    p.add_argument("--endpoint", help="score service URL for whichever stage is external")
    p.add_argument("--parallelism", type=int)
    p.set_defaults(func=cmd_run)

    dataset = groups.add_parser("dataset", help="AS2 datasets").add_subparsers(dest="cmd", required=True)
    p = dataset.add_parser("stats")
    p.add_argument("path")
    p.set_defaults(func=cmd_dataset_stats)
    p = dataset.add_parser("filter")
    p.add_argument("--mode", choices=ds.FILTER_MODES, required=True)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_dataset_filter)
    p = dataset.add_parser("convert")
    p.add_argument("--from", dest="source_format", choices=sorted(ds.CONVERTERS), required=True)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_dataset_convert)

    metrics = groups.add_parser("metrics", help="ranking metrics").add_subparsers(dest="cmd", required=True)
    p = metrics.add_parser("grade")
    p.add_argument("--gold", required=True)
    p.add_argument("--scores", required=True)
    p.set_defaults(func=cmd_metrics_grade)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except (IngestError, IndexBuildError, PipelineError, ds.DatasetParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
