"""End-to-end weak-labeling pipeline: retrieve, pool, rerank, select, label, emit.

Configuration files are INI (``configparser``)::

    [rws]
    corpus_store = store/        ; relative paths resolve against the file
    input_pairs = pairs.jsonl
    output = out/rws.tsv         ; ".jsonl" suffix selects JSON lines
    k1 = 1000
    k2 = 25
    threshold = 0.9
    parallelism = 1
    checkpoint_dir =             ; default: <output>.ckpt

    [reranker]
    kind = lexical               ; or external
    endpoint =
    batch_size = 64

    [evaluator]
    kind = proxy                 ; or external
    endpoint =
    alpha = 0.75
    batch_size = 64

Every key is optional. The run manifest is written next to the output as
``<output>.manifest.json``; it omits parallelism and filesystem locations so
that runs of the same configuration produce identical manifests.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .candidates import Candidate, LexicalReranker, RerankerSpec, external_rerank, pool_candidates, select_topk2
from .corpus import DocumentStore
from .datasets import (DatasetStats, emit_labeled_pairs, escape_field, labeled_pairs_stats, load_as2_tsv,
                       unescape_field)
from .evaluator import EvaluatorSpec, LabeledPair, ReferencePair, label_candidates
from .index import IndexBuildError, InvertedIndex, load_index
from .scoring import ScoringError

log = logging.getLogger(__name__)

STAGES = ("retrieved", "pooled", "reranked", "labeled")
MAX_FAILED_FRACTION = 0.10
MANIFEST_FORMAT = "rws-manifest"
MANIFEST_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    corpus_store: Path | None = None
    input_pairs: Path | None = None
    output: Path | None = None
    k1: int = 1000
    k2: int = 25
    threshold: float = 0.9
    reranker: RerankerSpec = field(default_factory=RerankerSpec)
    evaluator: EvaluatorSpec = field(default_factory=EvaluatorSpec)
    parallelism: int = 1
    checkpoint_dir: Path | None = None

    def scoring_params(self) -> dict:
        """The part of the config that determines output content."""
        return {
            "k1": self.k1,
            "k2": self.k2,
            "threshold": self.threshold,
            "reranker": {"kind": self.reranker.kind, "endpoint": self.reranker.endpoint},
            "evaluator": {"kind": self.evaluator.kind, "endpoint": self.evaluator.endpoint,
                          "alpha": self.evaluator.alpha},
        }


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

_INT_KEYS = ("k1", "k2", "parallelism", "reranker_batch_size", "evaluator_batch_size")
_FLOAT_KEYS = ("threshold", "alpha")
_PATH_KEYS = ("corpus_store", "input_pairs", "output", "checkpoint_dir")


def load_config(path) -> dict:
    """Read an INI config into the flat mapping accepted by :func:`validate_config`."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    raw: dict[str, Any] = {}
    if parser.has_section("rws"):
        raw.update(parser["rws"])
    for section in ("reranker", "evaluator"):
        if parser.has_section(section):
            for key, value in parser[section].items():
                name = section if key == "kind" else ("alpha" if key == "alpha" else f"{section}_{key}")
                raw[name] = value
    for key in _PATH_KEYS:
        if raw.get(key):
            p = Path(raw[key])
            raw[key] = p if p.is_absolute() else path.parent / p
    return {k: v for k, v in raw.items() if v != ""}


def validate_config(raw: Mapping[str, Any] | PipelineConfig | None = None) -> PipelineConfig:
    """Check every field and return a normalized config; all problems are reported together."""
    if isinstance(raw, PipelineConfig):
        raw = {
            "corpus_store": raw.corpus_store, "input_pairs": raw.input_pairs, "output": raw.output,
            "checkpoint_dir": raw.checkpoint_dir, "k1": raw.k1, "k2": raw.k2, "threshold": raw.threshold,
            "parallelism": raw.parallelism, "reranker": raw.reranker.kind,
            "reranker_endpoint": raw.reranker.endpoint, "reranker_batch_size": raw.reranker.batch_size,
            "evaluator": raw.evaluator.kind, "evaluator_endpoint": raw.evaluator.endpoint,
            "alpha": raw.evaluator.alpha, "evaluator_batch_size": raw.evaluator.batch_size,
        }
    raw = {k: v for k, v in (raw or {}).items() if v is not None}
    errors: list[str] = []
    known = set(_INT_KEYS + _FLOAT_KEYS + _PATH_KEYS) | {"reranker", "evaluator", "reranker_endpoint", "evaluator_endpoint"}
    for key in sorted(set(raw) - known):
        errors.append(f"unknown config key {key!r}")

    values: dict[str, Any] = {}
    for key in _INT_KEYS:
        if key in raw:
            try:
                values[key] = int(raw[key])
            except (TypeError, ValueError):
                errors.append(f"{key} must be an integer, got {raw[key]!r}")
    for key in _FLOAT_KEYS:
        if key in raw:
            try:
                values[key] = float(raw[key])
            except (TypeError, ValueError):
                errors.append(f"{key} must be a number, got {raw[key]!r}")

    k1 = values.get("k1", 1000)
    k2 = values.get("k2", 25)
    threshold = values.get("threshold", 0.9)
    alpha = values.get("alpha", 0.75)
    parallelism = values.get("parallelism", 1)
    if k1 < 1:
        errors.append("k1 must be a positive integer")
    if k2 < 1:
        errors.append("k2 must be a positive integer")
    if k2 > k1:
        errors.append(f"k2 exceeds k1 ({k2} > {k1})")
    if not 0.0 <= threshold <= 1.0:
        errors.append(f"threshold out of range [0, 1]: {threshold}")
    if not 0.0 <= alpha <= 1.0:
        errors.append(f"alpha out of range [0, 1]: {alpha}")
    if parallelism < 1:
        errors.append("parallelism must be a positive integer")

    rr_kind = str(raw.get("reranker", "lexical"))
    rr_endpoint = str(raw.get("reranker_endpoint", "") or "")
    ev_kind = str(raw.get("evaluator", "proxy"))
    ev_endpoint = str(raw.get("evaluator_endpoint", "") or "")
    if rr_kind not in ("lexical", "external"):
        errors.append(f"reranker must be 'lexical' or 'external', got {rr_kind!r}")
    elif (rr_kind == "external") != bool(rr_endpoint):
        errors.append("reranker endpoint must be set iff reranker is 'external'")
    if ev_kind not in ("proxy", "external"):
        errors.append(f"evaluator must be 'proxy' or 'external', got {ev_kind!r}")
    elif (ev_kind == "external") != bool(ev_endpoint):
        errors.append("evaluator endpoint must be set iff evaluator is 'external'")
    for key in ("reranker_batch_size", "evaluator_batch_size"):
        if values.get(key, 64) < 1:
            errors.append(f"{key} must be a positive integer")

    if errors:
        raise ConfigError(errors)
    paths = {k: Path(raw[k]) for k in _PATH_KEYS if raw.get(k)}
    return PipelineConfig(
        k1=k1,
        k2=k2,
        threshold=threshold,
        reranker=RerankerSpec(rr_kind, rr_endpoint, values.get("reranker_batch_size", 64)),
        evaluator=EvaluatorSpec(ev_kind, ev_endpoint, alpha, threshold, values.get("evaluator_batch_size", 64)),
        parallelism=parallelism,
        **paths,
    )


# --------------------------------------------------------------------------
# Inputs
# --------------------------------------------------------------------------


def qid_sort_key(qid: str):
    return (0, int(qid), "") if qid.isdigit() else (1, 0, qid)


def load_reference_pairs(path) -> dict[str, list[ReferencePair]]:
    """Load (qid, question, reference) input, grouped by qid in canonical order.

    Accepted: jsonl with ``qid``/``question``/``reference``; 3-column TSV
    ``qid, question, reference``; or an interchange AS2 TSV, from which only
    positively labeled answers are taken as references.
    """
    path = Path(path)
    pairs: list[ReferencePair] = []
    with path.open(encoding="utf-8", newline="\n") as fh:
        first = fh.readline()
    if first.lstrip().startswith("{"):
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                try:
                    pairs.append(ReferencePair(str(rec["qid"]), rec["question"], rec["reference"]))
                except (KeyError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad reference pair ({exc})") from exc
    elif len(first.rstrip("\n").split("\t")) == 3:
        with path.open(encoding="utf-8", newline="\n") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cols = line.split("\t")
                if len(cols) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(cols)}")
                pairs.append(ReferencePair(*(unescape_field(c) for c in cols)))
    else:
        for qid, recs in load_as2_tsv(path).items():
            pairs.extend(ReferencePair(qid, r.question, r.answer) for r in recs if r.label == 1)
    grouped: dict[str, list[ReferencePair]] = {}
    for p in pairs:
        grouped.setdefault(p.qid, []).append(p)
    return {q: grouped[q] for q in sorted(grouped, key=qid_sort_key)}


def write_reference_pairs(pairs, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            fh.write("\t".join(escape_field(x) for x in (p.qid, p.question, p.reference)) + "\n")


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class CheckpointStore:
    """Per-question stage results, one JSON file per (stage, qid).

    Each file carries the sha256 of its payload; files that fail the check
    are ignored and the stage is recomputed.
    """

    def __init__(self, root):
        self.root = Path(root)

    def _path(self, stage: str, qid: str) -> Path:
        name = hashlib.sha1(qid.encode()).hexdigest()[:20]
        return self.root / stage / f"{name}.json"

    def save(self, stage: str, qid: str, payload) -> None:
        path = self._path(stage, qid)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"stage": stage, "qid": qid, "digest": _digest(payload), "payload": payload}
        tmp = path.with_suffix(f".tmp{os.getpid()}-{threading.get_ident()}")
        tmp.write_text(json.dumps(doc, separators=(",", ":")), encoding="utf-8")
        os.replace(tmp, path)

    def load(self, stage: str, qid: str):
        path = self._path(stage, qid)
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        if doc.get("qid") != qid or doc.get("digest") != _digest(doc.get("payload")):
            log.warning("ignoring corrupt checkpoint %s", path)
            return None
        return doc["payload"]

    def completed(self, stage: str) -> int:
        d = self.root / stage
        return len(list(d.glob("*.json"))) if d.exists() else 0


# --------------------------------------------------------------------------
# Per-question processing
# --------------------------------------------------------------------------


@dataclass
class QuestionResult:
    qid: str
    status: str  # ok | no_retrieval | failed | interrupted
    retrieved: int = 0
    pooled: int = 0
    selected: int = 0
    labeled: list[LabeledPair] = field(default_factory=list)
    error: str = ""

    def manifest_entry(self) -> dict:
        entry = {
            "qid": self.qid,
            "status": self.status,
            "retrieved": self.retrieved,
            "pooled": self.pooled,
            "selected": self.selected,
            "labeled": len(self.labeled),
            "positive": sum(p.label for p in self.labeled),
        }
        if self.error:
            entry["error"] = self.error
        return entry


class _Runner:
    def __init__(self, cfg: PipelineConfig, store: DocumentStore, index: InvertedIndex,
                 ckpt: CheckpointStore | None, stop_after: str | None):
        self.cfg = cfg
        self.store = store
        self.index = index
        self.ckpt = ckpt
        self.stop_after = stop_after
        self.lexical = LexicalReranker(index.idf)

    def _load(self, stage, qid):
        return self.ckpt.load(stage, qid) if self.ckpt else None

    def _save(self, stage, qid, payload) -> bool:
        """Persist a stage; True when the run should stop at this boundary."""
        if self.ckpt:
            self.ckpt.save(stage, qid, payload)
        return self.stop_after == stage

    def _candidate(self, qid, doc_id, sent_idx, retrieval_score, rerank_score=None) -> Candidate:
        text = self.store.sentence(doc_id, sent_idx).text
        return Candidate(qid, doc_id, sent_idx, text, retrieval_score, rerank_score)

    def __call__(self, item: tuple[str, list[ReferencePair]]) -> QuestionResult:
        qid, pairs = item
        question = pairs[0].question
        res = QuestionResult(qid, "ok")
        try:
            done = self._load("labeled", qid)
            if done is not None:
                res.retrieved, res.pooled = done["retrieved"], done["pooled"]
                res.status = done["status"]
                res.labeled = [LabeledPair(qid, question, self.store.sentence(d, s).text, e, l, d, s)
                               for d, s, e, l in done["pairs"]]
                res.selected = len(res.labeled)
                return res

            selected = self._load("reranked", qid)
            if selected is None:
                pooled = self._load("pooled", qid)
                if pooled is None:
                    retrieved = self._load("retrieved", qid)
                    if retrieved is None:
                        retrieved = [[d, s] for d, s in self.index.retrieve_topk(question, self.cfg.k1)]
                        if self._save("retrieved", qid, retrieved):
                            return replace(res, status="interrupted")
                    res.retrieved = len(retrieved)
                    cands = pool_candidates(qid, [(d, s) for d, s in retrieved], self.store)
                    pooled = {"retrieved": len(retrieved),
                              "candidates": [[c.doc_id, c.sent_idx, c.retrieval_score] for c in cands]}
                    if self._save("pooled", qid, pooled):
                        return replace(res, status="interrupted")
                res.retrieved = pooled["retrieved"]
                cands = [self._candidate(qid, d, s, r) for d, s, r in pooled["candidates"]]
                if self.cfg.reranker.kind == "lexical":
                    scored = self.lexical.rerank(question, cands)
                else:
                    scored = external_rerank(question, cands, self.cfg.reranker)
                top = select_topk2(scored, self.cfg.k2) if scored else []
                selected = {"retrieved": res.retrieved, "pooled": len(cands),
                            "candidates": [[c.doc_id, c.sent_idx, c.retrieval_score, c.rerank_score] for c in top]}
                if self._save("reranked", qid, selected):
                    return replace(res, status="interrupted", pooled=len(cands))
            res.retrieved, res.pooled = selected["retrieved"], selected["pooled"]
            top = [self._candidate(qid, d, s, r, rr) for d, s, r, rr in selected["candidates"]]
            res.selected = len(top)
            res.labeled = label_candidates(pairs, top, self.cfg.evaluator) if top else []
            if res.retrieved == 0:
                res.status = "no_retrieval"
            self._save("labeled", qid, {
                "status": res.status, "retrieved": res.retrieved, "pooled": res.pooled,
                "pairs": [[p.doc_id, p.sent_idx, p.eval_score, p.label] for p in res.labeled],
            })
            return res
        except ScoringError as exc:
            log.error("question %s failed: %s", qid, exc)
            return QuestionResult(qid, "failed", res.retrieved, res.pooled, error=str(exc))


# --------------------------------------------------------------------------
# Driver
# --------------------------------------------------------------------------


@dataclass
class PipelineResult:
    output: Path | None
    manifest_path: Path | None
    stats: DatasetStats
    manifest: dict
    interrupted: bool = False


def manifest_path_for(output) -> Path:
    return Path(str(output) + ".manifest.json")


def run_pipeline(config: PipelineConfig | Mapping[str, Any], *, stop_after: str | None = None) -> PipelineResult:
    """Run every question through the four stages and write output plus manifest.

    ``stop_after`` names a stage at which every question halts after
    checkpointing, leaving a resumable run (used to exercise resume).
    Raises :class:`PipelineError` when more than 10% of questions fail; the
    output and manifest are still written in that case.
    """
    cfg = validate_config(config)
    if stop_after is not None and stop_after not in STAGES:
        raise ValueError(f"stop_after must be one of {STAGES}")
    missing = [k for k in ("corpus_store", "input_pairs", "output") if getattr(cfg, k) is None]
    if missing:
        raise ConfigError([f"{k} is required to run the pipeline" for k in missing])

    store = DocumentStore(cfg.corpus_store)
    try:
        index = load_index(cfg.corpus_store)
    except IndexBuildError as exc:
        raise PipelineError(f"no usable index for {cfg.corpus_store}: {exc}") from exc
    corpus_digest = store.digest()
    if index.store_digest != corpus_digest:
        raise PipelineError(f"index at {cfg.corpus_store} was built from a different store; rebuild it")
    questions = load_reference_pairs(cfg.input_pairs)
    input_digest = _file_digest(cfg.input_pairs)

    run_key = _digest({"params": cfg.scoring_params(), "corpus": corpus_digest, "input": input_digest})[:16]
    ckpt_root = cfg.checkpoint_dir or Path(str(cfg.output) + ".ckpt")
    ckpt = CheckpointStore(Path(ckpt_root) / run_key)
    runner = _Runner(cfg, store, index, ckpt, stop_after)

    items = list(questions.items())
    if cfg.parallelism == 1:
        results = [runner(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(runner, items))

    if stop_after is not None:
        return PipelineResult(None, None, DatasetStats(), {"interrupted_after": stop_after}, interrupted=True)

    pairs = [p for r in results for p in r.labeled]
    output = Path(cfg.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fmt = "jsonl" if output.suffix == ".jsonl" else "tsv"
    emit_labeled_pairs(pairs, output, fmt)
    stats = labeled_pairs_stats(pairs)

    failed = [r.qid for r in results if r.status == "failed"]
    notes = [f"{r.qid}: no retrieval" for r in results if r.status == "no_retrieval"]
    notes += [f"{r.qid}: failed: {r.error}" for r in results if r.status == "failed"]
    status = "failed" if items and len(failed) > MAX_FAILED_FRACTION * len(items) else "ok"
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "status": status,
        "config": cfg.scoring_params(),
        "corpus_digest": corpus_digest,
        "input_digest": input_digest,
        "output_format": fmt,
        "output_digest": _file_digest(output),
        "stage_counts": {
            "questions": len(items),
            "retrieved": sum(r.retrieved for r in results),
            "pooled": sum(r.pooled for r in results),
            "selected": sum(r.selected for r in results),
            "labeled": len(pairs),
        },
        "stats": stats.as_dict(),
        "failed_questions": len(failed),
        "notes": notes,
        "questions": [r.manifest_entry() for r in results],
    }
    mpath = manifest_path_for(output)
    mpath.write_text(json.dumps(manifest, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    if status == "failed":
        raise PipelineError(f"{len(failed)} of {len(items)} questions failed (limit {MAX_FAILED_FRACTION:.0%}); see {mpath}")
    return PipelineResult(output, mpath, stats, manifest)
