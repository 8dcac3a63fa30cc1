"""Synthetic corpora for tests and demos.

:func:`make_planted_fixture` builds a corpus in which a reordering of each
question's reference answer is hidden in one document, together with
distractor sentences that share no token with any reference. The plant is a
token permutation of the reference plus the question's content words, so the
proxy evaluator scores it at 0.9167 with default settings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gl", "kr", "pl", "st", "tr"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou"]
_CODAS = ["", "", "n", "r", "s", "l", "x"]

FUNCTION_WORDS = ["the", "was", "in", "by", "and", "of", "to", "with", "for", "near", "after", "from"]
REFERENCE_FUNCTION_WORDS = {"the", "was", "in", "by"}


def pseudo_words(n: int, rng: np.random.Generator, min_syl: int = 2, max_syl: int = 4) -> list[str]:
    """``n`` distinct pronounceable lowercase words."""
    out: list[str] = []
    seen = set(FUNCTION_WORDS) | {"when"}
    while len(out) < n:
        k = int(rng.integers(min_syl, max_syl + 1))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(k))
        w += _CODAS[rng.integers(len(_CODAS))]
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def _sentence(words: list[str]) -> str:
    s = " ".join(words)
    return s[0].upper() + s[1:] + "."


@dataclass
class PlantedQuestion:
    qid: str
    question: str
    reference: str
    plant: str
    host_doc: int
    distractors: list[str]


@dataclass
class PlantedFixture:
    corpus_path: Path
    pairs_path: Path
    questions: list[PlantedQuestion]

    @property
    def plants(self) -> dict[str, str]:
        return {q.qid: q.plant for q in self.questions}

    @property
    def distractors(self) -> list[tuple[str, str]]:
        return [(q.qid, d) for q in self.questions for d in q.distractors]


def make_planted_fixture(root, n_questions: int = 50, n_docs: int = 1000, sents_per_doc: int = 10,
                         distractors_per_question: int = 10, seed: int = 13) -> PlantedFixture:
    """Write ``corpus.jsonl`` and ``pairs.jsonl`` under ``root``."""
    if n_docs < n_questions:
        raise ValueError("need at least one host document per question")
    rng = np.random.default_rng(seed)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    pool = pseudo_words(5 * n_questions + 400, rng)
    unique, filler = pool[: 5 * n_questions], pool[5 * n_questions:]
    distractor_vocab = filler  # function words excluded, so token-disjoint from references

    docs: list[list[str]] = []
    for _ in range(n_docs):
        sents = []
        for _ in range(sents_per_doc):
            words = list(rng.choice(filler, size=int(rng.integers(5, 10))))
            fw = rng.choice(FUNCTION_WORDS, size=2, replace=False)
            words.insert(int(rng.integers(1, len(words))), fw[0])
            words.insert(int(rng.integers(1, len(words))), fw[1])
            sents.append(_sentence(words))
        docs.append(sents)

    hosts = rng.choice(n_docs, size=n_questions, replace=False)
    questions = []
    for i in range(n_questions):
        a, b, v, z, w = unique[5 * i: 5 * i + 5]
        question = f"When was the {a} {b} {v}?"
        reference = f"The {a} {b} was {v} by {z} in {w}."
        plant = f"By {z} in {w} the {a} {b} was {v}."
        host = int(hosts[i])
        docs[host].insert(int(rng.integers(0, len(docs[host]) + 1)), plant)

        # lexical near-misses elsewhere in the corpus
        for _ in range(3):
            d = int(rng.integers(n_docs))
            extra = list(rng.choice(filler, size=3))
            docs[d].insert(int(rng.integers(0, len(docs[d]) + 1)), _sentence([a, b] + extra))

        distractors = []
        for _ in range(distractors_per_question):
            words = ["when"] + list(rng.choice(distractor_vocab, size=int(rng.integers(4, 8))))
            text = _sentence(words)
            distractors.append(text)
            d = host if rng.random() < 0.5 else int(rng.integers(n_docs))
            docs[d].insert(int(rng.integers(0, len(docs[d]) + 1)), text)
        questions.append(PlantedQuestion(f"{i:03d}", question, reference, plant, host, distractors))

    corpus_path = root / "corpus.jsonl"
    with corpus_path.open("w", encoding="utf-8") as fh:
        for i, sents in enumerate(docs):
            fh.write(json.dumps({"url": f"synthetic://doc/{i}", "text": " ".join(sents)}) + "\n")
    pairs_path = root / "pairs.jsonl"
    with pairs_path.open("w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps({"qid": q.qid, "question": q.question, "reference": q.reference}) + "\n")
    return PlantedFixture(corpus_path, pairs_path, questions)


def synthetic_texts(n_docs: int, vocab_size: int = 2000, seed: int = 0, min_len: int = 20, max_len: int = 120) -> list[str]:
    """Zipf-distributed pseudo-word documents for retrieval benchmarks."""
    rng = np.random.default_rng(seed)
    vocab = np.array(pseudo_words(vocab_size, rng, 1, 3))
    weights = 1.0 / np.arange(1, vocab_size + 1)
    weights /= weights.sum()
    texts = []
    for _ in range(n_docs):
        n = int(rng.integers(min_len, max_len + 1))
        texts.append(" ".join(rng.choice(vocab, size=n, p=weights)))
    return texts


def write_jsonl_corpus(texts, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for i, t in enumerate(texts):
            fh.write(json.dumps({"url": f"synthetic://doc/{i}", "text": t}) + "\n")
    return path
