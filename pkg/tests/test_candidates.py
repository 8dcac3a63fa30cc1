import json

import pytest
from hypothesis import given, settings, strategies as st

from rws.candidates import (Candidate, LexicalReranker, RerankerSpec, external_rerank, lexical_rerank_score,
                            pool_candidates, select_topk2)
from rws.corpus import ingest_corpus
from rws.index import InvertedIndex, bm25_idf
from rws.scoring import ProtocolError, ServiceUnavailableError


@pytest.fixture
def store(tmp_path):
    docs = [
        "Alpha one. Alpha two. Alpha three.",
        "Beta one. Alpha two.",
        "Gamma one. Gamma two.",
    ]
    src = tmp_path / "c.jsonl"
    src.write_text("".join(json.dumps({"text": t}) + "\n" for t in docs), encoding="utf-8")
    return ingest_corpus(src, tmp_path / "s").store


def test_pool_concatenates(store):
    cands = pool_candidates("q", [(0, 2.0), (2, 1.0)], store)
    assert len(cands) == 5
    assert [(c.doc_id, c.sent_idx) for c in cands] == [(0, 0), (0, 1), (0, 2), (2, 0), (2, 1)]
    assert [c.retrieval_score for c in cands] == [2.0, 2.0, 2.0, 1.0, 1.0]
    assert all(c.rerank_score is None for c in cands)


def test_pool_dedup_keeps_higher_ranked(store):
    cands = pool_candidates("q", [(1, 3.0), (0, 2.0)], store)
    texts = [c.text for c in cands]
    assert texts.count("Alpha two.") == 1
    kept = next(c for c in cands if c.text == "Alpha two.")
    assert (kept.doc_id, kept.sent_idx) == (1, 1)
    assert len(cands) == 4


def test_pool_is_idempotent_and_resolves(store):
    retrieved = [(2, 1.0), (0, 0.5), (1, 0.2)]
    a = pool_candidates("q", retrieved, store)
    assert a == pool_candidates("q", retrieved, store)
    for c in a:
        assert store.sentence(c.doc_id, c.sent_idx).text == c.text


def test_pool_size_on_thousand_doc_shape(planted):
    from rws.corpus import DocumentStore
    store = DocumentStore(planted.store_path)
    retrieved = [(d, 1.0) for d in range(1000)]
    cands = pool_candidates("q", retrieved, store)
    # 1,000 documents with about ten sentences each
    assert 10_000 <= len(cands) <= 11_000


def test_lexical_full_and_empty_coverage():
    idx = InvertedIndex.from_texts(["red apple", "green pear", "red car"])
    assert lexical_rerank_score("red apple", "a very red apple indeed", idx.idf) == 1.0
    assert lexical_rerank_score("red apple", "blue sky", idx.idf) == 0.0
    assert lexical_rerank_score("", "anything", idx.idf) == 0.0
    assert lexical_rerank_score("?!", "anything", idx.idf) == 0.0


def test_lexical_idf_ratio():
    idf = {"a": 2.0, "b": 1.0}.get
    assert lexical_rerank_score("a b", "a", idf) == pytest.approx(2 / 3)


def test_lexical_ratio_with_index_idf():
    texts = ["rare common", "common", "common", "common"]
    idx = InvertedIndex.from_texts(texts)
    w_rare, w_common = bm25_idf(1, 4), bm25_idf(4, 4)
    expected = w_rare / (w_rare + w_common)
    assert lexical_rerank_score("rare common", "rare", idx.idf) == pytest.approx(expected, abs=1e-12)


def test_batch_reranker_matches_function(store):
    idx = InvertedIndex.from_texts([d.text for d in store])
    cands = pool_candidates("q", [(0, 1.0), (1, 1.0), (2, 1.0)], store)
    scored = LexicalReranker(idx.idf).rerank("alpha two", cands)
    for c in scored:
        assert c.rerank_score == lexical_rerank_score("alpha two", c.text, idx.idf)


def mk(score, retr=1.0, doc=0, sent=0):
    return Candidate("q", doc, sent, f"t{doc}-{sent}", retr, score)


def test_select_truncates_and_keeps_best():
    cands = [mk(i / 30, doc=i) for i in range(30)]
    top = select_topk2(cands, 25)
    assert len(top) == 25
    assert {c.doc_id for c in top} == set(range(5, 30))
    assert [c.rerank_score for c in top] == sorted((c.rerank_score for c in top), reverse=True)


def test_select_no_padding():
    cands = [mk(0.1, doc=i) for i in range(10)]
    assert len(select_topk2(cands, 25)) == 10


def test_select_tie_order():
    cands = [mk(0.5, 1.0, 2, 0), mk(0.5, 2.0, 5, 1), mk(0.5, 1.0, 1, 3), mk(0.5, 1.0, 1, 2)]
    top = select_topk2(cands, 10)
    assert [(c.retrieval_score, c.doc_id, c.sent_idx) for c in top] == [(2.0, 5, 1), (1.0, 1, 2), (1.0, 1, 3), (1.0, 2, 0)]


def test_select_requires_scores():
    with pytest.raises(ValueError):
        select_topk2([Candidate("q", 0, 0, "x", 1.0)], 5)


cand_lists = st.lists(
    st.tuples(st.sampled_from([0.0, 0.25, 0.5, 1.0]), st.sampled_from([1.0, 2.0]), st.integers(0, 3), st.integers(0, 3)),
    max_size=30, unique_by=lambda t: (t[2], t[3]),
).map(lambda xs: [mk(s, r, d, i) for s, r, d, i in xs])


@settings(max_examples=200, deadline=None)
@given(cand_lists, st.integers(1, 40))
def test_select_is_maximal_prefix(cands, k2):
    top = select_topk2(cands, k2)
    assert len(top) == min(len(cands), k2)
    chosen = {(c.doc_id, c.sent_idx) for c in top}
    key = lambda c: (-c.rerank_score, -c.retrieval_score, c.doc_id, c.sent_idx)
    worst = max(map(key, top), default=None)
    for c in cands:
        if (c.doc_id, c.sent_idx) not in chosen:
            assert key(c) > worst


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from("abcdef"), max_size=6), st.lists(st.sampled_from("abcdefgh"), max_size=8))
def test_lexical_bounds(qwords, cwords):
    idf = {w: 0.3 + i for i, w in enumerate("abcdefgh")}.get
    s = lexical_rerank_score(" ".join(qwords), " ".join(cwords), idf)
    assert 0.0 <= s <= 1.0
    covers = bool(qwords) and set(qwords) <= set(cwords)
    assert (s == 1.0) == covers


# -- external reranker --------------------------------------------------------

def cands_n(n):
    return [Candidate("q", i, 0, f"sentence {i}", 1.0) for i in range(n)]


def test_external_echo(score_server):
    spec = RerankerSpec("external", score_server.url)
    out = external_rerank("what?", cands_n(5), spec)
    assert [c.rerank_score for c in out] == [0.5] * 5
    body = score_server.requests[0]["payload"]
    assert body == {"question": "what?", "reference": None, "candidates": [f"sentence {i}" for i in range(5)]}


def test_external_clamps(score_server):
    score_server.behavior = lambda p: (200, {"scores": [1.7, -0.2] + [0.3] * (len(p["candidates"]) - 2)})
    out = external_rerank("q", cands_n(3), RerankerSpec("external", score_server.url))
    assert [c.rerank_score for c in out] == [1.0, 0.0, 0.3]


def test_external_batching_preserves_order(score_server):
    score_server.behavior = lambda p: (200, {"scores": [int(t.split()[1]) / 1000 for t in p["candidates"]]})
    out = external_rerank("q", cands_n(130), RerankerSpec("external", score_server.url, batch_size=64))
    assert len(score_server.requests) == 3
    assert sorted(len(r["payload"]["candidates"]) for r in score_server.requests) == [2, 64, 64]
    assert [c.rerank_score for c in out] == [i / 1000 for i in range(130)]


def test_external_malformed_names_batch(score_server):
    score_server.behavior = lambda p: (200, {"scores": [0.1]})
    with pytest.raises(ProtocolError, match="batch 0"):
        external_rerank("q", cands_n(3), RerankerSpec("external", score_server.url))
    score_server.behavior = lambda p: (200, {"scores": ["x"] * len(p["candidates"])})
    with pytest.raises(ProtocolError, match="non-numeric"):
        external_rerank("q", cands_n(3), RerankerSpec("external", score_server.url))
    score_server.behavior = lambda p: (200, b"not json")
    with pytest.raises(ProtocolError, match="not JSON"):
        external_rerank("q", cands_n(3), RerankerSpec("external", score_server.url))


def test_external_retries_then_fails(score_server):
    score_server.behavior = lambda p: (503, {"error": "busy"})
    with pytest.raises(ServiceUnavailableError, match="3 attempts"):
        external_rerank("q", cands_n(2), RerankerSpec("external", score_server.url))
    assert len(score_server.requests) == 3


def test_client_errors_are_not_retried(score_server):
    score_server.behavior = lambda p: (400, {"error": "bad request"})
    with pytest.raises(ServiceUnavailableError, match="rejected"):
        external_rerank("q", cands_n(2), RerankerSpec("external", score_server.url))
    assert len(score_server.requests) == 1


def test_rate_limit_is_retried(score_server):
    score_server.behavior = lambda p: (429, {})
    with pytest.raises(ServiceUnavailableError, match="3 attempts"):
        external_rerank("q", cands_n(2), RerankerSpec("external", score_server.url))
    assert len(score_server.requests) == 3


def test_external_recovers_after_transient_failure(score_server):
    calls = []

    def flaky(p):
        calls.append(1)
        return (500, {}) if len(calls) < 3 else (200, {"scores": [0.9] * len(p["candidates"])})

    score_server.behavior = flaky
    out = external_rerank("q", cands_n(2), RerankerSpec("external", score_server.url))
    assert [c.rerank_score for c in out] == [0.9, 0.9]


def test_auth_token_pass_through(score_server, monkeypatch):
    monkeypatch.setenv("RWS_ENDPOINT_TOKEN", "s3cret")
    external_rerank("q", cands_n(1), RerankerSpec("external", score_server.url))
    assert score_server.requests[0]["headers"]["Authorization"] == "Bearer s3cret"


def test_unreachable_endpoint():
    spec = RerankerSpec("external", "http://127.0.0.1:9/score")
    with pytest.raises(ServiceUnavailableError):
        external_rerank("q", cands_n(1), spec)


def test_reranker_spec_invariants():
    with pytest.raises(ValueError):
        RerankerSpec("external")
    with pytest.raises(ValueError):
        RerankerSpec("lexical", "http://x")
    with pytest.raises(ValueError):
        RerankerSpec("model")
