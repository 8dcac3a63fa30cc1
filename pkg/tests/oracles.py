"""Independent reference computations used to freeze expected values."""

import math
from collections import Counter
from itertools import permutations

from rws.index import tokenize


def brute_postings(texts):
    out = {}
    for doc_id, text in enumerate(texts):
        for term, tf in Counter(tokenize(text)).items():
            out.setdefault(term, []).append((doc_id, tf))
    return out


def brute_bm25_all(texts, query, k1=1.2, b=0.75):
    """Score every document from raw token counts; no index involved."""
    counts = [Counter(tokenize(t)) for t in texts]
    lens = [sum(c.values()) for c in counts]
    n = len(texts)
    avg = sum(lens) / n
    q = tokenize(query)
    df = {term: sum(1 for c in counts if term in c) for term in q}
    scores = []
    for c, dl in zip(counts, lens):
        s = 0.0
        for term in q:
            tf = c.get(term, 0)
            if tf == 0:
                continue
            idf = math.log(1.0 + (n - df[term] + 0.5) / (df[term] + 0.5))
            s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avg))
        scores.append(s)
    return scores


def brute_topk(texts, query, k):
    scores = brute_bm25_all(texts, query)
    ranked = sorted((d for d, s in enumerate(scores) if s > 0), key=lambda d: (-scores[d], d))
    return [(d, scores[d]) for d in ranked[:k]]


def ap_by_definition(labels):
    """Average precision from prefix precisions at each relevant rank."""
    rel = [i for i, l in enumerate(labels) if l]
    if not rel:
        return None
    precs = [sum(labels[: i + 1]) / (i + 1) for i in rel]
    return sum(precs) / len(precs)


def rr_by_definition(labels):
    for i, l in enumerate(labels):
        if l:
            return 1 / (i + 1)
    return None


def ap_extremes(labels):
    """(min, max) AP over every ordering of the labels."""
    vals = {ap_by_definition(list(p)) for p in set(permutations(labels))}
    return min(vals), max(vals)


def token_f1_oracle(a, b):
    ta, tb = tokenize(a), tokenize(b)
    if not ta or not tb:
        return 0.0
    remaining = list(ta)
    common = 0
    for t in tb:
        if t in remaining:
            remaining.remove(t)
            common += 1
    if common == 0:
        return 0.0
    p, r = common / len(tb), common / len(ta)
    return 2 * p * r / (p + r)
