"""Answer-matching and caption-similarity metrics.

All corpus metrics take ``candidates[i]`` paired with ``references[i]``, a
non-empty list of reference strings. Tokenization is shared: lowercase,
punctuation stripped, whitespace split.
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from functools import lru_cache
from typing import Sequence

from nltk.stem.porter import PorterStemmer

from ..errors import EmptyCorpus, LengthMismatch

BLEU_EPS = 1e-9
ROUGE_BETA = 1.2
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5
CIDER_SCALE = 10.0
MAX_N = 4

_PUNCT = re.compile(f"[{re.escape(string.punctuation)}]")
_LEADING_ARTICLE = re.compile(r"^(?:a|an|the)\s+")
_stemmer = PorterStemmer()


def normalize_answer(text: str) -> str:
    text = _PUNCT.sub(" ", text.lower())
    text = " ".join(text.split())
    return _LEADING_ARTICLE.sub("", text)


def tokenize(text: str) -> list[str]:
    return _PUNCT.sub(" ", text.lower()).split()


@lru_cache(maxsize=65536)
def stem(token: str) -> str:
    return _stemmer.stem(token)


def exact_match(pred: str, gt: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gt))


def em_refined(pred: str, gt: str) -> int:
    """Exact match, or the normalized answer appears as a whole-word span of the prediction."""
    p, g = normalize_answer(pred), normalize_answer(gt)
    if p == g:
        return 1
    return int(bool(g) and f" {g} " in f" {p} ")


def _check(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> None:
    if not candidates:
        raise EmptyCorpus("no candidates")
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} reference sets")
    for i, refs in enumerate(references):
        if not refs:
            raise EmptyCorpus(f"candidate {i} has no references")


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------------------
# BLEU-4
# ---------------------------------------------------------------------------


def bleu4(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Corpus BLEU with uniform weights up to 4-grams and a brevity penalty.

    A zero match count for some order contributes ``BLEU_EPS`` in place of
    zero so the geometric mean stays defined.
    """
    _check(candidates, references)
    matches = [0] * MAX_N
    totals = [0] * MAX_N
    cand_len = ref_len = 0
    for cand, refs in zip(candidates, references):
        c = tokenize(cand)
        rs = [tokenize(r) for r in refs]
        cand_len += len(c)
        ref_len += min((abs(len(r) - len(c)), len(r)) for r in rs)[1]
        for n in range(1, MAX_N + 1):
            counts = ngrams(c, n)
            max_ref: Counter = Counter()
            for r in rs:
                max_ref |= ngrams(r, n)
            matches[n - 1] += sum(min(cnt, max_ref[g]) for g, cnt in counts.items())
            totals[n - 1] += max(len(c) - n + 1, 0)
    if cand_len == 0:
        return 0.0
    log_p = 0.0
    for m, t in zip(matches, totals):
        p = m / t if m > 0 else BLEU_EPS / max(t, 1)
        log_p += math.log(p) / MAX_N
    bp = 1.0 if cand_len > ref_len else math.exp(1 - ref_len / cand_len)
    return bp * math.exp(log_p)


# ---------------------------------------------------------------------------
# ROUGE-L
# ---------------------------------------------------------------------------


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_sentence(cand: str, refs: Sequence[str], beta: float = ROUGE_BETA) -> float:
    c = tokenize(cand)
    if not c:
        return 0.0
    precs, recs = [], []
    for ref in refs:
        r = tokenize(ref)
        if not r:
            continue
        lcs = lcs_length(c, r)
        precs.append(lcs / len(c))
        recs.append(lcs / len(r))
    if not precs:
        return 0.0
    p, r = max(precs), max(recs)
    if p == 0 or r == 0:
        return 0.0
    return (1 + beta**2) * p * r / (r + beta**2 * p)


def rouge_l(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    _check(candidates, references)
    return sum(rouge_l_sentence(c, r) for c, r in zip(candidates, references)) / len(candidates)


# ---------------------------------------------------------------------------
# METEOR (exact + stem matching, no synonyms)
# ---------------------------------------------------------------------------


def _align(c: Sequence[str], r: Sequence[str]) -> list[tuple[int, int]]:
    """Unigram alignment: exact matches first, then Porter-stem matches.

    Each candidate token takes, in order, the free reference position that
    continues the previous alignment if possible, else the leftmost one.
    """
    matched: dict[int, int] = {}
    used: set[int] = set()
    for key in (lambda t: t, stem):
        rk = [key(t) for t in r]
        prev = -2
        for i, tok in enumerate(c):
            if i in matched:
                prev = matched[i]
                continue
            k = key(tok)
            free = [j for j, t in enumerate(rk) if t == k and j not in used]
            if not free:
                continue
            j = prev + 1 if prev + 1 in free else free[0]
            matched[i] = j
            used.add(j)
            prev = j
    return sorted(matched.items())


def _chunks(alignment: Sequence[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_sentence(cand: str, refs: Sequence[str]) -> float:
    c = tokenize(cand)
    best = 0.0
    for ref in refs:
        r = tokenize(ref)
        if not c or not r:
            continue
        alignment = _align(c, r)
        m = len(alignment)
        if m == 0:
            continue
        p, rec = m / len(c), m / len(r)
        fmean = p * rec / (METEOR_ALPHA * p + (1 - METEOR_ALPHA) * rec)
        penalty = METEOR_GAMMA * (_chunks(alignment) / m) ** METEOR_BETA
        best = max(best, fmean * (1 - penalty))
    return best


def meteor_simplified(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    _check(candidates, references)
    return sum(meteor_sentence(c, r) for c, r in zip(candidates, references)) / len(candidates)


# ---------------------------------------------------------------------------
# CIDEr
# ---------------------------------------------------------------------------


def _tfidf(counts: Counter, df: Counter, log_n: float) -> dict[tuple, float]:
    return {g: tf * (log_n - math.log(max(1.0, df[g]))) for g, tf in counts.items()}


def _cos(a: dict, b: dict) -> float:
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    return sum(v * b.get(g, 0.0) for g, v in a.items()) / (na * nb)


def cider_per_sentence(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> list[float]:
    """Per-candidate CIDEr on a 0-10 scale.

    Document frequencies are counted over reference sets of the whole
    corpus; each order n in 1..4 contributes the mean tf-idf cosine against
    the references, and the orders are averaged.
    """
    _check(candidates, references)
    cand_tok = [tokenize(c) for c in candidates]
    ref_tok = [[tokenize(r) for r in refs] for refs in references]
    log_n = math.log(float(len(candidates)))
    scores = [0.0] * len(candidates)
    for n in range(1, MAX_N + 1):
        df: Counter = Counter()
        for refs in ref_tok:
            df.update(set().union(*(ngrams(r, n) for r in refs)))
        for i, (c, refs) in enumerate(zip(cand_tok, ref_tok)):
            vc = _tfidf(ngrams(c, n), df, log_n)
            sims = [_cos(vc, _tfidf(ngrams(r, n), df, log_n)) for r in refs]
            scores[i] += sum(sims) / len(sims) / MAX_N
    return [CIDER_SCALE * s for s in scores]


def cider(candidates: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    per = cider_per_sentence(candidates, references)
    return sum(per) / len(per)
