"""Script tokenisation and TF-IDF keyword vectors."""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import InvalidArgument

# ECMAScript 2015 keywords plus literal names.
RESERVED_WORDS = frozenset(
    """
    break case catch class const continue debugger default delete do else
    export extends finally for function if import in instanceof let new
    return static super switch this throw try typeof var void while with
    yield true false null undefined
    """.split()
)

_TOKEN = re.compile(r"[A-Za-z0-9_$]+")
_HAS_LETTER = re.compile(r"[A-Za-z]")


@dataclass(frozen=True)
class TokenBag:
    script_id: str
    counts: Mapping[str, int]
    total_terms: int


@dataclass(frozen=True)
class KeywordVector:
    script_id: str
    weights: Mapping[str, float]
    norm: float


@dataclass(frozen=True)
class VocabularyStats:
    n_docs: int
    doc_freq: Mapping[str, int]


def iter_terms(text: str) -> Iterable[str]:
    for match in _TOKEN.finditer(text):
        token = match.group()
        if token not in RESERVED_WORDS and _HAS_LETTER.search(token):
            yield token


def tokenize(content: bytes | str, script_id: str = "") -> TokenBag:
    if isinstance(content, bytes):
        content = content.decode("utf-8", errors="replace")
    counts = Counter(iter_terms(content))
    return TokenBag(script_id, dict(counts), sum(counts.values()))


def build_vocabulary(bags: Iterable[TokenBag]) -> VocabularyStats:
    doc_freq: Counter[str] = Counter()
    n_docs = 0
    for bag in bags:
        n_docs += 1
        doc_freq.update(bag.counts.keys())
    if n_docs == 0:
        raise InvalidArgument("build_vocabulary needs at least one token bag")
    return VocabularyStats(n_docs, dict(doc_freq))


def idf(term: str, stats: VocabularyStats) -> float:
    df = stats.doc_freq.get(term)
    if df is None:
        raise InvalidArgument(f"term {term!r} is not in the vocabulary")
    return math.log((1 + stats.n_docs) / (1 + df)) + 1.0


def tfidf_vector(bag: TokenBag, stats: VocabularyStats) -> KeywordVector:
    """Weight each term by relative frequency times smoothed idf."""
    if bag.total_terms == 0:
        return KeywordVector(bag.script_id, {}, 0.0)
    total = bag.total_terms
    weights = {t: (c / total) * idf(t, stats) for t, c in bag.counts.items()}
    norm = math.sqrt(math.fsum(w * w for w in weights.values()))
    return KeywordVector(bag.script_id, weights, norm)


def cosine_similarity(u: KeywordVector, v: KeywordVector) -> float:
    if u.norm == 0.0 or v.norm == 0.0:
        return 0.0
    a, b = (u.weights, v.weights) if len(u.weights) <= len(v.weights) else (v.weights, u.weights)
    dot = math.fsum(w * b[t] for t, w in a.items() if t in b)
    if dot == 0.0:
        return 0.0
    # Clamp rounding spill above 1 for identical vectors.
    return min(1.0, dot / (u.norm * v.norm))
