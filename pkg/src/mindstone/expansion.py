"""Ranker-gated query expansion (neural RM3).

The expanded query is ``alpha * q + (1 - alpha) * sum v(d)`` over the
feedback documents whose ranker score is strictly positive, where ``v(d)``
is the TF-IDF vector of the document's top-T most frequent terms.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .corpus import tokenize
from .index import InvertedIndex, QueryVector


@dataclass(frozen=True)
class ExpansionParams:
    alpha: float = 0.5
    top_terms: int = 20
    second_pass_n: int | None = None  # None -> same depth as the first pass

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.top_terms < 0:
            raise ValueError(f"top_terms must be >= 0, got {self.top_terms}")
        if self.second_pass_n is not None and self.second_pass_n < 0:
            raise ValueError("second_pass_n must be >= 0")


def question_vector(index: InvertedIndex, question: str) -> QueryVector:
    """The original question as a TF-IDF vector, in the same space as the
    per-document feedback vectors."""
    counts = Counter(tokenize(question, index.stopwords))
    return QueryVector({t: c * index.idf(t) for t, c in counts.items()})


def expand_query(q: QueryVector, ranked: list[tuple[str, float]],
                 index: InvertedIndex, params: ExpansionParams) -> QueryVector:
    """Mix the question vector with feedback from positively-ranked docs.

    Documents with ranker score <= 0 never contribute; terms whose mixed
    weight is exactly 0 are dropped; ``q`` is left untouched.
    """
    alpha = params.alpha
    mixed: dict[str, float] = {t: alpha * w for t, w in q.weights.items()}
    if alpha < 1.0:
        feedback_scale = 1.0 - alpha
        for para_id, score in ranked:
            if score <= 0.0:
                continue
            doc_vec = index.doc_tfidf_top(para_id, params.top_terms)
            for term, weight in doc_vec.weights.items():
                mixed[term] = mixed.get(term, 0.0) + feedback_scale * weight
    return QueryVector({t: w for t, w in mixed.items() if w != 0.0})
