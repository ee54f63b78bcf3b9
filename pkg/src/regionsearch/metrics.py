"""Retrieval and answer-quality metrics.

Recall@k and nDCG@k use binary relevance.  The relaxed answer match
treats two numeric strings as equal when the prediction is within 5% of
the gold value, and otherwise falls back to normalized string equality.

The numeric grammar is deliberately narrow and documented here, since any
looser parser would silently change the metric: after trimming whitespace,
stripping one trailing ``%`` and removing comma thousands separators, a
value must match ``[+-]? (digits [. digits?] | . digits) [eE exponent]``.
NaN and infinity spellings do not parse and fall back to string equality.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .exceptions import DuplicateDocId, ValidationFailure

__all__ = [
    "QueryJudgment",
    "recall_at_k",
    "ndcg_at_k",
    "relaxed_exact_match",
]

_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class QueryJudgment:
    """Ground-truth relevant documents for one query."""

    query_id: str
    relevant_doc_ids: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "relevant_doc_ids", frozenset(self.relevant_doc_ids))
        if not self.relevant_doc_ids:
            raise ValidationFailure(f"judgment for {self.query_id!r} has no relevant docs")


def _check_ranked(ranked: list[str]) -> None:
    if len(set(ranked)) != len(ranked):
        seen, dup = set(), None
        for doc in ranked:
            if doc in seen:
                dup = doc
                break
            seen.add(doc)
        raise DuplicateDocId(f"ranked list repeats document {dup!r}")


def recall_at_k(ranked: list[str], judg: QueryJudgment, k: int) -> float:
    """Fraction of the relevant documents present in the top k."""
    if k < 1:
        raise ValidationFailure(f"k must be >= 1, got {k}")
    _check_ranked(ranked)
    hits = sum(1 for doc in ranked[:k] if doc in judg.relevant_doc_ids)
    return hits / len(judg.relevant_doc_ids)


def ndcg_at_k(ranked: list[str], judg: QueryJudgment, k: int) -> float:
    """Binary-gain nDCG truncated at k.

    Gain at 1-based rank i is ``1 / log2(i + 1)`` for a relevant document;
    the ideal DCG packs all relevant documents at the top, truncated at k.
    """
    if k < 1:
        raise ValidationFailure(f"k must be >= 1, got {k}")
    _check_ranked(ranked)
    dcg = 0.0
    for i, doc in enumerate(ranked[:k], start=1):
        if doc in judg.relevant_doc_ids:
            dcg += 1.0 / math.log2(i + 1)
    ideal = sum(1.0 / math.log2(i + 1)
                for i in range(1, min(k, len(judg.relevant_doc_ids)) + 1))
    return dcg / ideal


def _parse_number(text: str) -> float | None:
    cleaned = text.strip()
    if cleaned.endswith("%"):
        cleaned = cleaned[:-1].strip()
    cleaned = cleaned.replace(",", "")
    if not _NUMBER_RE.match(cleaned):
        return None
    value = float(cleaned)
    return value if math.isfinite(value) else None


def _normalize(text: str) -> str:
    collapsed = " ".join(text.split())
    if collapsed.endswith("."):
        collapsed = collapsed[:-1]
    return collapsed.casefold()


def relaxed_exact_match(pred: str, gold: str) -> bool:
    """Answer match with a 5% margin for numeric responses.

    When both strings parse as finite numbers, the prediction passes iff
    ``|pred - gold| <= 0.05 * |gold|`` (a gold of zero demands an exact
    zero).  The margin is relative to gold, so the numeric branch is
    intentionally asymmetric.  Otherwise the strings must be equal after
    trimming, whitespace collapsing, case folding and dropping a trailing
    period.
    """
    p = _parse_number(pred)
    g = _parse_number(gold)
    if p is not None and g is not None:
        if g == 0.0:
            return p == 0.0
        return abs(p - g) <= 0.05 * abs(g)
    return _normalize(pred) == _normalize(gold)
