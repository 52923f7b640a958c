"""Ranking quality metrics: average precision and NDCG.

Conventions: a document is relevant iff its label is positive; NDCG uses
gain 2^rel - 1 with discount 1/log2(position + 1); a query with no relevant
document scores 0 on both metrics and still counts in the means.  The
summary "mean NDCG" is the average of NDCG@1 through NDCG@10.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import QueryGroup
from .errors import InvalidInputError

MEAN_NDCG_CUTOFFS = tuple(range(1, 11))


@dataclass
class QueryEval:
    query_id: str
    average_precision: float
    ndcg_at: dict
    mean_ndcg: float


@dataclass
class EvalReport:
    map: float
    ndcg_at: dict
    mean_ndcg: float
    per_query: list


def average_precision(ranked_relevances: Sequence[int]) -> float:
    """AP of a ranked label list; 0.0 when nothing is relevant."""
    rels = np.asarray(ranked_relevances)
    if rels.size == 0:
        raise InvalidInputError("empty ranking")
    hits = rels > 0
    if not hits.any():
        return 0.0
    precisions = np.cumsum(hits) / np.arange(1, rels.size + 1)
    return float(precisions[hits].mean())


def dcg_at_k(ranked_relevances: Sequence[int], k: int) -> float:
    rels = np.asarray(ranked_relevances, dtype=np.float64)[: max(k, 0)]
    if rels.size == 0:
        return 0.0
    discounts = np.log2(np.arange(2, rels.size + 2))
    return float(((2.0**rels - 1.0) / discounts).sum())


def ndcg_at_k(ranked_relevances: Sequence[int], k: int) -> float:
    """NDCG at cutoff k; 0.0 when the ideal DCG is zero."""
    if k < 1:
        raise InvalidInputError(f"cutoff must be >= 1, got {k}")
    ideal = sorted(ranked_relevances, reverse=True)
    idcg = dcg_at_k(ideal, k)
    if idcg == 0.0:
        return 0.0
    return dcg_at_k(ranked_relevances, k) / idcg


def evaluate(
    rankings: Mapping[str, Sequence[int]],
    dataset: Sequence[QueryGroup],
    cutoffs: Sequence[int] = MEAN_NDCG_CUTOFFS,
) -> EvalReport:
    """Score predicted rankings against labeled queries.

    ``rankings`` maps query id to a permutation of that query's document
    indices (best first) and must cover every query in the dataset.
    """
    cutoffs = tuple(cutoffs) if cutoffs else MEAN_NDCG_CUTOFFS
    if any(k < 1 for k in cutoffs):
        raise InvalidInputError("cutoffs must be >= 1")
    per_query = []
    ap_values = []
    ndcg_values = {k: [] for k in cutoffs}
    mean_ndcg_values = []
    for group in dataset:
        if group.query_id not in rankings:
            raise InvalidInputError(f"no ranking supplied for query {group.query_id}")
        order = np.asarray(rankings[group.query_id])
        if sorted(order.tolist()) != list(range(group.n_docs)):
            raise InvalidInputError(
                f"ranking for query {group.query_id} is not a permutation of its documents"
            )
        ranked = group.relevances[order]
        ap = average_precision(ranked)
        ndcgs = {k: ndcg_at_k(ranked, k) for k in cutoffs}
        ap_values.append(ap)
        for k in cutoffs:
            ndcg_values[k].append(ndcgs[k])
        q_mean = float(np.mean([ndcg_at_k(ranked, k) for k in MEAN_NDCG_CUTOFFS]))
        mean_ndcg_values.append(q_mean)
        per_query.append(QueryEval(group.query_id, ap, ndcgs, q_mean))
    if not per_query:
        raise InvalidInputError("empty dataset")
    return EvalReport(
        map=float(np.mean(ap_values)),
        ndcg_at={k: float(np.mean(ndcg_values[k])) for k in cutoffs},
        mean_ndcg=float(np.mean(mean_ndcg_values)),
        per_query=per_query,
    )
