"""Query-level prediction by pairwise orientation votes.

At prediction time the order of a pair is unknown, so the sign constraint
on the coefficients is dropped: a candidate difference is folded in by
unconstrained least squares and the sign of the coefficient sum decides
which document wins the vote.  Votes across all pairs of a query are
accumulated and the documents are ranked by vote count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConeBasis, normalize_pair
from .data import QueryGroup, standardize
from .errors import InvalidInputError
from .model import ConeModel

# Tiny ridge keeps the normal equations solvable for rank-deficient bases,
# approximating the minimum-norm solution.
_RIDGE = 1e-10


@dataclass
class RankingResult:
    """Documents of one query in predicted order with their vote counts."""

    ordered_doc_indices: np.ndarray
    votes: np.ndarray


def _coef_sums(basis: ConeBasis, Z: np.ndarray) -> np.ndarray:
    """Coefficient sums of the unconstrained fold-in for columns of Z."""
    G = basis.U.T @ basis.U + _RIDGE * np.eye(basis.K)
    W = np.linalg.solve(G, basis.U.T @ Z)
    return W.sum(axis=0)


def predict_pair(basis: ConeBasis, z) -> int:
    """Orientation of a normalized candidate difference: +1 keeps it, -1 flips.

    A coefficient sum of exactly zero counts as +1, favoring the presented
    order.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (basis.N,):
        raise InvalidInputError(f"expected a length-{basis.N} vector, got shape {z.shape}")
    s = _coef_sums(basis, z[:, None])[0]
    return 1 if s >= 0.0 else -1


def rank_query(basis: ConeBasis, features: np.ndarray, alpha: float, rho: float) -> RankingResult:
    """Rank one query's documents by pairwise votes.

    Every unordered pair {l, m} with l < m is evaluated once in canonical
    orientation x_l - x_m; a +1 vote goes to l, otherwise to m.  Ties in
    vote count break toward the lower document index.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidInputError("need a nonempty (docs, N) feature matrix")
    if X.shape[1] != basis.N:
        raise InvalidInputError(f"feature dimension {X.shape[1]} != basis dimension {basis.N}")
    n = X.shape[0]
    votes = np.zeros(n, dtype=np.int64)
    if n > 1:
        pairs = [(l, m) for l in range(n) for m in range(l + 1, n)]
        Z = np.stack(
            [normalize_pair(X[l] - X[m], alpha, rho) for l, m in pairs], axis=1
        )
        sums = _coef_sums(basis, Z)
        for (l, m), s in zip(pairs, sums):
            if s >= 0.0:
                votes[l] += 1
            else:
                votes[m] += 1
    order = np.lexsort((np.arange(n), -votes))
    return RankingResult(ordered_doc_indices=order, votes=votes)


def rank_dataset(model: ConeModel, dataset: Sequence[QueryGroup]) -> dict[str, RankingResult]:
    """Standardize with the model's statistics and rank every query."""
    standardized, _ = standardize(dataset, model.stats)
    return {
        g.query_id: rank_query(model.basis, g.features, model.hyper.alpha, model.hyper.rho)
        for g in standardized
    }
