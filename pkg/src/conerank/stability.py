"""Leave-one-query-out stability measurement.

Retrains the model once per held-out query (same seed, deterministic
full-batch mode with the exact inner solver, so only the data changes) and
measures how much any single pair's unweighted loss moves.  The observed
maximum is compared against the closed-form bound

    beta <= 2 * s_max * lambda_u * (rho + sqrt(K) * c * lambda_u)
           + s_max^2 * lambda_u^2

where s_max is the largest spectral norm of a basis difference.  The
high-probability risk bound derived from these quantities is reported for
reference but never asserted: it is a statement about random training sets,
not about one draw.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import log, sqrt
from typing import Sequence

import numpy as np

from .core import simplex_least_squares
from .data import QueryGroup, generate_all_pairs, standardize
from .errors import InvalidInputError
from .solver import TrainConfig, train_on_pairs

_POWER_SEED = 0


def spectral_norm(M, tol: float = 1e-10, max_iters: int = 10_000) -> float:
    """Largest singular value by power iteration on M^T M.

    Deterministic: the start vector comes from a fixed-seed generator.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix contains non-finite entries")
    if not M.any():
        return 0.0
    A = M.T @ M
    v = np.random.default_rng(_POWER_SEED).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iters):
        u = A @ v
        lam = np.linalg.norm(u)
        if lam == 0.0:
            return 0.0
        v = u / lam
        new_est = sqrt(lam)
        if abs(new_est - est) <= tol * max(new_est, 1e-300):
            return new_est
        est = new_est
    return est


def stability_bound(s_max: float, rho: float, c: float, K: int, lambda_u: float = 1.0) -> float:
    """Closed-form stability bound from the largest basis shift."""
    return 2.0 * s_max * lambda_u * (rho + sqrt(K) * c * lambda_u) + (s_max * lambda_u) ** 2


def generalization_bound(
    risk: float, beta: float, gamma: float, P: int, epsilon: float
) -> float:
    """High-probability bound on the expected risk (reporting only)."""
    if not 0.0 < epsilon <= 1.0:
        raise InvalidInputError(f"epsilon must be in (0, 1], got {epsilon}")
    return risk + 2.0 * beta + (4.0 * P * beta + gamma) * sqrt(log(1.0 / epsilon) / (2.0 * P))


@dataclass
class FoldResult:
    index: int
    query_id: str
    basis_shift: float  # spectral norm of U - U^{-i}
    max_loss_deviation: float


@dataclass
class StabilityReport:
    beta_hat: float
    s_max: float
    bound: float
    gamma_hat: float
    holds: bool
    per_fold: list
    risk_full: float
    epsilon: float
    generalization_rhs: float


def _pair_losses(U: np.ndarray, Z: np.ndarray) -> np.ndarray:
    W = simplex_least_squares(U, Z)
    return ((Z - U @ W) ** 2).sum(axis=0)


def loqo_experiment(
    dataset: Sequence[QueryGroup], config: TrainConfig, epsilon: float = 0.05
) -> StabilityReport:
    """Measure leave-one-query-out stability of training on this dataset.

    beta_hat is the maximum, over folds and over every pair in the dataset,
    of the absolute change in unweighted pair loss; it lower-bounds the
    true supremum, while the reported bound upper-bounds it, so the check
    is conservative on both sides.  Standardization statistics and the
    basis initialization are shared across folds to isolate the effect of
    the removed query.
    """
    standardized, _ = standardize(dataset)
    hyper = config.hyper
    groups = generate_all_pairs(standardized, hyper.alpha, hyper.rho)
    usable = [(g, q.query_id) for g, q in zip(groups, standardized) if len(g) > 0]
    P = len(usable)
    if P < 2:
        raise InvalidInputError(f"need at least 2 queries with pairs, got {P}")
    pair_groups = [g for g, _ in usable]
    n_features = standardized[0].features.shape[1]
    cfg = replace(config, full_batch=True)

    full_basis, _ = train_on_pairs(pair_groups, n_features, cfg)
    Z = np.concatenate([np.stack([s.z for s in g], axis=1) for g in pair_groups], axis=1)
    base_losses = _pair_losses(full_basis.U, Z)
    # unweighted risk, matching the unweighted losses the bound is stated for
    offsets = np.cumsum([0] + [len(g) for g in pair_groups])
    risk_full = float(
        np.mean([base_losses[a:b].mean() for a, b in zip(offsets[:-1], offsets[1:])])
    )

    per_fold = []
    for i, (_, qid) in enumerate(usable):
        held_out = pair_groups[:i] + pair_groups[i + 1 :]
        fold_basis, _ = train_on_pairs(held_out, n_features, cfg)
        fold_losses = _pair_losses(fold_basis.U, Z)
        deviation = float(np.abs(base_losses - fold_losses).max())
        shift = spectral_norm(full_basis.U - fold_basis.U)
        per_fold.append(FoldResult(i, qid, shift, deviation))

    beta_hat = max(f.max_loss_deviation for f in per_fold)
    s_max = max(f.basis_shift for f in per_fold)
    bound = stability_bound(s_max, hyper.rho, hyper.c, hyper.K, hyper.lambda_u)
    gamma_hat = float(base_losses.max())
    rhs = generalization_bound(risk_full, beta_hat, gamma_hat, P, epsilon)
    return StabilityReport(
        beta_hat=beta_hat,
        s_max=s_max,
        bound=bound,
        gamma_hat=gamma_hat,
        holds=bool(beta_hat <= bound),
        per_fold=per_fold,
        risk_full=risk_full,
        epsilon=epsilon,
        generalization_rhs=rhs,
    )
