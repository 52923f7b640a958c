"""Domain types and the mathematical primitives of cone-based pair ranking.

A ranking model is a set of K basis vectors (columns of U) spanning a
polyhedral cone: the set of nonnegative combinations U @ w, w >= 0.  An
ordered document-pair difference z is scored by how close it sits to the
unit-coefficient slice of that cone, i.e. by the constrained least squares

    min_w ||z - U w||^2   s.t.  w >= 0, sum(w) = 1.

Coefficient vectors w are plain float arrays; all operations here are pure
functions of their inputs and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, InvalidModelError

# Stop the exact fold-in when the KKT residual drops below this, scaled by
# the gradient magnitude.
FOLD_IN_TOL = 1e-8
FOLD_IN_MAX_ITERS = 10_000


def _as_vector(z) -> np.ndarray:
    z = np.ascontiguousarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise InvalidInputError(f"expected a 1-d vector, got shape {z.shape}")
    return z


@dataclass(frozen=True)
class PairSample:
    """An ordered document-pair difference for one query.

    ``z`` is the (normalized) difference of the higher-relevance document's
    features minus the lower one's; ``phi`` is the positive relevance gap
    used to weight the pair's loss.
    """

    z: np.ndarray
    phi: float
    query_id: str
    doc_hi: int
    doc_lo: int

    def __post_init__(self):
        object.__setattr__(self, "z", _as_vector(self.z))
        if not np.all(np.isfinite(self.z)):
            raise InvalidInputError("pair difference contains non-finite values")
        if not self.phi > 0:
            raise InvalidInputError(f"relevance gap must be positive, got {self.phi}")


@dataclass(frozen=True)
class ConeBasis:
    """Basis vectors of a polyhedral cone, columns capped at L2 norm ``c``."""

    U: np.ndarray
    c: float

    def __post_init__(self):
        U = np.ascontiguousarray(self.U, dtype=np.float64)
        object.__setattr__(self, "U", U)
        if U.ndim != 2:
            raise InvalidModelError(f"basis must be a 2-d matrix, got shape {U.shape}")
        n, k = U.shape
        if k == 0:
            raise InvalidModelError("basis has no columns")
        if k > n:
            raise InvalidModelError(f"basis order K={k} exceeds feature dimension N={n}")
        if not np.all(np.isfinite(U)):
            raise InvalidModelError("basis contains non-finite entries")
        if not self.c > 0:
            raise InvalidModelError(f"column norm cap must be positive, got {self.c}")
        norms = np.linalg.norm(U, axis=0)
        cap = self.c * (1.0 + 1e-9) + 1e-12
        if np.any(norms > cap):
            raise InvalidModelError(
                f"basis column norm {norms.max():.6g} exceeds cap c={self.c:.6g}"
            )

    @property
    def N(self) -> int:
        return self.U.shape[0]

    @property
    def K(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class HyperParams:
    """Model hyperparameters.

    ``lambda_u`` is the upper coefficient-sum bound; the implemented
    objective fixes the sum to 1, so it only enters stability reporting.
    """

    K: int
    alpha: float
    rho: float
    c: float
    mu_sg: float = 0.001
    mu_eg: float = 0.005
    lambda_u: float = 1.0

    def __post_init__(self):
        if self.K < 1:
            raise InvalidInputError(f"basis count must be >= 1, got {self.K}")
        for name in ("alpha", "rho", "c", "mu_sg", "mu_eg", "lambda_u"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def defaults(cls, n_features: int, K: int = 10, **overrides) -> "HyperParams":
        """Standard settings: alpha=1, rho=sqrt(N), c=2*rho."""
        rho = overrides.pop("rho", sqrt(n_features))
        c = overrides.pop("c", 2.0 * rho)
        return cls(K=K, alpha=overrides.pop("alpha", 1.0), rho=rho, c=c, **overrides)


def normalize_pair(z, alpha: float, rho: float) -> np.ndarray:
    """Rescale a raw difference vector to rho * z / (alpha + ||z||).

    The result's norm is strictly below rho for alpha > 0; short vectors are
    damped so near-duplicate documents contribute little.
    """
    z = _as_vector(z)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("difference vector contains non-finite values")
    if not alpha > 0 or not rho > 0:
        raise InvalidInputError("alpha and rho must be positive")
    return rho * z / (alpha + np.linalg.norm(z))


def project_columns_to_simplex(V: np.ndarray) -> np.ndarray:
    """Euclidean projection of each column of V onto the probability simplex."""
    K, M = V.shape
    if K == 1:
        return np.ones_like(V)
    U = np.sort(V, axis=0)[::-1]
    css = np.cumsum(U, axis=0) - 1.0
    ks = np.arange(1, K + 1, dtype=np.float64)[:, None]
    cond = U - css / ks > 0.0
    # cond[0] is always True, so argmax on the reversed array finds the last
    # True row, which determines the support size.
    rho = K - 1 - np.argmax(cond[::-1], axis=0)
    theta = css[rho, np.arange(M)] / (rho + 1.0)
    return np.maximum(V - theta[None, :], 0.0)


def _objective(G, B, W):
    # ||z - Uw||^2 minus the constant ||z||^2 term
    return np.einsum("km,km->m", W, G @ W) - 2.0 * np.einsum("km,km->m", B, W)


def _solve_support(G, B_cols, S):
    """Equality-constrained minimizer restricted to support S, all columns.

    Solves the KKT system of min w'Gw - 2b'w s.t. sum(w) = 1 with w free on
    S and zero elsewhere.  Returns the (|S|, M) block or None if singular.
    """
    s = S.size
    A = np.empty((s + 1, s + 1))
    A[:s, :s] = 2.0 * G[np.ix_(S, S)]
    A[:s, s] = 1.0
    A[s, :s] = 1.0
    A[s, s] = 0.0
    rhs = np.empty((s + 1, B_cols.shape[1]))
    rhs[:s] = 2.0 * B_cols[S]
    rhs[s] = 1.0
    try:
        return np.linalg.solve(A, rhs)[:s]
    except np.linalg.LinAlgError:
        return None


def _simplex_lsq_enumerate(G: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Exact simplex least squares by support enumeration.

    The constrained optimum is attained on some face; solving the
    equality-KKT system for every support and keeping the best feasible
    solution per column is exact.  Cost grows as 2^K, so this is reserved
    for small K.
    """
    K, M = G.shape[0], B.shape[1]
    best_obj = np.full(M, np.inf)
    W = np.full((K, M), 1.0 / K)
    idx = np.arange(K)
    for mask in range(1, 1 << K):
        S = idx[(mask >> idx) & 1 == 1]
        WS = _solve_support(G, B, S)
        if WS is None:
            continue
        cols = np.nonzero(np.all(WS >= -1e-12, axis=0))[0]
        if cols.size == 0:
            continue
        WF = np.maximum(WS[:, cols], 0.0)
        WF /= WF.sum(axis=0, keepdims=True)
        GS = G[np.ix_(S, S)]
        obj = np.einsum("km,km->m", WF, GS @ WF) - 2.0 * np.einsum(
            "km,km->m", B[np.ix_(S, cols)], WF
        )
        better = obj < best_obj[cols]
        if np.any(better):
            sel = cols[better]
            W[:, sel] = 0.0
            W[np.ix_(S, sel)] = WF[:, better]
            best_obj[sel] = obj[better]
    return W


def _kkt_gap(G, B, W):
    """Per-column first-order optimality gap, scaled by gradient size."""
    grad = 2.0 * (G @ W - B)
    gmin = grad.min(axis=0)
    gsup = np.where(W > 0.0, grad, -np.inf).max(axis=0)
    return (gsup - gmin) / (1.0 + np.abs(grad).max(axis=0))


def _polish_active_sets(G, B, W, obj):
    """Re-solve each column's current support exactly, keeping improvements."""
    supports = W > 0.0
    keys = np.packbits(supports, axis=0).T
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)  # shape differs across numpy versions
    for gid in np.unique(inverse):
        cols = np.nonzero(inverse == gid)[0]
        S = np.nonzero(supports[:, cols[0]])[0]
        if S.size == 0:
            continue
        WS = _solve_support(G, B[:, cols], S)
        if WS is None:
            continue
        ok = np.all(WS >= -1e-12, axis=0)
        if not np.any(ok):
            continue
        cand = np.zeros((W.shape[0], cols.size))
        cand[S] = np.maximum(WS, 0.0)
        cand /= cand.sum(axis=0, keepdims=True)
        new_obj = _objective(G, B[:, cols], cand)
        better = ok & (new_obj <= obj[cols])
        if np.any(better):
            W[:, cols[better]] = cand[:, better]
            obj[cols[better]] = new_obj[better]


def _simplex_lsq_fista(G, B, W, tol, max_iters):
    """Accelerated projected gradient with periodic active-set polish."""
    lam_max = float(np.linalg.eigvalsh(G)[-1])
    if lam_max <= 0.0:
        return W  # zero basis: objective is constant in w
    step = 0.5 / lam_max
    Y = W.copy()
    t_k = 1.0
    check_every = 50
    for it in range(1, max_iters + 1):
        W_new = project_columns_to_simplex(Y - step * 2.0 * (G @ Y - B))
        t_next = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t_k * t_k))
        Y = W_new + ((t_k - 1.0) / t_next) * (W_new - W)
        W, t_k = W_new, t_next
        if it % check_every == 0:
            obj = _objective(G, B, W)
            _polish_active_sets(G, B, W, obj)
            if np.max(_kkt_gap(G, B, W)) <= tol:
                break
            Y = W.copy()  # restart momentum from the polished point
            t_k = 1.0
    return W


# Supports are enumerated exactly up to this K; beyond it the accelerated
# iterative path takes over.
_ENUM_MAX_K = 10


def simplex_least_squares(
    U: np.ndarray,
    Z: np.ndarray,
    tol: float = FOLD_IN_TOL,
    max_iters: int = FOLD_IN_MAX_ITERS,
    W0: np.ndarray | None = None,
) -> np.ndarray:
    """Solve min_w ||z - U w||^2 over the simplex for every column z of Z.

    For K <= 10 the optimal face is found by exact support enumeration; for
    larger K an accelerated projected-gradient iteration with active-set
    polish runs to first-order gap <= tol.  W0 (columns on the simplex)
    warm-starts the iterative path.

    Returns W of shape (K, M) for Z of shape (N, M).
    """
    K = U.shape[1]
    M = Z.shape[1]
    G = U.T @ U
    B = U.T @ Z
    if K == 1:
        return np.ones((1, M))
    if K <= _ENUM_MAX_K:
        return _simplex_lsq_enumerate(G, B)
    if W0 is not None and W0.shape == (K, M):
        W = W0.copy()
    else:
        W = np.full((K, M), 1.0 / K)
    return _simplex_lsq_fista(G, B, W, tol, max_iters)


def fold_in_exact(basis: ConeBasis, z) -> tuple[np.ndarray, float]:
    """Project z onto the unit-coefficient slice of the cone.

    Returns the optimal simplex coefficients w and the residual distance
    ||z - U w||.  Deterministic for fixed inputs.
    """
    z = _as_vector(z)
    if z.shape[0] != basis.N:
        raise InvalidInputError(f"vector length {z.shape[0]} != feature dimension {basis.N}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("vector contains non-finite values")
    W = simplex_least_squares(basis.U, z[:, None])
    w = W[:, 0]
    residual = float(np.linalg.norm(z - basis.U @ w))
    return w, residual


def pair_loss(basis: ConeBasis, sample: PairSample, weighted: bool = True) -> float:
    """Squared projection distance of one pair, optionally scaled by its gap."""
    _, residual = fold_in_exact(basis, sample.z)
    d2 = residual * residual
    return sample.phi * d2 if weighted else d2


def query_loss(basis: ConeBasis, samples: Sequence[PairSample], weighted: bool = True) -> float:
    """Mean pair loss over one query's pairs."""
    if len(samples) == 0:
        raise InvalidInputError("query has no pairs")
    qids = {s.query_id for s in samples}
    if len(qids) > 1:
        raise InvalidInputError(f"samples span multiple queries: {sorted(qids)}")
    Z = np.stack([s.z for s in samples], axis=1)
    W = simplex_least_squares(basis.U, Z)
    res2 = ((Z - basis.U @ W) ** 2).sum(axis=0)
    if weighted:
        res2 = res2 * np.array([s.phi for s in samples])
    return float(res2.mean())


def empirical_risk(
    basis: ConeBasis,
    per_query_samples: Sequence[Sequence[PairSample]],
    weighted: bool = True,
) -> float:
    """Average query loss over all queries that contribute at least one pair.

    Queries with no pairs (all documents equally relevant) are excluded
    from the average; a dataset with none left is an error.
    """
    usable = [q for q in per_query_samples if len(q) > 0]
    if not usable:
        raise InvalidInputError("no query contributes any ordered pair")
    Z = np.concatenate([np.stack([s.z for s in q], axis=1) for q in usable], axis=1)
    W = simplex_least_squares(basis.U, Z)
    res2 = ((Z - basis.U @ W) ** 2).sum(axis=0)
    if weighted:
        res2 = res2 * np.concatenate([[s.phi for s in q] for q in usable])
    total = 0.0
    offset = 0
    for q in usable:
        total += res2[offset : offset + len(q)].mean()
        offset += len(q)
    return float(total / len(usable))


def check_proper(basis: ConeBasis, tol: float = 1e-10) -> tuple[bool, float]:
    """Full-column-rank test of the basis, diagnosing properness of the cone.

    Returns (is_proper, ratio) where ratio is smallest/largest singular
    value; proper means ratio > tol.
    """
    svals = np.linalg.svd(basis.U, compute_uv=False)
    largest = float(svals[0])
    smallest = float(svals[-1])
    if largest == 0.0:
        return False, 0.0
    ratio = smallest / largest
    return bool(smallest > tol * largest), ratio
