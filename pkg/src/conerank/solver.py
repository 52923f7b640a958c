"""Alternating minimization of the cone-fitting objective.

Two training modes share one outer loop:

* streamed (default): visit pairs in a seeded shuffled order, run the
  additive (SG) or multiplicative (EG) inner coefficient iteration per
  pair, and take a single-pair basis gradient step after each fold-in.
* full-batch: solve every pair's coefficients exactly against the frozen
  basis, then take one line-searched batch gradient step on the basis.
  This mode is the block-coordinate-descent reference: its risk trace is
  non-increasing by construction.

The minimized objective is the weighted empirical risk

    (1/P) sum_i (1/n_i) sum_j phi_ij ||z_ij - U w_ij||^2

subject to w on the simplex and column norms of U at most c.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (
    ConeBasis,
    HyperParams,
    PairSample,
    check_proper,
    simplex_least_squares,
)
from .data import QueryGroup, generate_all_pairs, standardize
from .errors import InvalidConfigError, InvalidInputError
from .model import ConeModel

VARIANTS = ("sg", "eg", "eg_approx")

_VARIANT_CODES = {
    "sg": _kernels.VARIANT_SG,
    "eg": _kernels.VARIANT_EG,
    "eg_approx": _kernels.VARIANT_EG_APPROX,
}


@dataclass(frozen=True)
class TrainConfig:
    hyper: HyperParams
    variant: str = "sg"
    max_outer_epochs: int = 200
    max_inner_iters: int = 100
    outer_tol: float = 1e-5
    inner_tol: float = 1e-8
    seed: int = 0
    full_batch: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.max_outer_epochs < 1 or self.max_inner_iters < 1:
            raise InvalidConfigError("iteration limits must be >= 1")
        if not self.outer_tol > 0 or not self.inner_tol > 0:
            raise InvalidConfigError("tolerances must be positive")

    @property
    def mu(self) -> float:
        return self.hyper.mu_sg if self.variant == "sg" else self.hyper.mu_eg


@dataclass
class TrainReport:
    risk_trace: list  # (epoch, weighted empirical risk) tuples
    converged: bool
    epochs_run: int
    proper: bool = True
    proper_ratio: float = 0.0


def _init_from_rng(rng: np.random.Generator, n_features: int, K: int, c: float) -> np.ndarray:
    U = rng.standard_normal((n_features, K))
    norms = np.linalg.norm(U, axis=0)
    norms[norms == 0.0] = 1.0
    return U * (0.5 * c / norms)


def init_model(n_features: int, config: TrainConfig) -> ConeBasis:
    """Seeded Gaussian basis with every column at half the norm cap."""
    K = config.hyper.K
    if K > n_features:
        raise InvalidConfigError(f"K={K} exceeds feature dimension N={n_features}")
    rng = np.random.default_rng(config.seed)
    return ConeBasis(_init_from_rng(rng, n_features, K, config.hyper.c), config.hyper.c)


def _draw_simplex_start(rng: np.random.Generator, K: int) -> np.ndarray:
    w0 = rng.uniform(0.0, 1.0, K)
    s = w0.sum()
    if s <= 0.0:
        return np.full(K, 1.0 / K)
    return w0 / s


def _pair_objective(U, z, phi, w) -> float:
    r = z - U @ w
    return phi * float(r @ r)


def pair_coefficient_gradient(basis: ConeBasis, z, phi: float, w) -> np.ndarray:
    """Gradient of the weighted pair objective phi*||z - Uw||^2 in w."""
    return -2.0 * phi * (basis.U.T @ (np.asarray(z) - basis.U @ np.asarray(w)))


def sg_fold_in(
    basis: ConeBasis,
    z: np.ndarray,
    phi: float,
    mu: float,
    config: TrainConfig,
    w0: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Additive inner iteration: gradient step, clip at zero, renormalize.

    Starts from ``w0`` or a seeded random simplex point.  If clipping zeroes
    every coordinate the iterate restarts at the uniform simplex point.
    """
    U = basis.U
    K = basis.K
    if w0 is None:
        rng = rng or np.random.default_rng(config.seed)
        w = _draw_simplex_start(rng, K)
    else:
        w = np.asarray(w0, dtype=np.float64).copy()
    prev = _pair_objective(U, z, phi, w)
    for _ in range(config.max_inner_iters):
        g = pair_coefficient_gradient(basis, z, phi, w)
        w = np.maximum(w - mu * g, 0.0)
        s = w.sum()
        w = np.full(K, 1.0 / K) if s <= 0.0 else w / s
        obj = _pair_objective(U, z, phi, w)
        if abs(prev - obj) <= config.inner_tol * max(abs(prev), 1e-30):
            break
        prev = obj
    return w


def eg_fold_in(
    basis: ConeBasis,
    z: np.ndarray,
    phi: float,
    mu: float,
    config: TrainConfig,
    approx: bool = False,
    w0: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Multiplicative inner iteration, exact or first-order approximate.

    The exact form scales each coordinate by exp(-mu * gradient); the
    approximate form replaces the exponential by its linearization in the
    fitted point U @ w.  Both are followed by an explicit renormalization;
    the approximate form floors coordinates at 1e-12 to keep positivity.
    """
    U = basis.U
    K = basis.K
    if w0 is None:
        rng = rng or np.random.default_rng(config.seed)
        w = _draw_simplex_start(rng, K)
    else:
        w = np.asarray(w0, dtype=np.float64).copy()
    w = np.maximum(w, 1e-12)
    w = w / w.sum()
    prev = _pair_objective(U, z, phi, w)
    for _ in range(config.max_inner_iters):
        if approx:
            zhat = U @ w
            r = z - zhat
            w = w * (1.0 + 2.0 * mu * phi * (U.T @ r - r @ zhat))
            w = np.maximum(w, 1e-12)
        else:
            w = w * np.exp(-mu * pair_coefficient_gradient(basis, z, phi, w))
        w = w / w.sum()
        obj = _pair_objective(U, z, phi, w)
        if abs(prev - obj) <= config.inner_tol * max(abs(prev), 1e-30):
            break
        prev = obj
    return w


def risk_basis_gradient(U: np.ndarray, groups: Sequence[Sequence[tuple]]) -> np.ndarray:
    """Gradient of the weighted risk in the basis, coefficients held fixed.

    ``groups`` is one list per query of (z, w, phi) triples; the gradient is
    -(2/P) * sum_i (1/n_i) sum_j phi (z - U w) w^T.
    """
    groups = [g for g in groups if len(g) > 0]
    if not groups:
        raise InvalidInputError("no pairs to compute a gradient from")
    grad = np.zeros_like(U)
    P = len(groups)
    for g in groups:
        coef = 2.0 / (P * len(g))
        for z, w, phi in g:
            grad -= (coef * phi) * np.outer(z - U @ w, w)
    return grad


def _cap_columns(U: np.ndarray, c: float) -> np.ndarray:
    norms = np.linalg.norm(U, axis=0)
    scale = np.where(norms > c, c / np.where(norms > 0, norms, 1.0), 1.0)
    return U * scale[None, :]


def basis_update(basis: ConeBasis, groups: Sequence[Sequence[tuple]], mu: float) -> ConeBasis:
    """One basis gradient step; violating columns are rescaled to norm c."""
    grad = risk_basis_gradient(basis.U, groups)
    return ConeBasis(_cap_columns(basis.U - mu * grad, basis.c), basis.c)


class _PairMatrix:
    """Column-major pair store with per-query averaging weights."""

    def __init__(self, pair_groups: Sequence[Sequence[PairSample]]):
        usable = [g for g in pair_groups if len(g) > 0]
        if not usable:
            raise InvalidInputError("no query contributes any ordered pair")
        self.P = len(usable)
        self.Z = np.concatenate(
            [np.stack([s.z for s in g], axis=1) for g in usable], axis=1
        )  # (N, M)
        self.phi = np.concatenate([[s.phi for s in g] for g in usable])
        self.sizes = np.array([len(g) for g in usable])
        # per-pair contribution to the risk: phi / (P * n_q)
        self.coef = self.phi / np.repeat(self.P * self.sizes, self.sizes)
        self.M = self.Z.shape[1]

    def risk(self, U: np.ndarray, W: np.ndarray) -> float:
        res2 = ((self.Z - U @ W) ** 2).sum(axis=0)
        return float(self.coef @ res2)

    def gradient(self, U: np.ndarray, W: np.ndarray) -> np.ndarray:
        R = self.Z - U @ W  # (N, M)
        return -2.0 * (R * self.coef[None, :]) @ W.T


def _full_batch_step(U, pairs: _PairMatrix, c: float, W, risk_now: float):
    """One line-searched basis step; accepts only a fixed-coefficient descent.

    The initial step is the exact line-search optimum of the quadratic in U;
    column capping can spoil it, so it is halved until the objective (with
    the current coefficients) does not increase.
    """
    grad = pairs.gradient(U, W)
    gnorm2 = float((grad * grad).sum())
    if gnorm2 <= 0.0:
        return U
    GW = grad @ W  # direction image of every pair's coefficients
    curve = float(pairs.coef @ (GW * GW).sum(axis=0))
    t = gnorm2 / (2.0 * curve) if curve > 0.0 else 1.0
    for _ in range(60):
        U_try = _cap_columns(U - t * grad, c)
        if pairs.risk(U_try, W) <= risk_now:
            return U_try
        t *= 0.5
    return U


def train_on_pairs(
    pair_groups: Sequence[Sequence[PairSample]],
    n_features: int,
    config: TrainConfig,
) -> tuple[ConeBasis, TrainReport]:
    """Run the outer loop on pre-generated pairs; see :func:`train`."""
    hyper = config.hyper
    if hyper.K > n_features:
        raise InvalidConfigError(f"K={hyper.K} exceeds feature dimension N={n_features}")
    pairs = _PairMatrix(pair_groups)
    rng = np.random.default_rng(config.seed)
    U = _init_from_rng(rng, n_features, hyper.K, hyper.c)
    Z_rows = np.ascontiguousarray(pairs.Z.T)  # (M, N) for the streaming kernel
    variant_code = _VARIANT_CODES[config.variant]

    W_exact = simplex_least_squares(U, pairs.Z)
    risk = pairs.risk(U, W_exact)
    trace = [(0, risk)]
    converged = False
    epochs = 0
    for epoch in range(1, config.max_outer_epochs + 1):
        epochs = epoch
        if config.full_batch:
            U = _full_batch_step(U, pairs, hyper.c, W_exact, risk)
            W_exact = simplex_least_squares(U, pairs.Z, W0=W_exact)
            risk_new = pairs.risk(U, W_exact)
        else:
            order = rng.permutation(pairs.M)
            W_start = rng.uniform(0.0, 1.0, (pairs.M, hyper.K))
            W_start /= W_start.sum(axis=1, keepdims=True)
            _kernels.stream_epoch(
                U,
                Z_rows,
                pairs.phi,
                W_start,
                order.astype(np.int64),
                config.mu,
                hyper.c,
                variant_code,
                config.max_inner_iters,
                config.inner_tol,
            )
            W_exact = simplex_least_squares(U, pairs.Z, W0=W_exact)
            risk_new = pairs.risk(U, W_exact)
        trace.append((epoch, risk_new))
        if abs(risk - risk_new) <= config.outer_tol * max(risk, 1e-30):
            converged = True
            risk = risk_new
            break
        risk = risk_new

    basis = ConeBasis(U, hyper.c)
    proper, ratio = check_proper(basis)
    report = TrainReport(
        risk_trace=trace,
        converged=converged,
        epochs_run=epochs,
        proper=proper,
        proper_ratio=ratio,
    )
    return basis, report


def train(dataset: Sequence[QueryGroup], config: TrainConfig) -> tuple[ConeModel, TrainReport]:
    """Standardize, generate ordered pairs, and fit the cone basis.

    Returns the trained model (basis plus the standardization statistics it
    expects at prediction time) and the per-epoch risk trace.
    """
    if not dataset:
        raise InvalidInputError("empty dataset")
    standardized, stats = standardize(dataset)
    pair_groups = generate_all_pairs(standardized, config.hyper.alpha, config.hyper.rho)
    n_features = standardized[0].features.shape[1]
    basis, report = train_on_pairs(pair_groups, n_features, config)
    return ConeModel(basis=basis, stats=stats, hyper=config.hyper), report
