"""Data handling: qid-format files, standardization, pair generation, synthesis.

The text format is the usual ranking one: each line is

    <relevance> qid:<id> <index>:<value> ... [# comment]

with 1-based, strictly increasing feature indices.  Indices absent from a
line read as 0; the feature dimension N is the largest index seen anywhere
in the stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt
from typing import Iterable, Sequence

import numpy as np

from .core import ConeBasis, PairSample, normalize_pair
from .errors import InvalidInputError, LetorParseError


@dataclass
class QueryGroup:
    """One query's documents: a feature row per document plus integer labels."""

    query_id: str
    features: np.ndarray  # (n_docs, N)
    relevances: np.ndarray  # (n_docs,) nonnegative ints
    comments: list | None = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        rels = np.asarray(self.relevances)
        if rels.dtype.kind not in "iu":
            if not np.all(rels == np.floor(rels)):
                raise InvalidInputError("relevance labels must be integers")
        self.relevances = rels.astype(np.int64)
        if self.features.ndim != 2:
            raise InvalidInputError("features must be a (docs, N) matrix")
        if self.features.shape[0] != self.relevances.shape[0]:
            raise InvalidInputError("feature rows and relevance labels differ in length")
        if self.features.shape[0] < 1:
            raise InvalidInputError(f"query {self.query_id} has no documents")
        if np.any(self.relevances < 0):
            raise InvalidInputError("relevance labels must be nonnegative")
        if not np.all(np.isfinite(self.features)):
            raise InvalidInputError("features contain non-finite values")

    @property
    def n_docs(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature location/scale used to standardize documents."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=np.float64))
        if self.means.shape != self.stds.shape or self.means.ndim != 1:
            raise InvalidInputError("means and stds must be 1-d vectors of equal length")
        if np.any(self.stds <= 0):
            raise InvalidInputError("stds must be strictly positive")

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.means) / self.stds


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the planted-cone generator."""

    N: int
    K_true: int
    num_queries: int
    docs_per_query: int
    noise_std: float
    seed: int

    def __post_init__(self):
        if not (self.N >= self.K_true >= 1):
            raise InvalidInputError(f"need N >= K_true >= 1, got N={self.N}, K_true={self.K_true}")
        if self.num_queries < 1 or self.docs_per_query < 1:
            raise InvalidInputError("need at least one query and one document per query")
        if self.noise_std < 0:
            raise InvalidInputError("noise_std must be nonnegative")


def _parse_line(line: str, lineno: int):
    comment = None
    line = line.rstrip("\r\n")
    if "#" in line:
        cut = line.index("#")
        comment = line[cut + 1 :]
        line = line[:cut]
    tokens = line.split()
    if not tokens:
        return None
    if len(tokens) < 2:
        raise LetorParseError("expected '<rel> qid:<id> ...'", lineno)
    try:
        rel = int(tokens[0])
    except ValueError:
        raise LetorParseError(f"relevance {tokens[0]!r} is not an integer", lineno) from None
    if rel < 0:
        raise LetorParseError(f"relevance must be nonnegative, got {rel}", lineno)
    if not tokens[1].startswith("qid:") or len(tokens[1]) <= 4:
        raise LetorParseError(f"expected qid:<id>, got {tokens[1]!r}", lineno)
    qid = tokens[1][4:]
    feats = []
    prev_idx = 0
    for tok in tokens[2:]:
        idx_s, sep, val_s = tok.partition(":")
        if not sep:
            raise LetorParseError(f"malformed feature token {tok!r}", lineno)
        try:
            idx = int(idx_s)
            val = float(val_s)
        except ValueError:
            raise LetorParseError(f"malformed feature token {tok!r}", lineno) from None
        if idx < 1:
            raise LetorParseError(f"feature indices are 1-based, got {idx}", lineno)
        if idx <= prev_idx:
            raise LetorParseError(
                f"feature index {idx} not strictly increasing after {prev_idx}", lineno
            )
        if not np.isfinite(val):
            raise LetorParseError(f"non-finite feature value in {tok!r}", lineno)
        prev_idx = idx
        feats.append((idx, val))
    return rel, qid, feats, comment


def parse_letor(lines: Iterable[str]) -> list[QueryGroup]:
    """Parse qid-format lines into query groups.

    Queries keep their first-seen order, documents their line order.  Raises
    LetorParseError with the offending 1-based line number.
    """
    records = []
    n_features = 0
    for lineno, line in enumerate(lines, start=1):
        parsed = _parse_line(line, lineno)
        if parsed is None:
            continue
        rel, qid, feats, comment = parsed
        if feats:
            n_features = max(n_features, feats[-1][0])
        records.append((qid, rel, feats, comment))
    if not records:
        raise LetorParseError("no data lines found", 0)
    if n_features == 0:
        raise LetorParseError("no feature values found in the stream", 0)
    by_qid: dict[str, list] = {}
    for qid, rel, feats, comment in records:
        by_qid.setdefault(qid, []).append((rel, feats, comment))
    groups = []
    for qid, rows in by_qid.items():
        X = np.zeros((len(rows), n_features))
        rels = np.zeros(len(rows), dtype=np.int64)
        comments = []
        for i, (rel, feats, comment) in enumerate(rows):
            rels[i] = rel
            for idx, val in feats:
                X[i, idx - 1] = val
            comments.append(comment)
        groups.append(QueryGroup(qid, X, rels, comments))
    return groups


def serialize_letor(dataset: Sequence[QueryGroup]) -> list[str]:
    """Render query groups back to qid-format lines, 6 significant digits."""
    lines = []
    for group in dataset:
        comments = group.comments or [None] * group.n_docs
        for i in range(group.n_docs):
            feats = " ".join(
                f"{j + 1}:{group.features[i, j]:.6g}" for j in range(group.features.shape[1])
            )
            line = f"{group.relevances[i]} qid:{group.query_id} {feats}"
            if comments[i] is not None:
                line += f" #{comments[i]}"
            lines.append(line)
    return lines


def write_letor(dataset: Sequence[QueryGroup], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in serialize_letor(dataset):
            fh.write(line + "\n")


def standardize(
    dataset: Sequence[QueryGroup], stats: FeatureStats | None = None
) -> tuple[list[QueryGroup], FeatureStats]:
    """Shift/scale every feature to zero mean and unit deviation.

    Without ``stats`` the population statistics are computed over all
    documents in the dataset; with it (test time) they are applied as-is.
    Constant features get a unit scale so they map to zero.
    """
    if not dataset:
        raise InvalidInputError("empty dataset")
    n_features = dataset[0].features.shape[1]
    if stats is None:
        X = np.concatenate([g.features for g in dataset], axis=0)
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        stds = np.where(stds < 1e-12, 1.0, stds)
        stats = FeatureStats(means, stds)
    elif stats.means.shape[0] != n_features:
        raise InvalidInputError(
            f"stats dimension {stats.means.shape[0]} != data dimension {n_features}"
        )
    transformed = [
        QueryGroup(g.query_id, stats.apply(g.features), g.relevances.copy(), g.comments)
        for g in dataset
    ]
    return transformed, stats


def generate_pairs(group: QueryGroup, alpha: float, rho: float) -> list[PairSample]:
    """Emit every strictly-ordered document pair of one query.

    For documents l, m with rel_l > rel_m the sample carries the normalized
    difference x_l - x_m and weight rel_l - rel_m; equal-relevance pairs are
    skipped.  Order is deterministic in the (lower, higher) index pair.
    """
    samples = []
    rels = group.relevances
    for i in range(group.n_docs):
        for j in range(i + 1, group.n_docs):
            if rels[i] == rels[j]:
                continue
            hi, lo = (i, j) if rels[i] > rels[j] else (j, i)
            z = normalize_pair(group.features[hi] - group.features[lo], alpha, rho)
            samples.append(
                PairSample(
                    z=z,
                    phi=float(rels[hi] - rels[lo]),
                    query_id=group.query_id,
                    doc_hi=hi,
                    doc_lo=lo,
                )
            )
    return samples


def generate_all_pairs(
    dataset: Sequence[QueryGroup], alpha: float, rho: float
) -> list[list[PairSample]]:
    return [generate_pairs(g, alpha, rho) for g in dataset]


def synth_generate(spec: SynthSpec) -> tuple[list[QueryGroup], ConeBasis]:
    """Build a dataset whose ordered pair differences live in a known cone.

    Documents of a query are laid out along cumulative nonnegative
    coefficient increments, so any higher-minus-lower difference is a
    nonnegative combination of the hidden basis plus N(0, noise_std^2)
    noise (split across the two documents).  Relevance labels are the
    terciles of the latent order.  Returns the dataset and the hidden basis.
    """
    rng = np.random.default_rng(spec.seed)
    rho = sqrt(spec.N)
    c = 2.0 * rho
    Q, _ = np.linalg.qr(rng.standard_normal((spec.N, spec.K_true)))
    truth = ConeBasis(Q[:, : spec.K_true] * (c / 2.0), c)
    n = spec.docs_per_query
    doc_noise = spec.noise_std / sqrt(2.0)
    groups = []
    for q in range(spec.num_queries):
        base = rng.standard_normal(spec.N)
        increments = rng.uniform(0.1, 1.0, size=(n, spec.K_true))
        coeffs = np.cumsum(increments, axis=0)
        X_ordered = base[None, :] + coeffs @ truth.U.T
        if doc_noise > 0:
            X_ordered = X_ordered + rng.normal(0.0, doc_noise, size=X_ordered.shape)
        rel_ordered = (3 * np.arange(n)) // n  # terciles of the latent order
        perm = rng.permutation(n)
        groups.append(
            QueryGroup(
                query_id=str(q + 1),
                features=X_ordered[perm],
                relevances=rel_ordered[perm],
            )
        )
    return groups, truth
