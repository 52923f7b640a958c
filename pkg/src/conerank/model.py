"""The trained artifact and its plain-text persistence format.

Format v1 is line-oriented so models survive a diff and round-trip
bit-exactly (floats are written with 17 significant digits):

    CONERANK v1
    N <int>
    K <int>
    alpha <float>
    rho <float>
    c <float>
    means <N floats>
    stds <N floats>
    U
    <N rows of K floats, row-major>
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConeBasis, HyperParams
from .data import FeatureStats
from .errors import InvalidModelError

FORMAT_HEADER = "CONERANK v1"


@dataclass(frozen=True)
class ConeModel:
    """A learned basis, the feature statistics it expects, and its settings."""

    basis: ConeBasis
    stats: FeatureStats
    hyper: HyperParams

    def __post_init__(self):
        if self.stats.means.shape[0] != self.basis.N:
            raise InvalidModelError(
                f"stats dimension {self.stats.means.shape[0]} != basis dimension {self.basis.N}"
            )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _fmt_vec(v: np.ndarray) -> str:
    return " ".join(_fmt(x) for x in v)


def save_model(model: ConeModel, path) -> None:
    basis, stats, hyper = model.basis, model.stats, model.hyper
    lines = [
        FORMAT_HEADER,
        f"N {basis.N}",
        f"K {basis.K}",
        f"alpha {_fmt(hyper.alpha)}",
        f"rho {_fmt(hyper.rho)}",
        f"c {_fmt(hyper.c)}",
        f"means {_fmt_vec(stats.means)}",
        f"stds {_fmt_vec(stats.stds)}",
        "U",
    ]
    lines.extend(_fmt_vec(basis.U[i]) for i in range(basis.N))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _expect(lines: list[str], i: int, key: str) -> list[str]:
    if i >= len(lines):
        raise InvalidModelError(f"model file truncated, expected {key!r}")
    parts = lines[i].split()
    if not parts or parts[0] != key:
        raise InvalidModelError(f"expected {key!r} on line {i + 1}, got {lines[i]!r}")
    return parts[1:]


def load_model(path) -> ConeModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != FORMAT_HEADER:
        raise InvalidModelError(f"not a model file: expected header {FORMAT_HEADER!r}")
    try:
        n = int(_expect(lines, 1, "N")[0])
        k = int(_expect(lines, 2, "K")[0])
        alpha = float(_expect(lines, 3, "alpha")[0])
        rho = float(_expect(lines, 4, "rho")[0])
        c = float(_expect(lines, 5, "c")[0])
        means = np.array([float(x) for x in _expect(lines, 6, "means")])
        stds = np.array([float(x) for x in _expect(lines, 7, "stds")])
    except (ValueError, IndexError) as exc:
        raise InvalidModelError(f"malformed model header: {exc}") from None
    if lines[8].strip() != "U":
        raise InvalidModelError(f"expected 'U' on line 9, got {lines[8]!r}")
    if len(lines) < 9 + n:
        raise InvalidModelError(f"model file truncated: expected {n} basis rows")
    try:
        U = np.array([[float(x) for x in lines[9 + i].split()] for i in range(n)])
    except ValueError as exc:
        raise InvalidModelError(f"malformed basis row: {exc}") from None
    if U.shape != (n, k):
        raise InvalidModelError(f"basis shape {U.shape} does not match N={n}, K={k}")
    if means.shape[0] != n or stds.shape[0] != n:
        raise InvalidModelError("means/stds length does not match N")
    basis = ConeBasis(U, c)
    stats = FeatureStats(means, stds)
    hyper = HyperParams(K=k, alpha=alpha, rho=rho, c=c)
    return ConeModel(basis=basis, stats=stats, hyper=hyper)
