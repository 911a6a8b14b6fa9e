"""Correlation-matrix principal component analysis with pairwise-complete missing data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, TextIO

import numpy as np

from .errors import ConfigurationError, DegenerateVariableError
from .grouping import write_table
from .panel import ObservationMatrix


@dataclass(frozen=True)
class PcaResult:
    codes: tuple[str, ...]
    eigenvalues: np.ndarray
    loadings: np.ndarray  # variables x components
    scores: np.ndarray  # observations x components
    explained: np.ndarray  # cumulative variance fractions
    correlation: np.ndarray

    @property
    def n_components(self) -> int:
        return self.eigenvalues.size

    def to_dict(self, with_scores: bool = False) -> dict:
        d = {
            "codes": list(self.codes),
            "eigenvalues": self.eigenvalues.tolist(),
            "loadings": self.loadings.tolist(),
            "explained": self.explained.tolist(),
            "correlation": self.correlation.tolist(),
        }
        if with_scores:
            d["scores"] = self.scores.tolist()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "PcaResult":
        p = len(d["codes"])
        scores = np.asarray(d.get("scores", np.zeros((0, p))), dtype=float).reshape(-1, p)
        return cls(
            tuple(d["codes"]),
            np.asarray(d["eigenvalues"], float),
            np.asarray(d["loadings"], float),
            scores,
            np.asarray(d["explained"], float),
            np.asarray(d["correlation"], float),
        )


def _standardize_columns(x: np.ndarray, obs: np.ndarray, codes) -> np.ndarray:
    count = obs.sum(axis=0)
    for c, k in zip(codes, count):
        if k < 2:
            raise DegenerateVariableError(c, "has fewer than 2 observed values")
    mean = np.where(obs, x, 0.0).sum(axis=0) / count
    dev = np.where(obs, x - mean, 0.0)
    sd = np.sqrt((dev**2).sum(axis=0) / count)
    for c, s in zip(codes, sd):
        if s == 0:
            raise DegenerateVariableError(c)
    return dev / sd


def pairwise_correlation(x: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Pearson correlation of each column pair over rows where both are observed."""
    p = x.shape[1]
    R = np.eye(p)
    for i in range(p):
        for j in range(i + 1, p):
            both = obs[:, i] & obs[:, j]
            if both.sum() < 2:
                continue
            a = x[both, i] - x[both, i].mean()
            b = x[both, j] - x[both, j].mean()
            den = np.sqrt((a @ a) * (b @ b))
            R[i, j] = R[j, i] = 0.0 if den == 0 else (a @ b) / den
    return R


def _psd_repair(R: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(R)
    if w.min() >= 0:
        return R
    C = (V * np.clip(w, 0, None)) @ V.T
    d = np.sqrt(np.diag(C))
    d[d == 0] = 1.0
    C = C / d[:, None] / d[None, :]
    return (C + C.T) / 2


def correlation_pca(matrix) -> PcaResult:
    """Eigendecomposition of the correlation matrix, components by decreasing eigenvalue.

    Each loading column is signed so its largest-magnitude entry is positive.
    Scores project the column-standardized data (missing cells at 0).
    """
    if not isinstance(matrix, ObservationMatrix):
        matrix = ObservationMatrix.from_array(matrix)
    n, p = matrix.values.shape
    if n < 2 or p < 2:
        raise ConfigurationError("PCA needs at least 2 rows and 2 variables")
    obs = ~matrix.missing
    z = _standardize_columns(matrix.filled(0.0), obs, matrix.codes)
    if obs.all():
        R = (z.T @ z) / n
        np.fill_diagonal(R, 1.0)
    else:
        R = _psd_repair(pairwise_correlation(matrix.filled(0.0), obs))
    R = (R + R.T) / 2
    w, V = np.linalg.eigh(R)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    V = V[:, order]
    pivots = np.abs(V).argmax(axis=0)
    V = V * np.sign(V[pivots, np.arange(p)])
    total = w.sum()
    if total <= 0:
        raise DegenerateVariableError("*", "correlation matrix has rank 0")
    explained = np.cumsum(w) / total
    return PcaResult(matrix.codes, w, V, z @ V, explained, R)


def variable_projection(result: PcaResult, axes=(1, 2)) -> np.ndarray:
    """Correlation-circle coordinates ``loading * sqrt(eigenvalue)`` on two 1-based axes."""
    a, b = axes
    for ax in (a, b):
        if not 1 <= ax <= result.n_components:
            raise ConfigurationError(f"axis {ax} outside 1..{result.n_components}")
    idx = [a - 1, b - 1]
    return result.loadings[:, idx] * np.sqrt(result.eigenvalues[idx])


def write_projection(result: PcaResult, axes, sink: TextIO) -> None:
    xy = variable_projection(result, axes)
    rows = [["variable", f"axis{axes[0]}", f"axis{axes[1]}"]]
    rows += [[c, x, y] for c, (x, y) in zip(result.codes, xy)]
    write_table(rows, sink)
