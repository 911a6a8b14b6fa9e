"""Transition counts, Markov transition matrices and stationary distributions."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .errors import (
    AbsorbingGapWarning,
    ConfigurationError,
    ConvergenceError,
    DomainError,
    NonStochasticWarning,
    ReducibleChainError,
    UndefinedFrequenciesError,
)
from .grouping import write_table
from .trajectory import TrajectorySet, _parse_label

STOCHASTIC_TOL = 1e-9


@dataclass(frozen=True)
class TransitionCounts:
    labels: tuple
    counts: np.ndarray
    include_self: bool

    def __add__(self, other: "TransitionCounts") -> "TransitionCounts":
        if self.labels != other.labels or self.include_self != other.include_self:
            raise ConfigurationError("cannot merge counts over different alphabets")
        return TransitionCounts(self.labels, self.counts + other.counts, self.include_self)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def rows(self) -> list[list]:
        return _matrix_rows(self.labels, self.counts)


@dataclass(frozen=True)
class TransitionMatrix:
    labels: tuple
    P: np.ndarray
    empty_rows: tuple = ()

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] != len(self.labels):
            raise ConfigurationError("transition matrix must be square and match its labels")
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            raise DomainError("transition matrix entries must be finite and non-negative")
        P.flags.writeable = False
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def is_stochastic(self) -> bool:
        return bool(np.all(np.abs(self.P.sum(axis=1) - 1.0) <= STOCHASTIC_TOL))

    def rows(self) -> list[list]:
        return _matrix_rows(self.labels, self.P)

    def to_csv(self, sink: TextIO) -> None:
        write_table(self.rows(), sink)


@dataclass(frozen=True)
class Distribution:
    labels: tuple
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).ravel()
        if p.size != len(self.labels):
            raise ConfigurationError("distribution length does not match labels")
        if np.any(p < 0) or abs(p.sum() - 1.0) > STOCHASTIC_TOL:
            raise DomainError("a distribution must be non-negative and sum to 1")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __getitem__(self, label) -> float:
        return float(self.p[self.labels.index(label)])


def _matrix_rows(labels, M) -> list[list]:
    out = [["from", *labels]]
    for lab, row in zip(labels, M):
        out.append([lab, *(v.item() if hasattr(v, "item") else v for v in row)])
    return out


def load_matrix(source: TextIO) -> TransitionMatrix:
    """Read a square matrix CSV: header ``from,<labels...>``, one row per origin label."""
    reader = csv.reader(source)
    header = next(reader, None)
    if not header or len(header) < 2:
        raise ConfigurationError("matrix CSV needs a header row of labels")
    labels = tuple(_parse_label(h.strip()) for h in header[1:])
    rows, row_labels = [], []
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise ConfigurationError(f"line {reader.line_num}: expected {len(header)} fields")
        row_labels.append(_parse_label(row[0].strip()))
        try:
            rows.append([float(v) for v in row[1:]])
        except ValueError:
            raise ConfigurationError(f"line {reader.line_num}: non-numeric matrix entry") from None
    if tuple(row_labels) != labels:
        raise ConfigurationError("row labels must match the header labels in the same order")
    return TransitionMatrix(labels, np.array(rows))


# --------------------------------------------------------------------------
# Estimation


def count_transitions(trajectories: TrajectorySet, include_self: bool = True) -> TransitionCounts:
    """Count consecutive label pairs; drop the diagonal when ``include_self`` is false."""
    if trajectories.length < 2:
        raise ConfigurationError("trajectories need at least two years to have transitions")
    m = len(trajectories.alphabet)
    codes = trajectories.codes()
    src, dst = codes[:, :-1].ravel(), codes[:, 1:].ravel()
    counts = np.bincount(src * m + dst, minlength=m * m).reshape(m, m)
    if not include_self:
        np.fill_diagonal(counts, 0)
    return TransitionCounts(trajectories.alphabet, counts, include_self)


@dataclass(frozen=True)
class ChangeFrequencies:
    labels: tuple
    pairs: tuple
    counts: np.ndarray
    fractions: np.ndarray
    total: int

    def fraction(self, a, b) -> float:
        return float(self.fractions[self.pairs.index((a, b))])

    def rows(self) -> list[list]:
        return [
            ["", *(f"{a}{b}" for a, b in self.pairs)],
            ["count", *(int(c) for c in self.counts)],
            ["fraction", *self.fractions],
        ]


def change_frequencies(counts: TransitionCounts) -> ChangeFrequencies:
    """Share of each off-diagonal move among all changes of label."""
    C = np.array(counts.counts)
    np.fill_diagonal(C, 0)
    total = int(C.sum())
    if total == 0:
        raise UndefinedFrequenciesError("no label changes to compute frequencies from")
    m = len(counts.labels)
    pairs = tuple((counts.labels[i], counts.labels[j]) for i in range(m) for j in range(m) if i != j)
    flat = np.array([C[i, j] for i in range(m) for j in range(m) if i != j])
    return ChangeFrequencies(tuple(counts.labels), pairs, flat, flat / total, total)


def transition_matrix(counts: TransitionCounts) -> TransitionMatrix:
    """Row-normalized counts; an empty row becomes a self-loop with a warning."""
    C = np.asarray(counts.counts, dtype=float)
    sums = C.sum(axis=1)
    empty = np.flatnonzero(sums == 0)
    P = np.zeros_like(C)
    full = sums > 0
    P[full] = C[full] / sums[full, None]
    for i in empty:
        P[i, i] = 1.0
    if empty.size:
        warnings.warn(
            f"no transitions observed from {[counts.labels[i] for i in empty]}; rows set to self-loops",
            AbsorbingGapWarning,
            stacklevel=2,
        )
    return TransitionMatrix(counts.labels, P, tuple(counts.labels[i] for i in empty))


def is_irreducible(P) -> bool:
    """True iff the graph of strictly positive entries is strongly connected."""
    A = np.asarray(P.P if isinstance(P, TransitionMatrix) else P, dtype=float) > 0
    n = A.shape[0]
    if n == 0:
        return False

    def reaches_all(adj) -> bool:
        seen = np.zeros(n, bool)
        seen[0] = True
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adj[i] & ~seen):
                seen[j] = True
                stack.append(j)
        return bool(seen.all())

    return reaches_all(A) and reaches_all(A.T)


@dataclass(frozen=True)
class StationaryResult:
    distribution: Distribution
    eigenvalue: float
    iterations: int
    method: str
    residual: float
    direct_discrepancy: float

    def __iter__(self):
        return iter((self.distribution, self.eigenvalue))


def _direct_solve(P: np.ndarray, lam: float) -> np.ndarray:
    """Solve (P^T - lam I) pi = 0 with sum(pi) = 1 by least squares."""
    n = P.shape[0]
    A = np.vstack([P.T - lam * np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


def stationary_distribution(P, tol: float = 1e-12, max_iter: int = 10**6, check_window: int = 500) -> StationaryResult:
    """Dominant left eigenvector of a non-negative irreducible matrix by power iteration.

    Each iterate is renormalized to sum to 1, so for a row-stochastic matrix
    the eigenvalue is 1 and ``pi P = pi``. Matrices whose rows do not sum to
    one are accepted with a warning and the Perron root is returned with the
    vector. If plain iteration stalls (periodic chains), the fallback
    averages each iterate with its successor, which shares the fixed point
    but damps the oscillation.
    """
    tm = P if isinstance(P, TransitionMatrix) else TransitionMatrix(tuple(range(np.shape(P)[0])), P)
    M = tm.P
    n = M.shape[0]
    if not is_irreducible(M):
        raise ReducibleChainError("stationary distribution requires an irreducible chain")
    if not tm.is_stochastic:
        warnings.warn(
            f"rows sum to {np.round(M.sum(axis=1), 6).tolist()}, not 1; solving for the dominant eigenvector",
            NonStochasticWarning,
            stacklevel=2,
        )

    def run(averaged: bool, budget: int):
        pi = np.full(n, 1.0 / n)
        best = np.inf
        res = np.inf
        for it in range(1, budget + 1):
            y = pi @ M
            lam = y.sum()
            res = np.abs(y - lam * pi).max()
            if res <= tol:
                return pi, lam, it, res, True
            nxt = y / lam
            pi = 0.5 * (pi + nxt) if averaged else nxt
            if it % check_window == 0:
                if res >= 0.999 * best:
                    return pi, lam, it, res, False
                best = res
        return pi, lam, budget, res, False

    pi, lam, it, res, ok = run(False, max_iter)
    method = "power"
    if not ok:
        pi, lam, it2, res, ok = run(True, max(max_iter - it, check_window))
        it += it2
        method = "averaged"
    if not ok:
        raise ConvergenceError(f"power iteration did not converge (residual {res:.3g} after {it} iterations)")
    direct = _direct_solve(M, lam)
    discrepancy = float(np.abs(direct - pi).max())
    if discrepancy > max(1e-8, 1e3 * tol):
        raise ConvergenceError(f"power iteration disagrees with direct solve by {discrepancy:.3g}")
    return StationaryResult(Distribution(tm.labels, pi / pi.sum()), float(lam), it, method, float(res), discrepancy)


def distribution_at_year(trajectories: TrajectorySet, year: int) -> Distribution:
    """Label shares across individuals in one year."""
    if year not in trajectories.years:
        raise ConfigurationError(f"year {year} not in trajectories")
    if trajectories.n_individuals == 0:
        raise ConfigurationError("empty trajectory set")
    col = trajectories.codes()[:, trajectories.years.index(year)]
    p = np.bincount(col, minlength=len(trajectories.alphabet)) / col.size
    return Distribution(trajectories.alphabet, p)


def simulate_chain(
    P,
    initial,
    steps: int,
    n_individuals: int,
    seed: int = 0,
    years: Sequence[int] | None = None,
) -> TrajectorySet:
    """Independent trajectories of ``steps`` observations each, drawn from the chain."""
    tm = P if isinstance(P, TransitionMatrix) else TransitionMatrix(tuple(range(np.shape(P)[0])), P)
    if not tm.is_stochastic:
        raise DomainError("simulation requires a row-stochastic matrix")
    init = initial.p if isinstance(initial, Distribution) else Distribution(tm.labels, initial).p
    if init.size != len(tm.labels):
        raise ConfigurationError("initial distribution does not match the matrix")
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(tm.P, axis=1)
    cdf[:, -1] = 1.0
    icdf = np.cumsum(init)
    icdf[-1] = 1.0
    states = np.empty((n_individuals, steps), dtype=np.int64)
    states[:, 0] = np.searchsorted(icdf, rng.random(n_individuals), side="right")
    for t in range(1, steps):
        u = rng.random(n_individuals)
        states[:, t] = (u[:, None] >= cdf[states[:, t - 1]]).sum(axis=1)
    labels = np.array(tm.labels, dtype=object)[states]
    years = tuple(range(steps)) if years is None else tuple(years)
    ids = tuple(f"S{i:06d}" for i in range(n_individuals))
    return TrajectorySet(ids, years, labels, tm.labels)


def write_distributions(rows: dict, labels, sink: TextIO) -> None:
    """Write named distributions as one CSV row each."""
    out = [["", *labels]]
    for name, d in rows.items():
        out.append([name, *(float(v) for v in (d.p if isinstance(d, Distribution) else d))])
    write_table(out, sink)
