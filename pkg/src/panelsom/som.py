"""Kohonen self-organizing maps on square grids and 1-D chains.

Distances between an observation and a code vector are *partial*: only the
observation's non-missing coordinates take part. Training updates follow
the same rule and leave missing coordinates untouched.

Units are 0-based here; every external surface (CSV, JSON, CLI output)
presents them 1-based.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, EmptyObservationError
from .panel import ObservationMatrix

KERNELS = ("hard", "gaussian")
DECAYS = ("linear", "exponential")
GAUSSIAN_EPS = 1e-9
_CHUNK = 4096


@dataclass(frozen=True)
class Topology:
    """Unit layout: a ``rows x cols`` grid or a chain of ``length`` units."""

    kind: str
    rows: int
    cols: int

    def __post_init__(self):
        if self.kind not in ("grid2d", "chain"):
            raise ConfigurationError(f"unknown topology kind {self.kind!r}")
        if self.rows < 1 or self.cols < 1:
            raise ConfigurationError("topology dimensions must be >= 1")
        if self.kind == "chain" and self.rows != 1:
            raise ConfigurationError("a chain has a single row")

    @classmethod
    def grid(cls, rows: int, cols: int) -> "Topology":
        return cls("grid2d", int(rows), int(cols))

    @classmethod
    def chain(cls, length: int) -> "Topology":
        return cls("chain", 1, int(length))

    @property
    def n_units(self) -> int:
        return self.rows * self.cols

    def position(self, unit: int) -> tuple[int, int]:
        if not 0 <= unit < self.n_units:
            raise IndexError(f"unit {unit} out of range for {self.n_units} units")
        return divmod(unit, self.cols)

    def positions(self) -> np.ndarray:
        u = np.arange(self.n_units)
        return np.stack([u // self.cols, u % self.cols], axis=1)

    def distance_matrix(self) -> np.ndarray:
        pos = self.positions()
        return np.abs(pos[:, None, :] - pos[None, :, :]).max(axis=2)

    def to_dict(self) -> dict:
        if self.kind == "chain":
            return {"kind": "chain", "length": self.cols}
        return {"kind": "grid2d", "rows": self.rows, "cols": self.cols}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Topology":
        if d["kind"] == "chain":
            return cls.chain(d["length"])
        return cls.grid(d["rows"], d["cols"])


def grid_distance(topology: Topology, a: int, b: int) -> int:
    """Chebyshev distance on a grid, absolute position difference on a chain."""
    ra, ca = topology.position(a)
    rb, cb = topology.position(b)
    return max(abs(ra - rb), abs(ca - cb))


def neighborhood_weight(kernel: str, radius: float, distance):
    """Neighborhood strength in [0, 1]; accepts scalar or array distances."""
    d = np.asarray(distance, dtype=float)
    if kernel == "hard":
        w = (d <= radius).astype(float)
    elif kernel == "gaussian":
        r = max(float(radius), GAUSSIAN_EPS)
        w = np.exp(-(d**2) / (2.0 * r * r))
    else:
        raise ConfigurationError(f"unknown kernel {kernel!r}")
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class Decay:
    start: float
    end: float
    decay: str = "linear"

    def at(self, step: int, total: int) -> float:
        if total <= 1:
            return float(self.start)
        f = step / (total - 1)
        if self.decay == "linear":
            return self.start + (self.end - self.start) * f
        return self.start * (self.end / self.start) ** f


@dataclass(frozen=True)
class TrainingSchedule:
    epochs: int = 50
    learning_rate: Decay = field(default_factory=lambda: Decay(0.5, 0.01))
    radius: Decay = field(default_factory=lambda: Decay(4.0, 0.0))
    kernel: str = "hard"
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        lr, r = self.learning_rate, self.radius
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if not 0 < lr.end <= lr.start:
            raise ConfigurationError("learning rate must satisfy 0 < end <= start")
        if not r.start >= r.end >= 0:
            raise ConfigurationError("radius must satisfy start >= end >= 0")
        for d in (lr, r):
            if d.decay not in DECAYS:
                raise ConfigurationError(f"unknown decay {d.decay!r}")
        if r.decay == "exponential" and r.end <= 0:
            raise ConfigurationError("exponential radius decay needs a positive end radius")
        if self.kernel not in KERNELS:
            raise ConfigurationError(f"unknown kernel {self.kernel!r}")

    @classmethod
    def default(cls, topology: Topology, seed: int = 0, **overrides) -> "TrainingSchedule":
        """50 online epochs, rate 0.5 -> 0.01 and radius max(rows, cols)/2 -> 0, both linear."""
        r0 = max(topology.rows, topology.cols) / 2.0
        kw = dict(epochs=50, learning_rate=Decay(0.5, 0.01), radius=Decay(r0, 0.0), kernel="hard", seed=seed)
        kw.update(overrides)
        return cls(**kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainingSchedule":
        d = dict(d)
        for key in ("learning_rate", "radius"):
            if key in d and not isinstance(d[key], Decay):
                d[key] = Decay(**d[key])
        return cls(**d)


@dataclass(frozen=True)
class CodeBook:
    topology: Topology
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != self.topology.n_units:
            raise ConfigurationError(f"weights shape {w.shape} does not match {self.topology.n_units} units")
        if not np.all(np.isfinite(w)):
            raise ConfigurationError("code vectors must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.weights.shape[1]

    @property
    def n_units(self) -> int:
        return self.topology.n_units

    def to_dict(self) -> dict:
        return {
            "topology": self.topology.to_dict(),
            "dimension": self.dimension,
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CodeBook":
        w = np.asarray(d["weights"], dtype=float).reshape(-1, int(d["dimension"]))
        return cls(Topology.from_dict(d["topology"]), w)


# --------------------------------------------------------------------------
# Best-matching units


def _as_row(observation, missing):
    x = np.asarray(observation, dtype=float).ravel()
    miss = ~np.isfinite(x) if missing is None else np.asarray(missing, bool).ravel() | ~np.isfinite(x)
    return x, miss


def bmu(codebook: CodeBook, observation, missing=None) -> tuple[int, float]:
    """Best-matching unit and partial Euclidean distance; ties go to the lowest index."""
    x, miss = _as_row(observation, missing)
    if x.size != codebook.dimension:
        raise ConfigurationError(f"observation has {x.size} coordinates, codebook {codebook.dimension}")
    if miss.all():
        raise EmptyObservationError()
    obs = ~miss
    d2 = ((codebook.weights[:, obs] - x[obs]) ** 2).sum(axis=1)
    u = int(np.argmin(d2))
    return u, math.sqrt(d2[u])


def bmu_batch(weights: np.ndarray, values: np.ndarray, missing: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized partial-distance BMU for many rows: (units, squared distances)."""
    n = values.shape[0]
    units = np.empty(n, dtype=np.int64)
    d2min = np.empty(n)
    obs = ~missing
    x = np.where(missing, 0.0, values)
    for s in range(0, n, _CHUNK):
        xs, os_ = x[s : s + _CHUNK], obs[s : s + _CHUNK]
        diff = (xs[:, None, :] - weights[None, :, :]) * os_[:, None, :]
        d2 = np.einsum("nud,nud->nu", diff, diff)
        u = np.argmin(d2, axis=1)
        units[s : s + _CHUNK] = u
        d2min[s : s + _CHUNK] = d2[np.arange(len(u)), u]
    return units, d2min


def _check_rows(data: ObservationMatrix, dimension: int | None = None):
    if dimension is not None and data.values.shape[1] != dimension:
        raise ConfigurationError(f"data has {data.values.shape[1]} variables, codebook {dimension}")
    empty = np.flatnonzero(data.missing.all(axis=1))
    if empty.size:
        key = data.provenance[empty[0]] if data.provenance else int(empty[0])
        raise EmptyObservationError(key=key)


def assign(codebook: CodeBook, data: ObservationMatrix) -> tuple[np.ndarray, np.ndarray]:
    """BMU index and partial distance for every row of ``data``."""
    _check_rows(data, codebook.dimension)
    units, d2 = bmu_batch(codebook.weights, data.values, data.missing)
    return units, np.sqrt(d2)


def quantization_error(codebook: CodeBook, data: ObservationMatrix) -> float:
    """Mean partial BMU distance over the rows of ``data``."""
    if data.n_rows == 0:
        raise ConfigurationError("quantization error of empty data")
    _, dist = assign(codebook, data)
    return float(dist.mean())


# --------------------------------------------------------------------------
# Initialization and training


def init_codebook(topology: Topology, data: ObservationMatrix, seed: int = 0, method: str = "sample") -> CodeBook:
    """Seeded initial code vectors.

    ``sample`` draws data rows with replacement, filling missing cells with
    the variable's observed mean; ``uniform-box`` draws uniformly inside the
    per-variable observed range.
    """
    if data.n_rows == 0:
        raise ConfigurationError("cannot initialise a codebook from empty data")
    obs = ~data.missing
    count = obs.sum(axis=0)
    if np.any(count == 0):
        raise ConfigurationError("every variable needs at least one observed value")
    x = data.filled(0.0)
    rng = np.random.default_rng(seed)
    if method == "sample":
        col_mean = x.sum(axis=0) / count
        rows = rng.integers(0, data.n_rows, size=topology.n_units)
        w = np.where(obs[rows], x[rows], col_mean)
    elif method == "uniform-box":
        lo = np.where(obs, x, np.inf).min(axis=0)
        hi = np.where(obs, x, -np.inf).max(axis=0)
        w = lo + (hi - lo) * rng.random((topology.n_units, x.shape[1]))
    else:
        raise ConfigurationError(f"unknown init method {method!r}")
    return CodeBook(topology, w)


@dataclass
class TrainingResult:
    codebook: CodeBook
    qe_trace: list[float]

    def __iter__(self):
        return iter((self.codebook, self.qe_trace))


def train_online(codebook: CodeBook, data: ObservationMatrix, schedule: TrainingSchedule) -> TrainingResult:
    """Stochastic Kohonen training, one row at a time.

    Learning rate and radius are interpolated over the total number of
    presentations (epochs x rows). Returns the trained codebook and the
    quantization error measured after each epoch.
    """
    _check_rows(data, codebook.dimension)
    if data.n_rows == 0:
        raise ConfigurationError("cannot train on empty data")
    w = np.array(codebook.weights)
    dist = codebook.topology.distance_matrix()
    obs = (~data.missing).astype(float)
    x = data.filled(0.0)
    n = data.n_rows
    total = schedule.epochs * n
    rng = np.random.default_rng(schedule.seed)
    hard = schedule.kernel == "hard"
    trace = []
    step = 0
    for _ in range(schedule.epochs):
        order = rng.permutation(n) if schedule.shuffle else np.arange(n)
        for i in order:
            eta = schedule.learning_rate.at(step, total)
            r = schedule.radius.at(step, total)
            diff = (x[i] - w) * obs[i]
            winner = int(np.argmin(np.einsum("ud,ud->u", diff, diff)))
            if hard:
                h = (dist[winner] <= r).astype(float)
            else:
                h = neighborhood_weight("gaussian", r, dist[winner])
            w += (eta * h)[:, None] * diff
            step += 1
        trace.append(quantization_error(CodeBook(codebook.topology, w), data))
    return TrainingResult(CodeBook(codebook.topology, w), trace)


def batch_step(codebook: CodeBook, data: ObservationMatrix, radius: float, kernel: str = "hard") -> CodeBook:
    """One batch-map epoch: BMU assignment, then neighborhood-weighted means per coordinate."""
    units, _ = bmu_batch(codebook.weights, data.values, data.missing)
    dist = codebook.topology.distance_matrix()
    h = neighborhood_weight(kernel, radius, dist[units])  # rows x units
    h = np.atleast_2d(h)
    obs = (~data.missing).astype(float)
    num = h.T @ data.filled(0.0)
    den = h.T @ obs
    w = np.array(codebook.weights)
    upd = den > 0
    w[upd] = num[upd] / den[upd]
    return CodeBook(codebook.topology, w)


def train_batch(codebook: CodeBook, data: ObservationMatrix, schedule: TrainingSchedule) -> TrainingResult:
    """Deterministic batch-map training; radius interpolates across epochs.

    With radius 0 each epoch is exactly one Lloyd (k-means) iteration.
    """
    _check_rows(data, codebook.dimension)
    if data.n_rows == 0:
        raise ConfigurationError("cannot train on empty data")
    trace = []
    for e in range(schedule.epochs):
        codebook = batch_step(codebook, data, schedule.radius.at(e, schedule.epochs), schedule.kernel)
        trace.append(quantization_error(codebook, data))
    return TrainingResult(codebook, trace)


def train(codebook: CodeBook, data: ObservationMatrix, schedule: TrainingSchedule, algorithm: str = "online") -> TrainingResult:
    if algorithm == "online":
        return train_online(codebook, data, schedule)
    if algorithm == "batch":
        return train_batch(codebook, data, schedule)
    raise ConfigurationError(f"unknown training algorithm {algorithm!r}")
