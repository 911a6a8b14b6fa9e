"""Ordered super-classes from a trained map, main-class relabeling and class profiles."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence, TextIO

import numpy as np

from .errors import ConfigurationError
from .panel import ObservationMatrix
from .som import CodeBook, Topology, TrainingSchedule, assign, init_codebook, quantization_error, train

DEFAULT_K = 7
DEFAULT_ORIENT_VAR = "RSALH"


@dataclass(frozen=True)
class SuperClassMap:
    """Unit -> ordered super-class (1..k), plus the chain codebook that defines the order."""

    k: int
    unit_to_super: np.ndarray
    chain_codebook: CodeBook
    orient_var: str | int | None = None
    quantization_error: float = float("nan")

    def __post_init__(self):
        u2s = np.asarray(self.unit_to_super, dtype=np.int64)
        if u2s.size and (u2s.min() < 1 or u2s.max() > self.k):
            raise ConfigurationError("super-class indices must lie in 1..k")
        u2s.flags.writeable = False
        object.__setattr__(self, "unit_to_super", u2s)

    @property
    def empty_classes(self) -> list[int]:
        used = set(self.unit_to_super.tolist())
        return [s for s in range(1, self.k + 1) if s not in used]

    def units_of(self, s: int) -> list[int]:
        """1-based units belonging to super-class ``s``."""
        return [int(u) + 1 for u in np.flatnonzero(self.unit_to_super == s)]

    def label_units(self, units) -> np.ndarray:
        """Map 1-based unit labels to super-class labels."""
        return self.unit_to_super[np.asarray(units, dtype=np.int64) - 1]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "unit_to_super": self.unit_to_super.tolist(),
            "chain_codebook": self.chain_codebook.to_dict(),
            "orient_var": self.orient_var,
            "quantization_error": self.quantization_error,
            "empty_classes": self.empty_classes,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SuperClassMap":
        return cls(
            int(d["k"]),
            d["unit_to_super"],
            CodeBook.from_dict(d["chain_codebook"]),
            d.get("orient_var"),
            float(d.get("quantization_error", float("nan"))),
        )


@dataclass(frozen=True)
class MainClassMap:
    super_to_main: dict[int, Hashable] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "super_to_main", {int(k): v for k, v in self.super_to_main.items()})

    @classmethod
    def default(cls) -> "MainClassMap":
        """Seven ordered super-classes merged into four segments A-D."""
        return cls({1: "A", 3: "A", 2: "B", 4: "B", 5: "B", 6: "C", 7: "D"})

    @classmethod
    def identity(cls, k: int) -> "MainClassMap":
        return cls({s: s for s in range(1, k + 1)})

    def check_total(self, k: int) -> None:
        absent = [s for s in range(1, k + 1) if s not in self.super_to_main]
        if absent:
            raise ConfigurationError(f"main-class map does not cover super-classes {absent}")

    @property
    def labels(self) -> list:
        return sorted(set(self.super_to_main.values()), key=_label_key)

    def to_dict(self) -> dict:
        return {str(k): v for k, v in sorted(self.super_to_main.items())}

    @classmethod
    def from_dict(cls, d: Mapping) -> "MainClassMap":
        return cls({int(k): v for k, v in d.items()})


def _label_key(label):
    return (0, label, "") if isinstance(label, (int, np.integer)) else (1, 0, str(label))


def sort_labels(labels) -> list:
    return sorted(set(labels), key=_label_key)


def _orient_index(orient_var, codes, dimension) -> int | None:
    if orient_var is None:
        return None
    if isinstance(orient_var, (int, np.integer)):
        j = int(orient_var)
    else:
        if codes is None or orient_var not in codes:
            raise ConfigurationError(f"orientation variable {orient_var!r} not among the codebook variables")
        j = list(codes).index(orient_var)
    if not 0 <= j < dimension:
        raise ConfigurationError(f"orientation index {j} out of range")
    return j


def reduce_superclasses(
    codebook: CodeBook,
    k: int = DEFAULT_K,
    schedule: TrainingSchedule | None = None,
    *,
    codes: Sequence[str] | None = None,
    orient_var: str | int | None = 0,
    algorithm: str = "online",
    init: str = "sample",
) -> SuperClassMap:
    """Cluster the code vectors of a trained map with a 1-D chain of ``k`` units.

    Each code vector is one training observation. The chain is reversed, if
    needed, so that super-class 1 has the lower value of ``orient_var``
    (a variable code looked up in ``codes``, or a column index).
    """
    if k < 2:
        raise ConfigurationError("k must be at least 2")
    if k > codebook.n_units:
        raise ConfigurationError(f"k={k} exceeds the {codebook.n_units} units of the map")
    j = _orient_index(orient_var, codes, codebook.dimension)
    data = ObservationMatrix.from_array(codebook.weights)
    chain = Topology.chain(k)
    if schedule is None:
        schedule = TrainingSchedule.default(chain)
    start = init_codebook(chain, data, schedule.seed, init)
    trained, _ = train(start, data, schedule, algorithm)
    w = trained.weights
    if j is not None and w[0, j] > w[-1, j]:
        w = w[::-1]
    trained = CodeBook(chain, w)
    units, _ = assign(trained, data)
    if k == codebook.n_units:
        # one unit per super-class: keep the learned chain order, pin weights to the code vectors
        key = codebook.weights[:, j] if j is not None else np.zeros(k)
        order = np.lexsort((np.arange(k), key, units))
        trained = CodeBook(chain, codebook.weights[order])
        units, _ = assign(trained, data)
    return SuperClassMap(k, units + 1, trained, orient_var, quantization_error(trained, data))


def explore_k(codebook: CodeBook, ks: Sequence[int], seed: int = 0, **kwargs) -> dict[int, float]:
    """Quantization error of the chain reduction for each candidate ``k``."""
    out = {}
    for k in ks:
        sched = TrainingSchedule.default(Topology.chain(k), seed=seed)
        out[int(k)] = reduce_superclasses(codebook, k, sched, **kwargs).quantization_error
    return out


def map_main_classes(super_map: SuperClassMap, main: MainClassMap, super_labels) -> np.ndarray:
    """Relabel super-class labels (any array shape) with their main class."""
    main.check_total(super_map.k)
    arr = np.asarray(super_labels)
    out = np.empty(arr.shape, dtype=object)
    for idx, s in np.ndenumerate(arr):
        try:
            out[idx] = main.super_to_main[int(s)]
        except KeyError:
            raise ConfigurationError(f"super-class {s} has no main class") from None
    return out


# --------------------------------------------------------------------------
# Class profiles


@dataclass(frozen=True)
class ClassProfile:
    """Per-class means (NaN for an empty class), overall means and class sizes."""

    codes: tuple[str, ...]
    classes: tuple
    means: np.ndarray
    overall: np.ndarray
    sizes: np.ndarray

    def rows(self) -> list[list]:
        out = [["variable", "overall", *self.classes]]
        for j, c in enumerate(self.codes):
            out.append([c, self.overall[j], *self.means[:, j]])
        out.append(["Size", int(self.sizes.sum()), *(int(s) for s in self.sizes)])
        return out

    def to_csv(self, sink: TextIO) -> None:
        write_table(self.rows(), sink)


def class_means(matrix: ObservationMatrix, labels, classes: Sequence | None = None) -> ClassProfile:
    """Means over observed cells, per class and overall."""
    labels = np.asarray(labels, dtype=object)
    if labels.shape != (matrix.n_rows,):
        raise ConfigurationError("one label per row required")
    classes = tuple(sort_labels(labels.tolist())) if classes is None else tuple(classes)
    unknown = set(labels.tolist()) - set(classes)
    if unknown:
        raise ConfigurationError(f"labels not among classes: {sorted(map(str, unknown))}")
    obs = ~matrix.missing
    x = matrix.filled(0.0)

    def _mean(rows):
        cnt = obs[rows].sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(cnt > 0, x[rows].sum(axis=0) / np.maximum(cnt, 1), np.nan)

    means = np.full((len(classes), len(matrix.codes)), np.nan)
    sizes = np.zeros(len(classes), dtype=np.int64)
    for c, cls in enumerate(classes):
        rows = labels == cls
        sizes[c] = rows.sum()
        if sizes[c]:
            means[c] = _mean(rows)
    overall = _mean(np.ones(matrix.n_rows, bool))
    return ClassProfile(matrix.codes, classes, means, overall, sizes)


@dataclass(frozen=True)
class FrequencyTable:
    """Column percentages of one categorical attribute per class; overall column first."""

    attribute: str
    categories: tuple
    classes: tuple
    percent: np.ndarray
    overall: np.ndarray
    sizes: np.ndarray

    @property
    def empty_classes(self) -> list:
        return [c for c, n in zip(self.classes, self.sizes) if n == 0]

    def rows(self) -> list[list]:
        out = [[self.attribute, "overall", *self.classes]]
        for i, cat in enumerate(self.categories):
            out.append([cat, self.overall[i], *self.percent[i]])
        return out

    def to_csv(self, sink: TextIO) -> None:
        write_table(self.rows(), sink)


def qualitative_frequencies(categoricals: Mapping[str, Sequence], labels, attribute: str, classes=None) -> FrequencyTable:
    """Percentage of each category within every class, over rows where the attribute is observed."""
    if attribute not in categoricals:
        raise ConfigurationError(f"unknown attribute {attribute!r}")
    cats = np.asarray(categoricals[attribute], dtype=object)
    labels = np.asarray(labels, dtype=object)
    if cats.shape != labels.shape:
        raise ConfigurationError("attribute and labels must be aligned")
    present = np.array([c is not None and c != "" for c in cats.tolist()], dtype=bool)
    categories = tuple(sort_labels(cats[present].tolist()))
    classes = tuple(sort_labels(labels.tolist())) if classes is None else tuple(classes)

    def _column(rows):
        sel = rows & present
        n = sel.sum()
        if n == 0:
            return np.full(len(categories), np.nan), 0
        counts = np.array([(cats[sel] == cat).sum() for cat in categories], dtype=float)
        return 100.0 * counts / n, n

    percent = np.full((len(categories), len(classes)), np.nan)
    sizes = np.zeros(len(classes), dtype=np.int64)
    for c, cls in enumerate(classes):
        percent[:, c], sizes[c] = _column(labels == cls)
    overall, _ = _column(np.ones(labels.shape, bool))
    return FrequencyTable(attribute, categories, classes, percent, overall, sizes)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return str(v)


def write_table(rows: list[list], sink: TextIO) -> None:
    w = csv.writer(sink, lineterminator="\n")
    for r in rows:
        w.writerow([_fmt(v) for v in r])
