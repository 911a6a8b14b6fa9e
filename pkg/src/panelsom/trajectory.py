"""Projection of yearly records onto a trained map and dominant-position statistics."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence, TextIO

import numpy as np

from .errors import ConfigurationError, EmptyObservationError
from .grouping import MainClassMap, SuperClassMap, map_main_classes, sort_labels, write_table
from .panel import PanelDataset, StandardizationParams, apply_standardization
from .som import CodeBook, bmu, bmu_batch

GRANULARITIES = ("unit", "super", "main")


@dataclass(frozen=True)
class TrajectorySet:
    """Fixed-length label sequences, one per individual."""

    individual_ids: tuple[str, ...]
    years: tuple[int, ...]
    labels: np.ndarray
    alphabet: tuple = ()

    def __post_init__(self):
        labels = np.array(self.labels, dtype=object)
        if labels.ndim != 2 or labels.shape != (len(self.individual_ids), len(self.years)):
            raise ConfigurationError(f"labels shape {labels.shape} does not match individuals x years")
        if any(v is None for v in labels.flat):
            raise ConfigurationError("every trajectory cell must be labeled")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "individual_ids", tuple(str(i) for i in self.individual_ids))
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        seen = sort_labels(labels.ravel().tolist())
        alphabet = tuple(self.alphabet) if self.alphabet else tuple(seen)
        extra = set(seen) - set(alphabet)
        if extra:
            raise ConfigurationError(f"labels outside the alphabet: {sorted(map(str, extra))}")
        object.__setattr__(self, "alphabet", alphabet)

    @property
    def n_individuals(self) -> int:
        return len(self.individual_ids)

    @property
    def length(self) -> int:
        return len(self.years)

    def codes(self) -> np.ndarray:
        """Labels as integer positions in the alphabet."""
        pos = {a: i for i, a in enumerate(self.alphabet)}
        return np.vectorize(pos.__getitem__, otypes=[np.int64])(self.labels) if self.labels.size else np.zeros(self.labels.shape, np.int64)

    def relabel(self, mapping, alphabet=()) -> "TrajectorySet":
        out = np.vectorize(lambda v: mapping[v], otypes=[object])(self.labels)
        return TrajectorySet(self.individual_ids, self.years, out, tuple(alphabet))

    def to_csv(self, sink: TextIO) -> None:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(["individual_id", *self.years])
        for ident, row in zip(self.individual_ids, self.labels):
            w.writerow([ident, *row])


def _parse_label(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def load_trajectories(source: TextIO) -> TrajectorySet:
    """Read the CSV written by :meth:`TrajectorySet.to_csv`; integer-looking labels become ints."""
    reader = csv.reader(source)
    header = next(reader, None)
    if not header or header[0] != "individual_id":
        raise ConfigurationError("trajectory CSV must start with an 'individual_id' column")
    years = [int(y) for y in header[1:]]
    ids, rows = [], []
    for row in reader:
        if not row:
            continue
        if len(row) != len(header):
            raise ConfigurationError(f"line {reader.line_num}: expected {len(header)} fields")
        ids.append(row[0])
        rows.append([_parse_label(v) for v in row[1:]])
    return TrajectorySet(tuple(ids), tuple(years), np.array(rows, dtype=object).reshape(len(ids), len(years)))


# --------------------------------------------------------------------------
# Projection


def project_year(params: StandardizationParams, codebook: CodeBook, record, missing=None, codes=None, key=None) -> int:
    """1-based unit of the code vector closest to one raw record (partial distance)."""
    z, miss = apply_standardization(params, np.asarray(record, dtype=float), missing, codes)
    if miss.all():
        raise EmptyObservationError(key=key)
    return bmu(codebook, z, miss)[0] + 1


def _labels_at(granularity, units, super_map, main_map):
    if granularity == "unit":
        return units.astype(object), ()
    if super_map is None:
        raise ConfigurationError(f"granularity {granularity!r} needs a super-class map")
    sup = super_map.label_units(units)
    if granularity == "super":
        return sup.astype(object), tuple(range(1, super_map.k + 1))
    if main_map is None:
        raise ConfigurationError("granularity 'main' needs a main-class map")
    return map_main_classes(super_map, main_map, sup), tuple(main_map.labels)


def build_trajectories(
    dataset: PanelDataset,
    years: Sequence[int] | None,
    params: StandardizationParams,
    codebook: CodeBook,
    granularity: str = "unit",
    super_map: SuperClassMap | None = None,
    main_map: MainClassMap | None = None,
) -> TrajectorySet:
    """Project every (individual, year) record and collect labels at the requested granularity."""
    if granularity not in GRANULARITIES:
        raise ConfigurationError(f"unknown granularity {granularity!r}")
    years = tuple(dataset.years) if years is None else tuple(years)
    yidx = [dataset.year_index(y) for y in years]
    cidx = [dataset.variable_index(c) for c in params.codes]
    if len(cidx) != codebook.dimension:
        raise ConfigurationError("standardization params and codebook disagree on dimension")
    n = len(dataset.individual_ids)
    raw = dataset.values[:, yidx, :][:, :, cidx].reshape(n * len(yidx), len(cidx))
    miss = dataset.missing[:, yidx, :][:, :, cidx].reshape(raw.shape)
    empty = np.flatnonzero(miss.all(axis=1))
    if empty.size:
        i, t = divmod(int(empty[0]), len(yidx))
        raise EmptyObservationError(key=(dataset.individual_ids[i], years[t]))
    z, miss = apply_standardization(params, raw, miss)
    units, _ = bmu_batch(codebook.weights, z, miss)
    units = (units + 1).reshape(n, len(yidx))
    labels, alphabet = _labels_at(granularity, units, super_map, main_map)
    if granularity == "unit":
        alphabet = tuple(range(1, codebook.n_units + 1))
    return TrajectorySet(dataset.individual_ids, years, labels, alphabet)


# --------------------------------------------------------------------------
# Dominant positions


def default_threshold(length: int) -> int:
    """Smallest count that can be held by a single label only."""
    return 5 if length == 9 else length // 2 + 1


def dominant_position(trajectory: Sequence[Hashable], threshold: int = 5):
    """Label occurring at least ``threshold`` times, or None.

    If several labels qualify (possible only when threshold <= T/2) the most
    frequent wins, ties broken by label order.
    """
    if threshold < 1:
        raise ConfigurationError("threshold must be >= 1")
    counts = Counter(trajectory)
    best = [(c, lab) for lab, c in counts.items() if c >= threshold]
    if not best:
        return None
    top = max(c for c, _ in best)
    return sort_labels([lab for c, lab in best if c == top])[0]


@dataclass(frozen=True)
class DominantPositionReport:
    """Occupancy probabilities per dominant-label group; ``None`` is the no-dominant group."""

    alphabet: tuple
    groups: tuple
    sizes: np.ndarray
    probabilities: np.ndarray
    threshold: int

    def group(self, label) -> tuple[int, np.ndarray]:
        i = self.groups.index(label)
        return int(self.sizes[i]), self.probabilities[i]

    def rows(self) -> list[list]:
        out = [["dominant", "size", *(f"p_{a}" for a in self.alphabet)]]
        for g, n, p in zip(self.groups, self.sizes, self.probabilities):
            out.append(["none" if g is None else g, int(n), *p])
        return out

    def to_csv(self, sink: TextIO) -> None:
        write_table(self.rows(), sink)


def occupancy_report(trajectories: TrajectorySet, threshold: int | None = None) -> DominantPositionReport:
    """Group individuals by dominant label and average their time shares per label.

    Groups with no member are left out; the no-dominant group comes last.
    """
    if trajectories.n_individuals == 0:
        raise ConfigurationError("empty trajectory set")
    if threshold is None:
        threshold = default_threshold(trajectories.length)
    codes = trajectories.codes()
    m = len(trajectories.alphabet)
    dom = [dominant_position(row, threshold) for row in codes.tolist()]
    order = [i for i in range(m) if i in set(dom)] + ([None] if None in dom else [])
    sizes, probs = [], []
    dom = np.array([-1 if d is None else d for d in dom])
    for g in order:
        sel = dom == (-1 if g is None else g)
        counts = np.bincount(codes[sel].ravel(), minlength=m).astype(float)
        sizes.append(int(sel.sum()))
        probs.append(counts / (sel.sum() * trajectories.length))
    groups = tuple(None if g is None else trajectories.alphabet[g] for g in order)
    return DominantPositionReport(trajectories.alphabet, groups, np.array(sizes), np.array(probs).reshape(len(order), m), threshold)


@dataclass(frozen=True)
class StabilityCensus:
    min_years: int
    stayers: int
    stayers_by_label: dict
    distinct_trajectories: int


def stability_census(trajectories: TrajectorySet, min_years: int) -> StabilityCensus:
    """Individuals spending at least ``min_years`` in a single label, and distinct sequences."""
    if not 1 <= min_years <= trajectories.length:
        raise ConfigurationError(f"min_years must be in 1..{trajectories.length}")
    by_label = {a: 0 for a in trajectories.alphabet}
    for row in trajectories.labels.tolist():
        lab, c = Counter(row).most_common(1)[0]
        if c >= min_years:
            by_label[lab] += 1
    distinct = len({tuple(r) for r in trajectories.labels.tolist()})
    return StabilityCensus(min_years, sum(by_label.values()), by_label, distinct)
