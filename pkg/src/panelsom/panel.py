"""Longitudinal panel ingestion, derived variables, year pooling and standardization.

A panel holds one record per (individual, year) with a numeric block and an
explicit missing mask. Masked cells are stored as NaN but never read: every
computation goes through the mask.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import (
    CatalogError,
    ConfigurationError,
    DegenerateVariableError,
    DomainError,
    DuplicateKeyError,
    ParseError,
)

VARIABLE_KINDS = ("observed", "derived-growth", "derived-difference", "derived-deflated")


@dataclass(frozen=True)
class CatalogEntry:
    code: str
    kind: str = "observed"
    description: str = ""

    def __post_init__(self):
        if self.kind not in VARIABLE_KINDS:
            raise CatalogError(f"unknown variable kind {self.kind!r} for {self.code!r}")


class VariableCatalog:
    """Ordered, duplicate-free set of variable descriptions (sorted by code)."""

    def __init__(self, entries: Iterable[CatalogEntry]):
        entries = list(entries)
        seen = set()
        for e in entries:
            if e.code in seen:
                raise CatalogError(f"duplicate variable code {e.code!r}")
            seen.add(e.code)
        self.entries: tuple[CatalogEntry, ...] = tuple(sorted(entries, key=lambda e: e.code))
        self._by_code = {e.code: e for e in self.entries}

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(e.code for e in self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, code):
        return code in self._by_code

    def __getitem__(self, code: str) -> CatalogEntry:
        try:
            return self._by_code[code]
        except KeyError:
            raise CatalogError(f"unknown variable code {code!r}") from None

    def add(self, entry: CatalogEntry) -> "VariableCatalog":
        if entry.code in self:
            raise CatalogError(f"variable code {entry.code!r} already in catalog")
        return VariableCatalog(self.entries + (entry,))

    def subset(self, codes: Iterable[str]) -> "VariableCatalog":
        return VariableCatalog(self[c] for c in codes)

    def to_list(self) -> list[dict]:
        return [{"code": e.code, "kind": e.kind, "description": e.description} for e in self.entries]


def default_catalog() -> VariableCatalog:
    """The fifteen head-of-household variables used for the labor-market map."""
    return VariableCatalog(
        [
            CatalogEntry("AGEH", "observed", "age of head of household"),
            CatalogEntry("ANCH", "observed", "years worked since age 18"),
            CatalogEntry("GRSALH", "derived-growth", "annual growth rate of real hourly wage"),
            CatalogEntry("HEXJH", "observed", "annual hours in extra jobs"),
            CatalogEntry("HMJH", "observed", "annual hours in main job"),
            CatalogEntry("HWMJH", "observed", "weekly hours in main job"),
            CatalogEntry("NBXJH", "observed", "number of extra jobs"),
            CatalogEntry("RSALH", "derived-deflated", "real hourly wage"),
            CatalogEntry("SENH", "observed", "seniority in main job, months"),
            CatalogEntry("SIZFAM", "observed", "family size"),
            CatalogEntry("VHWMJH", "derived-difference", "change in weekly hours in main job since baseline"),
            CatalogEntry("VWMJH", "derived-difference", "change in weeks worked in main job since baseline"),
            CatalogEntry("WMJH", "observed", "weeks worked in main job"),
            CatalogEntry("WOUTH", "observed", "weeks out of the labor force"),
            CatalogEntry("WUNEH", "observed", "weeks unemployed"),
        ]
    )


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PanelDataset:
    """Individuals x years x variables, with a same-shape missing mask.

    ``categoricals`` maps an attribute name to an (individual, year) object
    array of category labels; ``None`` marks an absent label.
    """

    individual_ids: tuple[str, ...]
    years: tuple[int, ...]
    codes: tuple[str, ...]
    values: np.ndarray
    missing: np.ndarray
    categoricals: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "individual_ids", tuple(str(i) for i in self.individual_ids))
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        object.__setattr__(self, "codes", tuple(self.codes))
        shape = (len(self.individual_ids), len(self.years), len(self.codes))
        values = np.array(self.values, dtype=float).reshape(shape)
        missing = np.array(self.missing, dtype=bool).reshape(shape)
        missing = missing | ~np.isfinite(values)
        values[missing] = np.nan
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "missing", _readonly(missing))
        if len(set(self.individual_ids)) != len(self.individual_ids):
            raise ConfigurationError("individual identifiers must be unique")
        if len(set(self.codes)) != len(self.codes):
            raise CatalogError("duplicate variable code in dataset")
        ys = self.years
        if any(b - a != 1 for a, b in zip(ys, ys[1:])):
            raise ConfigurationError(f"years must be consecutive and increasing, got {list(ys)}")
        cats = {}
        for name, arr in self.categoricals.items():
            arr = np.asarray(arr, dtype=object)
            if arr.shape != shape[:2]:
                raise ConfigurationError(f"categorical {name!r} has shape {arr.shape}, expected {shape[:2]}")
            cats[name] = _readonly(arr.copy())
        object.__setattr__(self, "categoricals", cats)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def variable_index(self, code: str) -> int:
        try:
            return self.codes.index(code)
        except ValueError:
            raise CatalogError(f"unknown variable code {code!r}") from None

    def year_index(self, year: int) -> int:
        try:
            return self.years.index(int(year))
        except ValueError:
            raise ConfigurationError(f"year {year} not in panel years {list(self.years)}") from None

    def column(self, code: str) -> tuple[np.ndarray, np.ndarray]:
        """Return (values, missing) for one variable, shape (individuals, years)."""
        j = self.variable_index(code)
        return self.values[:, :, j], self.missing[:, :, j]

    def with_variable(self, code: str, values: np.ndarray, missing: np.ndarray) -> "PanelDataset":
        if code in self.codes:
            raise CatalogError(f"variable code {code!r} already present")
        return PanelDataset(
            self.individual_ids,
            self.years,
            self.codes + (code,),
            np.concatenate([self.values, np.asarray(values, float)[:, :, None]], axis=2),
            np.concatenate([self.missing, np.asarray(missing, bool)[:, :, None]], axis=2),
            self.categoricals,
        )


# --------------------------------------------------------------------------
# CSV ingestion


def _parse_number(text: str, line: int, column: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise ParseError(line, f"non-numeric value {text!r} in column {column!r}") from None
    if not math.isfinite(x):
        raise ParseError(line, f"non-finite value {text!r} in column {column!r}")
    return x


def load_panel(source: TextIO, categorical: Sequence[str] = ()) -> PanelDataset:
    """Read a panel from CSV.

    Required columns are ``individual_id`` and ``year``; columns named in
    ``categorical`` are kept as labels, every other column must be numeric.
    An empty numeric cell is recorded as missing. (individual, year) pairs
    absent from the file are fully masked.
    """
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, "empty input, header row required") from None
    header = [h.strip() for h in header]
    for req in ("individual_id", "year"):
        if req not in header:
            raise ParseError(1, f"missing required column {req!r}")
    if len(set(header)) != len(header):
        raise ParseError(1, "duplicate column names in header")
    unknown = [c for c in categorical if c not in header]
    if unknown:
        raise ConfigurationError(f"categorical columns not in header: {unknown}")
    id_col, year_col = header.index("individual_id"), header.index("year")
    cat_cols = {header.index(c): c for c in categorical}
    num_cols = [i for i in range(len(header)) if i not in (id_col, year_col) and i not in cat_cols]
    codes = tuple(header[i] for i in num_cols)

    records: dict[tuple[str, int], tuple[list[float], list[bool], dict[str, str | None]]] = {}
    order: dict[str, None] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(line, f"expected {len(header)} fields, found {len(row)}")
        ident = row[id_col].strip()
        if not ident:
            raise ParseError(line, "empty individual_id")
        try:
            year = int(row[year_col])
        except ValueError:
            raise ParseError(line, f"non-integer year {row[year_col]!r}") from None
        key = (ident, year)
        if key in records:
            raise DuplicateKeyError(line, f"duplicate record for individual {ident!r}, year {year}")
        vals, miss = [], []
        for i in num_cols:
            cell = row[i].strip()
            if cell == "":
                vals.append(math.nan)
                miss.append(True)
            else:
                vals.append(_parse_number(cell, line, header[i]))
                miss.append(False)
        cats = {name: (row[i].strip() or None) for i, name in cat_cols.items()}
        records[key] = (vals, miss, cats)
        order.setdefault(ident)

    ids = list(order)
    years = sorted({y for _, y in records})
    if not years:
        return PanelDataset((), (), codes, np.zeros((0, 0, len(codes))), np.zeros((0, 0, len(codes)), bool))
    years = list(range(years[0], years[-1] + 1))
    n, t, p = len(ids), len(years), len(codes)
    values = np.full((n, t, p), np.nan)
    missing = np.ones((n, t, p), dtype=bool)
    catarrs = {name: np.full((n, t), None, dtype=object) for name in categorical}
    id_pos = {ident: i for i, ident in enumerate(ids)}
    for (ident, year), (vals, miss, cats) in records.items():
        i, k = id_pos[ident], year - years[0]
        values[i, k] = vals
        missing[i, k] = miss
        for name, label in cats.items():
            catarrs[name][i, k] = label
    return PanelDataset(tuple(ids), tuple(years), codes, values, missing, catarrs)


def write_panel(dataset: PanelDataset, sink: TextIO) -> None:
    """Write a panel back out in the CSV contract read by :func:`load_panel`."""
    cat_names = list(dataset.categoricals)
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["individual_id", "year", *dataset.codes, *cat_names])
    for i, ident in enumerate(dataset.individual_ids):
        for k, year in enumerate(dataset.years):
            nums = ["" if dataset.missing[i, k, j] else repr(float(dataset.values[i, k, j])) for j in range(len(dataset.codes))]
            cats = [dataset.categoricals[c][i, k] or "" for c in cat_names]
            w.writerow([ident, year, *nums, *cats])


def load_deflators(source: TextIO) -> dict[int, float]:
    """Read a two-column ``year,deflator`` table."""
    reader = csv.reader(source)
    header = [h.strip() for h in next(reader, [])]
    if header != ["year", "deflator"]:
        raise ParseError(1, "deflator table header must be 'year,deflator'")
    out: dict[int, float] = {}
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(line, f"expected 2 fields, found {len(row)}")
        try:
            year = int(row[0])
        except ValueError:
            raise ParseError(line, f"non-integer year {row[0]!r}") from None
        if year in out:
            raise DuplicateKeyError(line, f"duplicate deflator year {year}")
        out[year] = _parse_number(row[1].strip(), line, "deflator")
    return out


# --------------------------------------------------------------------------
# Derived variables


def derive_growth_rate(dataset: PanelDataset, var: str, out: str) -> PanelDataset:
    """One-year growth rate ``(x[t] - x[t-1]) / x[t-1]``.

    Masked in the first year and wherever either operand is missing or the
    previous value is zero.
    """
    x, miss = dataset.column(var)
    if out in dataset.codes:
        raise CatalogError(f"variable code {out!r} already present")
    result = np.full(x.shape, np.nan)
    rmiss = np.ones(x.shape, dtype=bool)
    prev, cur = x[:, :-1], x[:, 1:]
    ok = ~miss[:, :-1] & ~miss[:, 1:]
    ok[ok] = prev[ok] != 0.0
    growth = np.full(prev.shape, np.nan)
    growth[ok] = (cur[ok] - prev[ok]) / prev[ok]
    result[:, 1:] = growth
    rmiss[:, 1:] = ~ok
    return dataset.with_variable(out, result, rmiss)


def derive_difference(
    dataset: PanelDataset,
    var: str,
    baseline_year: int,
    out: str,
    pre_period: PanelDataset | None = None,
) -> PanelDataset:
    """Change since a fixed baseline year, ``x[t] - x[baseline]``.

    The baseline may come from ``pre_period``, a panel over the same
    individuals covering years before the analysis window.
    """
    x, miss = dataset.column(var)
    if out in dataset.codes:
        raise CatalogError(f"variable code {out!r} already present")
    if baseline_year in dataset.years:
        k = dataset.year_index(baseline_year)
        base, base_miss = x[:, k], miss[:, k]
    elif pre_period is not None and baseline_year in pre_period.years:
        pos = {ident: i for i, ident in enumerate(pre_period.individual_ids)}
        bx, bmiss = pre_period.column(var)
        k = pre_period.year_index(baseline_year)
        base = np.full(len(dataset.individual_ids), np.nan)
        base_miss = np.ones(len(dataset.individual_ids), dtype=bool)
        for i, ident in enumerate(dataset.individual_ids):
            if ident in pos:
                base[i] = bx[pos[ident], k]
                base_miss[i] = bmiss[pos[ident], k]
    else:
        raise ConfigurationError(f"baseline year {baseline_year} not available")
    rmiss = miss | base_miss[:, None]
    result = np.where(rmiss, np.nan, x - np.where(base_miss, 0.0, base)[:, None])
    return dataset.with_variable(out, result, rmiss)


def deflate(dataset: PanelDataset, var: str, deflator: Mapping[int, float], out: str) -> PanelDataset:
    """Express a nominal variable in real terms: ``x[t] / deflator[t]``."""
    x, miss = dataset.column(var)
    if out in dataset.codes:
        raise CatalogError(f"variable code {out!r} already present")
    absent = [y for y in dataset.years if y not in deflator]
    if absent:
        raise ConfigurationError(f"deflator missing for years {absent}")
    d = np.array([float(deflator[y]) for y in dataset.years])
    if np.any(~(d > 0)):
        raise DomainError("deflator values must be strictly positive")
    result = np.where(miss, np.nan, x / d[None, :])
    return dataset.with_variable(out, result, miss.copy())


# --------------------------------------------------------------------------
# Pooling and standardization


@dataclass(frozen=True)
class ObservationMatrix:
    """Rows x variables with a missing mask and (individual, year) provenance per row."""

    codes: tuple[str, ...]
    values: np.ndarray
    missing: np.ndarray
    provenance: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "codes", tuple(self.codes))
        values = np.array(self.values, dtype=float).reshape(-1, len(self.codes))
        missing = np.array(self.missing, dtype=bool).reshape(values.shape)
        missing = missing | ~np.isfinite(values)
        values[missing] = np.nan
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "missing", _readonly(missing))
        prov = tuple((str(i), int(y)) for i, y in self.provenance)
        if prov and len(prov) != values.shape[0]:
            raise ConfigurationError("provenance length does not match row count")
        object.__setattr__(self, "provenance", prov)

    @classmethod
    def from_array(cls, values, missing=None, codes=None) -> "ObservationMatrix":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if missing is None:
            missing = ~np.isfinite(values)
        if codes is None:
            codes = tuple(f"V{j + 1}" for j in range(values.shape[1]))
        return cls(tuple(codes), values, missing)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def filled(self, fill: float = 0.0) -> np.ndarray:
        return np.where(self.missing, fill, self.values)

    def take(self, rows) -> "ObservationMatrix":
        rows = np.asarray(rows)
        prov = tuple(self.provenance[i] for i in rows) if self.provenance else ()
        return ObservationMatrix(self.codes, self.values[rows], self.missing[rows], prov)


def pool_years(dataset: PanelDataset, years: Sequence[int], codes: Sequence[str] | None = None) -> ObservationMatrix:
    """Stack the requested years as independent rows, individual-major then year."""
    codes = tuple(sorted(dataset.codes)) if codes is None else tuple(codes)
    cidx = [dataset.variable_index(c) for c in codes]
    yidx = [dataset.year_index(y) for y in years]
    n = len(dataset.individual_ids)
    vals = dataset.values[:, yidx, :][:, :, cidx].reshape(n * len(yidx), len(cidx))
    miss = dataset.missing[:, yidx, :][:, :, cidx].reshape(n * len(yidx), len(cidx))
    prov = tuple((ident, int(y)) for ident in dataset.individual_ids for y in years)
    return ObservationMatrix(codes, vals, miss, prov)


@dataclass(frozen=True)
class StandardizationParams:
    codes: tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "codes", tuple(self.codes))
        object.__setattr__(self, "mean", _readonly(np.array(self.mean, dtype=float)))
        object.__setattr__(self, "scale", _readonly(np.array(self.scale, dtype=float)))
        if not (len(self.codes) == self.mean.size == self.scale.size):
            raise ConfigurationError("standardization params length mismatch")
        for c, s in zip(self.codes, self.scale):
            if not s > 0:
                raise DegenerateVariableError(c, "has non-positive scale")

    def select(self, codes: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        pos = {c: j for j, c in enumerate(self.codes)}
        absent = [c for c in codes if c not in pos]
        if absent:
            raise ConfigurationError(f"no standardization params for {absent}")
        idx = [pos[c] for c in codes]
        return self.mean[idx], self.scale[idx]

    def to_dict(self) -> dict:
        return {"codes": list(self.codes), "mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "StandardizationParams":
        return cls(tuple(d["codes"]), d["mean"], d["scale"])


def fit_standardization(matrix: ObservationMatrix) -> StandardizationParams:
    """Per-variable mean and population standard deviation over observed cells."""
    obs = ~matrix.missing
    count = obs.sum(axis=0)
    for c, k in zip(matrix.codes, count):
        if k < 2:
            raise DegenerateVariableError(c, f"has {k} observed values, need at least 2")
    x = matrix.filled(0.0)
    mean = x.sum(axis=0) / count
    dev = np.where(obs, x - mean, 0.0)
    scale = np.sqrt((dev**2).sum(axis=0) / count)
    for c, s, col, o in zip(matrix.codes, scale, x.T, obs.T):
        present = col[o]
        if s == 0 or np.all(present == present[0]):
            raise DegenerateVariableError(c)
    return StandardizationParams(matrix.codes, mean, scale)


def apply_standardization(params: StandardizationParams, data, missing=None, codes=None):
    """Map raw values to z-scores ``(x - mean) / scale``; missing cells stay missing.

    ``data`` is an :class:`ObservationMatrix` or a raw row/matrix whose
    columns follow ``codes`` (default: the params' own order). Raw input
    returns ``(z, missing)``.
    """
    if isinstance(data, ObservationMatrix):
        mean, scale = params.select(data.codes)
        z = np.where(data.missing, np.nan, (data.filled(0.0) - mean) / scale)
        return ObservationMatrix(data.codes, z, data.missing, data.provenance)
    mean, scale = params.select(params.codes if codes is None else codes)
    x = np.asarray(data, dtype=float)
    miss = ~np.isfinite(x) if missing is None else np.asarray(missing, bool) | ~np.isfinite(x)
    if x.shape[-1] != mean.size:
        raise ConfigurationError(f"expected {mean.size} columns, got {x.shape[-1]}")
    z = np.where(miss, np.nan, (np.where(miss, 0.0, x) - mean) / scale)
    return z, miss


def invert_standardization(params: StandardizationParams, data, missing=None, codes=None):
    """Inverse map ``x = z * scale + mean``; same calling convention as :func:`apply_standardization`."""
    if isinstance(data, ObservationMatrix):
        mean, scale = params.select(data.codes)
        x = np.where(data.missing, np.nan, data.filled(0.0) * scale + mean)
        return ObservationMatrix(data.codes, x, data.missing, data.provenance)
    mean, scale = params.select(params.codes if codes is None else codes)
    z = np.asarray(data, dtype=float)
    miss = ~np.isfinite(z) if missing is None else np.asarray(missing, bool) | ~np.isfinite(z)
    x = np.where(miss, np.nan, np.where(miss, 0.0, z) * scale + mean)
    return x, miss
