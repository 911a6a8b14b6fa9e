"""Synthetic panels with latent Markov class dynamics and known emission profiles."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO

import numpy as np

from .errors import ConfigurationError
from .markov import Distribution, TransitionMatrix, simulate_chain
from .panel import PanelDataset, default_catalog
from .trajectory import TrajectorySet

# (level, spread) per variable, loosely on the scale of the real survey variables
_SCALES = {
    "AGEH": (40.0, 3.0),
    "ANCH": (15.0, 2.5),
    "GRSALH": (0.05, 0.03),
    "HEXJH": (60.0, 20.0),
    "HMJH": (1900.0, 120.0),
    "HWMJH": (42.0, 2.0),
    "NBXJH": (0.2, 0.08),
    "RSALH": (13.0, 1.2),
    "SENH": (90.0, 12.0),
    "SIZFAM": (3.0, 0.35),
    "VHWMJH": (0.5, 1.5),
    "VWMJH": (0.5, 1.5),
    "WMJH": (44.0, 1.8),
    "WOUTH": (0.7, 0.4),
    "WUNEH": (2.0, 0.8),
}


@dataclass(frozen=True)
class SynthConfig:
    n_individuals: int
    years: tuple[int, ...]
    codes: tuple[str, ...]
    labels: tuple
    latent_P: np.ndarray
    initial: np.ndarray
    emission_mean: np.ndarray  # classes x variables
    emission_spread: np.ndarray
    missing_rate: float = 0.0
    seed: int = 0
    categorical: dict = field(default_factory=dict)  # attribute -> class label -> {category: prob}

    def __post_init__(self):
        k, p = len(self.labels), len(self.codes)
        for name in ("latent_P", "initial", "emission_mean", "emission_spread"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        object.__setattr__(self, "codes", tuple(self.codes))
        object.__setattr__(self, "labels", tuple(self.labels))
        P = self.latent_P
        if P.shape != (k, k) or np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-12):
            raise ConfigurationError("latent_P must be a row-stochastic matrix over the labels")
        if self.initial.shape != (k,) or np.any(self.initial < 0) or abs(self.initial.sum() - 1) > 1e-12:
            raise ConfigurationError("initial must be a distribution over the labels")
        if self.emission_mean.shape != (k, p) or self.emission_spread.shape != (k, p):
            raise ConfigurationError("emission tables must be classes x variables")
        if np.any(~(self.emission_spread > 0)):
            raise ConfigurationError("emission spreads must be positive")
        if not 0 <= self.missing_rate < 1:
            raise ConfigurationError("missing_rate must lie in [0, 1)")
        if self.n_individuals < 0 or not self.years:
            raise ConfigurationError("need n_individuals >= 0 and at least one year")
        for attr, table in self.categorical.items():
            for lab in self.labels:
                probs = table.get(str(lab), table.get(lab))
                if probs is None or abs(sum(probs.values()) - 1) > 1e-9 or min(probs.values()) < 0:
                    raise ConfigurationError(f"categorical {attr!r} needs a distribution for class {lab!r}")

    def to_dict(self) -> dict:
        return {
            "n_individuals": self.n_individuals,
            "years": list(self.years),
            "codes": list(self.codes),
            "labels": list(self.labels),
            "latent_P": self.latent_P.tolist(),
            "initial": self.initial.tolist(),
            "emissions": {
                str(lab): {"mean": self.emission_mean[i].tolist(), "spread": self.emission_spread[i].tolist()}
                for i, lab in enumerate(self.labels)
            },
            "missing_rate": self.missing_rate,
            "seed": self.seed,
            "categorical": {a: {str(k): v for k, v in t.items()} for a, t in self.categorical.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthConfig":
        labels = tuple(d["labels"])
        em = d["emissions"]
        return cls(
            int(d["n_individuals"]),
            tuple(d["years"]),
            tuple(d["codes"]),
            labels,
            d["latent_P"],
            d["initial"],
            [em[str(lab)]["mean"] for lab in labels],
            [em[str(lab)]["spread"] for lab in labels],
            float(d.get("missing_rate", 0.0)),
            int(d.get("seed", 0)),
            dict(d.get("categorical", {})),
        )

    @classmethod
    def load(cls, source: TextIO) -> "SynthConfig":
        return cls.from_dict(json.load(source))

    @property
    def min_separation(self) -> float:
        """Smallest distance between two class means, in units of the larger spread per variable."""
        k = len(self.labels)
        best = np.inf
        for a in range(k):
            for b in range(a + 1, k):
                s = np.maximum(self.emission_spread[a], self.emission_spread[b])
                best = min(best, float(np.linalg.norm((self.emission_mean[a] - self.emission_mean[b]) / s)))
        return best


DEFAULT_LATENT_P = np.array(
    [
        [0.60, 0.25, 0.05, 0.10],
        [0.06, 0.78, 0.03, 0.13],
        [0.04, 0.10, 0.80, 0.06],
        [0.04, 0.10, 0.05, 0.81],
    ]
)


def separated_config(
    n_individuals: int = 2500,
    years: Sequence[int] = tuple(range(1984, 1993)),
    *,
    latent_P=None,
    initial=None,
    separation: float = 8.0,
    missing_rate: float = 0.05,
    seed: int = 0,
) -> SynthConfig:
    """Four latent classes A-D whose means sit ``separation`` spreads apart in sequence.

    Every variable shifts monotonically with the class, so class order is
    also the order of the real hourly wage.
    """
    codes = default_catalog().codes
    labels = ("A", "B", "C", "D")
    P = DEFAULT_LATENT_P if latent_P is None else np.asarray(latent_P, float)
    init = np.array([0.14, 0.40, 0.18, 0.28]) if initial is None else np.asarray(initial, float)
    level = np.array([_SCALES[c][0] for c in codes])
    spread = np.array([_SCALES[c][1] for c in codes])
    # fixed +/-1 pattern so classes are not all pushed the same way on every variable
    pattern = np.array([1, 1, 1, -1, 1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1], dtype=float)
    step = separation / np.sqrt(len(codes))
    offsets = np.arange(len(labels))[:, None] * step * pattern[None, :]
    offsets -= offsets.mean(axis=0)
    mean = level + offsets * spread
    educ = {
        "A": {"primary": 0.45, "secondary": 0.35, "high-school": 0.15, "college": 0.05},
        "B": {"primary": 0.15, "secondary": 0.45, "high-school": 0.30, "college": 0.10},
        "C": {"primary": 0.25, "secondary": 0.40, "high-school": 0.25, "college": 0.10},
        "D": {"primary": 0.05, "secondary": 0.25, "high-school": 0.40, "college": 0.30},
    }
    return SynthConfig(
        n_individuals,
        tuple(years),
        codes,
        labels,
        P,
        init,
        mean,
        np.tile(spread, (len(labels), 1)),
        missing_rate,
        seed,
        {"EDUC": educ},
    )


def generate_panel(config: SynthConfig) -> tuple[PanelDataset, TrajectorySet]:
    """Draw a panel and its latent class trajectories; deterministic in ``config.seed``.

    Values are Gaussian with the class-conditional mean and spread, cells are
    masked independently at ``missing_rate``. A record whose every cell was
    masked gets one uniformly chosen cell restored, so no record is empty.
    """
    chain_seed, value_seed, mask_seed, cat_seed = np.random.SeedSequence(config.seed).spawn(4)
    tm = TransitionMatrix(config.labels, config.latent_P)
    n, t, p = config.n_individuals, len(config.years), len(config.codes)
    latent = simulate_chain(
        tm,
        Distribution(config.labels, config.initial),
        t,
        n,
        seed=np.random.default_rng(chain_seed).integers(2**63),
        years=config.years,
    )
    ids = tuple(f"I{i:05d}" for i in range(n))
    latent = TrajectorySet(ids, config.years, latent.labels, config.labels)
    k = latent.codes()
    rng = np.random.default_rng(value_seed)
    values = config.emission_mean[k] + config.emission_spread[k] * rng.standard_normal((n, t, p))
    mrng = np.random.default_rng(mask_seed)
    missing = mrng.random((n, t, p)) < config.missing_rate
    empty = np.argwhere(missing.all(axis=2))
    for i, y in empty:
        missing[i, y, mrng.integers(p)] = False
    cats = {}
    crng = np.random.default_rng(cat_seed)
    for attr, table in config.categorical.items():
        arr = np.empty((n, t), dtype=object)
        for ci, lab in enumerate(config.labels):
            probs = table.get(str(lab), table.get(lab))
            names = list(probs)
            sel = k == ci
            draws = crng.choice(len(names), size=int(sel.sum()), p=np.array([probs[c] for c in names]))
            arr[sel] = np.array(names, dtype=object)[draws]
        cats[attr] = arr
    return PanelDataset(ids, config.years, config.codes, values, missing, cats), latent


def match_classes(class_centers: Mapping, config: SynthConfig, codes: Sequence[str] | None = None) -> dict:
    """Assign each pipeline class to the latent class with the nearest emission mean.

    ``class_centers`` maps a pipeline label to its raw-scale mean vector over
    ``codes`` (default: the config's own codes). Distances are in spread units.
    """
    codes = config.codes if codes is None else tuple(codes)
    idx = [config.codes.index(c) for c in codes]
    mean = config.emission_mean[:, idx]
    spread = config.emission_spread[:, idx].mean(axis=0)
    out = {}
    for label, center in class_centers.items():
        d = np.linalg.norm((mean - np.asarray(center, float)) / spread, axis=1)
        out[label] = config.labels[int(np.argmin(d))]
    return out
