"""Sweep datasets: eight scenario features plus two simulated targets."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import DatasetError
from .metrics import format_value

FEATURES = (
    "btInterface.transmitSpeed",
    "btInterface.transmitRange",
    "Group.bufferSize",
    "Group.waitTime",
    "Group.router",
    "Group.msgTtl",
    "Events1.interval",
    "Events1.size",
)
TARGETS = ("delivery_prob", "overhead_ratio")
COLUMNS = FEATURES + TARGETS

# Spelling variants that show up in exported tables.
ALIASES = {
    "EventsI.interval": "Events1.interval",
    "EventsI.size": "Events1.size",
    "Events.interval": "Events1.interval",
    "Events.size": "Events1.size",
}
ROUTER_CODES = {"EpidemicRouter": 0, "Epidemic": 0, "MaxPropRouter": 1, "MaxProp": 1}


def _number(text: str) -> float:
    """Parse a cell, tolerating unit suffixes (``306k``, ``25m``) and commas."""
    t = text.strip().replace(",", "")
    if t in ROUTER_CODES:
        return float(ROUTER_CODES[t])
    if t.lower() in ("nan", ""):
        return math.nan
    while t and t[-1].isalpha():
        t = t[:-1]
    return float(t)


@dataclass
class Dataset:
    X: np.ndarray  # (n, 8) in FEATURES order
    y: Dict[str, np.ndarray]
    feature_names: Sequence[str] = FEATURES

    def __len__(self):
        return self.X.shape[0]

    def target(self, name: str) -> np.ndarray:
        try:
            return self.y[name]
        except KeyError:
            raise DatasetError(f"unknown target {name!r}") from None

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], {k: v[rows] for k, v in self.y.items()},
                       self.feature_names)

    def select_features(self, names: Sequence[str]) -> "Dataset":
        idx = [list(self.feature_names).index(n) for n in names]
        return Dataset(self.X[:, idx], dict(self.y), tuple(names))

    def clean(self) -> "Dataset":
        """Drop rows with any missing value."""
        ok = np.all(np.isfinite(self.X), axis=1)
        for v in self.y.values():
            ok &= np.isfinite(v)
        return self.subset(np.flatnonzero(ok))

    def validate(self):
        if len(self) < 2:
            raise DatasetError(f"need at least 2 rows, have {len(self)}")
        if "Group.router" in self.feature_names:
            r = self.X[:, list(self.feature_names).index("Group.router")]
            if not np.all(np.isin(r, (0.0, 1.0))):
                raise DatasetError("Group.router must be 0 (Epidemic) or 1 (MaxProp)")
        if not np.all(np.isfinite(self.X)):
            raise DatasetError("missing feature values")
        for k, v in self.y.items():
            if not np.all(np.isfinite(v)):
                raise DatasetError(f"missing values in {k}")
        return self

    def table(self) -> np.ndarray:
        """Features and targets side by side, in :data:`COLUMNS` order."""
        return np.column_stack([self.X] + [self.y[t] for t in TARGETS])

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(self.feature_names) + list(TARGETS))
        for i in range(len(self)):
            w.writerow([format_value(v) for v in self.X[i]]
                       + [format_value(float(self.y[t][i])) for t in TARGETS])
        return out.getvalue()

    def save(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "Dataset":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise DatasetError("empty CSV")
        header = [ALIASES.get(h.strip(), h.strip()) for h in rows[0]]
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise DatasetError(f"missing columns: {', '.join(missing)}")
        pos = [header.index(c) for c in COLUMNS]
        try:
            data = np.array([[_number(r[p]) for p in pos] for r in rows[1:] if r],
                            dtype=float).reshape(-1, len(COLUMNS))
        except (ValueError, IndexError) as exc:
            raise DatasetError(f"bad cell: {exc}") from None
        return cls(data[:, :8], {t: data[:, 8 + k] for k, t in enumerate(TARGETS)})

    @classmethod
    def load(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            return cls.from_csv(fh.read())


def synthetic_dataset(n: int, seed: int = 0, noise: float = 0.0) -> Dataset:
    """Rows drawn uniformly from the sweep box with polynomial targets.

    ``delivery_prob`` depends on transmitRange, transmitSpeed and the router
    only; ``overhead_ratio`` on Events1.size, transmitSpeed and the router.
    Handy for exercising the learning code without running simulations.
    """
    from .optimizer import default_box

    box = default_box()
    rng = np.random.default_rng(seed)
    X = box.sample(rng, n)
    u = box.normalize(X)
    speed, rng_, router, size = u[:, 0], u[:, 1], X[:, 4], u[:, 7]
    dp = 0.1 + 0.5 * rng_ ** 2 + 0.2 * speed * rng_ + 0.1 * router
    oh = 2.0 + 6.0 * size ** 2 - 2.0 * speed * size - 1.5 * router
    if noise:
        dp = dp + rng.normal(0, noise, n)
        oh = oh + rng.normal(0, noise, n)
    return Dataset(X, {"delivery_prob": dp, "overhead_ratio": oh})
