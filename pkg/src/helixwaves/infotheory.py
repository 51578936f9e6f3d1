"""Shannon entropies and three-way mutual redundancy of a contingency cube.

All entropies are in bits.  The mutual redundancy

    R123 = H1 + H2 + H3 - H12 - H13 - H23 + H123

is signed: negative values indicate synergy among the three dimensions
(self-organisation), positive values a shared historical structure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, RowError

TINY = 1e-300


@dataclass(frozen=True, eq=False)
class ContingencyCube:
    counts: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        counts = np.array(self.counts, dtype=float)
        if counts.ndim != 3 or 0 in counts.shape:
            raise InputError(f"contingency cube must be 3-dimensional, got shape {counts.shape}")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise InputError("cube cells must be finite and non-negative")
        if counts.sum() <= 0:
            raise InputError("cube total must be positive")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        if self.labels is not None:
            labels = tuple(tuple(axis) for axis in self.labels)
            if tuple(len(a) for a in labels) != counts.shape:
                raise InputError("labels do not match cube dimensions")
            object.__setattr__(self, "labels", labels)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.counts.shape

    def probabilities(self) -> np.ndarray:
        return self.counts / self.counts.sum()


@dataclass(frozen=True)
class RedundancyReport:
    H1: float
    H2: float
    H3: float
    H12: float
    H13: float
    H23: float
    H123: float
    R123: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("H1", "H2", "H3", "H12", "H13", "H23", "H123", "R123")}


def shannon_bits(p) -> float:
    """-sum p log2 p over an already-normalised distribution; 0 log 0 = 0."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > TINY]
    return float(-np.sum(p * np.log2(p)))


def _normalise_axes(axes) -> tuple[int, ...]:
    axes = tuple(sorted(set(int(a) for a in axes)))
    if not axes or any(a not in (1, 2, 3) for a in axes):
        raise InputError(f"axes must be a non-empty subset of {{1, 2, 3}}, got {axes}")
    return axes


def _entropy_of(probs: np.ndarray, axes: tuple[int, ...]) -> float:
    summed = tuple(i for i in range(3) if i + 1 not in axes)
    return shannon_bits(probs.sum(axis=summed) if summed else probs)


def entropy(cube: ContingencyCube, axes: Sequence[int]) -> float:
    """Entropy of the marginal of ``cube`` over ``axes`` (1-based)."""
    return _entropy_of(cube.probabilities(), _normalise_axes(axes))


def mutual_redundancy(cube: ContingencyCube) -> RedundancyReport:
    probs = cube.probabilities()
    h = {}
    for r in (1, 2, 3):
        for axes in combinations((1, 2, 3), r):
            h[axes] = _entropy_of(probs, axes)
    r123 = (h[(1,)] + h[(2,)] + h[(3,)]
            - h[(1, 2)] - h[(1, 3)] - h[(2, 3)] + h[(1, 2, 3)])
    return RedundancyReport(h[(1,)], h[(2,)], h[(3,)], h[(1, 2)], h[(1, 3)],
                            h[(2, 3)], h[(1, 2, 3)], r123)


def cube_from_records(records) -> ContingencyCube:
    """Build a cube from ``(cat1, cat2, cat3, count)`` tuples.

    Categories are sorted per axis so the result does not depend on row order.
    """
    records = list(records)
    if not records:
        raise InputError("no records")
    cats = [sorted({r[i] for r in records}) for i in range(3)]
    index = [{c: j for j, c in enumerate(axis)} for axis in cats]
    counts = np.zeros(tuple(len(c) for c in cats))
    for a, b, c, n in records:
        counts[index[0][a], index[1][b], index[2][c]] += n
    return ContingencyCube(counts, tuple(cats))


def read_long_csv(path) -> ContingencyCube:
    """Long-format CSV with columns cat1, cat2, cat3, count (header optional)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8-sig")
    records = []
    for line, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise RowError(line, f"expected 4 fields, got {len(row)}")
        cells = [c.strip() for c in row]
        try:
            count = float(cells[3])
        except ValueError:
            if line == 1:
                continue        # header
            raise RowError(line, f"cannot parse count {cells[3]!r}") from None
        if not np.isfinite(count) or count < 0:
            raise RowError(line, f"count must be finite and non-negative, got {cells[3]!r}")
        records.append((cells[0], cells[1], cells[2], count))
    return cube_from_records(records)
