"""Discretization, entropy, mutual information and correlation backends.

Entropy and mutual information are in bits. Series are discretized with
equal-width bins over their own ``[min, max]`` range.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import LengthMismatchError
from .model import CORRELATION_METHODS, MetricId, MetricSeries, MetricTable

DEFAULT_BINS = 10


@dataclass(frozen=True, eq=False)
class DiscreteSeries:
    symbols: np.ndarray
    bin_count: int

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=np.int64)
        if sym.ndim != 1 or sym.size == 0:
            raise ValueError("discrete series must be 1-D and non-empty")
        if self.bin_count < 1 or sym.min() < 0 or sym.max() >= self.bin_count:
            raise ValueError(f"symbols must lie in [0, {self.bin_count})")
        sym.flags.writeable = False
        object.__setattr__(self, "symbols", sym)

    def __len__(self) -> int:
        return int(self.symbols.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteSeries):
            return NotImplemented
        return self.bin_count == other.bin_count and np.array_equal(self.symbols, other.symbols)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    method: str
    values: np.ndarray
    ids: tuple[MetricId, ...]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.ids), len(self.ids)):
            raise ValueError("correlation matrix shape does not match ids")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "_index", {mid: i for i, mid in enumerate(self.ids)})

    def index(self, mid: MetricId) -> int:
        return self._index[mid]

    def __contains__(self, mid: object) -> bool:
        return mid in self._index

    def __getitem__(self, pair: tuple[MetricId, MetricId]) -> float:
        a, b = pair
        return float(self.values[self._index[a], self._index[b]])

    def to_csv(self, path: str | Path) -> None:
        """Write the matrix with metric ids as header row and first column."""
        labels = [str(mid) for mid in self.ids]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", *labels])
            for label, row in zip(labels, self.values):
                writer.writerow([label, *(repr(float(v)) for v in row)])


def discretize(series: MetricSeries | Sequence[float] | np.ndarray, bins: int = DEFAULT_BINS) -> DiscreteSeries:
    """Map samples to equal-width bin indices over the series' own range.

    Bins are half-open ``[lo, hi)`` except the last, which also holds the
    maximum. A constant series maps entirely to bin 0.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    values = series.values if isinstance(series, MetricSeries) else np.asarray(series, dtype=float)
    if values.size == 0:
        raise ValueError("cannot discretize an empty series")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return DiscreteSeries(np.zeros(values.size, dtype=np.int64), bins)
    edges = np.linspace(lo, hi, bins + 1)
    symbols = np.searchsorted(edges[1:-1], values, side="right")
    return DiscreteSeries(symbols, bins)


def _probabilities(counts: np.ndarray, n: int) -> np.ndarray:
    counts = counts[counts > 0]
    return counts / n


def entropy(d: DiscreteSeries) -> float:
    """Shannon entropy in bits of the empirical symbol distribution."""
    p = _probabilities(np.bincount(d.symbols, minlength=d.bin_count), len(d))
    h = -float(np.sum(p * np.log2(p)))
    return h if h > 0.0 else 0.0


def mutual_information(d1: DiscreteSeries, d2: DiscreteSeries) -> float:
    """Mutual information in bits from the empirical joint distribution."""
    n = len(d1)
    if n != len(d2):
        raise LengthMismatchError(f"series lengths differ: {n} != {len(d2)}")
    joint = np.bincount(d1.symbols * d2.bin_count + d2.symbols, minlength=d1.bin_count * d2.bin_count)
    joint = joint.reshape(d1.bin_count, d2.bin_count)
    pa = joint.sum(axis=1) / n
    pb = joint.sum(axis=0) / n
    i, j = np.nonzero(joint)
    pab = joint[i, j] / n
    mi = float(np.sum(pab * np.log2(pab / (pa[i] * pb[j]))))
    return mi if mi > 0.0 else 0.0


class InfoCache:
    """Memoized entropies and pairwise mutual information keyed by metric id."""

    def __init__(self, discrete: Mapping[MetricId, DiscreteSeries] | None = None):
        self._series: dict[MetricId, DiscreteSeries] = dict(discrete or {})
        self._entropy: dict[MetricId, float] = {}
        self._mi: dict[tuple[MetricId, MetricId], float] = {}

    @classmethod
    def from_table(cls, table: MetricTable, bins: int = DEFAULT_BINS) -> "InfoCache":
        return cls({mid: discretize(table.values[mid], bins) for mid in table.ids})

    def add(self, mid: MetricId, d: DiscreteSeries) -> None:
        if mid not in self._series:
            self._series[mid] = d

    def __contains__(self, mid: object) -> bool:
        return mid in self._series

    def series(self, mid: MetricId) -> DiscreteSeries:
        return self._series[mid]

    def entropy(self, mid: MetricId) -> float:
        h = self._entropy.get(mid)
        if h is None:
            h = self._entropy[mid] = entropy(self._series[mid])
        return h

    def mi(self, a: MetricId, b: MetricId) -> float:
        key = (a, b) if a <= b else (b, a)
        v = self._mi.get(key)
        if v is None:
            v = self._mi[key] = mutual_information(self._series[key[0]], self._series[key[1]])
        return v


def _abs_pearson(x: np.ndarray) -> np.ndarray:
    """|Pearson r| between rows of ``x``; zero-variance rows correlate 0."""
    centered = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", centered, centered))
    live = norms > 0
    z = np.zeros_like(centered)
    z[live] = centered[live] / norms[live, None]
    r = np.abs(z @ z.T)
    return np.minimum(r, 1.0)


def _pairwise(n: int, fn, threads: int) -> np.ndarray:
    """Fill the upper triangle with ``fn(i, j)`` in row blocks, then mirror."""
    out = np.zeros((n, n))

    def row(i: int) -> list[float]:
        return [fn(i, j) for j in range(i + 1, n)]

    if threads > 1 and n > 2:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(n)))
    else:
        rows = [row(i) for i in range(n)]
    for i, vals in enumerate(rows):
        out[i, i + 1:] = vals
    return out + out.T


def _kendall_b(x: np.ndarray, y: np.ndarray) -> float:
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    tau = stats.kendalltau(x, y, variant="b").statistic
    return 0.0 if np.isnan(tau) else min(abs(float(tau)), 1.0)


def correlation_matrix(
    table: MetricTable, method: str, bins: int = DEFAULT_BINS, threads: int = 1
) -> CorrelationMatrix:
    """Pairwise association magnitudes between every pair of metrics in ``table``."""
    if method not in CORRELATION_METHODS:
        raise ValueError(f"unknown correlation method {method!r}")
    ids = table.ids
    if len(table.timestamps) < 2:
        raise ValueError("correlation needs at least 2 samples")
    x = np.vstack([table.values[mid] for mid in ids]) if ids else np.zeros((0, len(table.timestamps)))
    n = len(ids)

    if method == "pearson":
        vals = _abs_pearson(x)
    elif method == "spearman":
        vals = _abs_pearson(stats.rankdata(x, axis=1))
    elif method == "kendall":
        vals = _pairwise(n, lambda i, j: _kendall_b(x[i], x[j]), threads)
    else:
        disc = [discretize(row, bins) for row in x]
        vals = _pairwise(n, lambda i, j: mutual_information(disc[i], disc[j]), threads)
        np.fill_diagonal(vals, [entropy(d) for d in disc])
        return CorrelationMatrix(method, vals, ids)

    vals = np.triu(vals, 1)
    vals = vals + vals.T
    np.fill_diagonal(vals, 1.0)
    return CorrelationMatrix(method, vals, ids)


def read_correlation_csv(path: str | Path, method: str) -> CorrelationMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    ids = [MetricId(*label.split("/", 1)) for label in labels]
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float).reshape(len(ids), len(ids))
    return CorrelationMatrix(method, vals, ids)
