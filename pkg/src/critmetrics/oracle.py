"""Exact reference solvers for desk-scale instances.

Everything here is evaluated straight from the definitions, with plain
loops over observed symbols, so it shares no code path with the fast
implementations it is used to check.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import LengthMismatchError, SizeCapError
from .infotheory import DiscreteSeries
from .model import MetricId

MAX_METRICS = 20


def naive_entropy(symbols: Sequence[int]) -> float:
    n = len(symbols)
    h = 0.0
    for count in Counter(int(s) for s in symbols).values():
        p = count / n
        h -= p * math.log2(p)
    return h


def naive_mutual_information(a: Sequence[int], b: Sequence[int]) -> float:
    if len(a) != len(b):
        raise LengthMismatchError(f"series lengths differ: {len(a)} != {len(b)}")
    n = len(a)
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    total = 0.0
    for x in set(a):
        px = a.count(x) / n
        for y in set(b):
            py = b.count(y) / n
            pxy = sum(1 for i in range(n) if a[i] == x and b[i] == y) / n
            if pxy > 0:
                total += pxy * math.log2(pxy / (px * py))
    return total


def naive_coverage(
    selected: Iterable[MetricId],
    universe: Iterable[MetricId],
    theta_of,
    theta: float,
) -> float:
    """Coverage by the set definition; ``theta_of(a, b)`` gives the association."""
    selected = set(selected)
    universe = list(universe)
    covered = [k for k in universe if k in selected or any(theta_of(k, s) > theta for s in selected if s != k)]
    return len(covered) / len(universe) if universe else 0.0


def _symbols(d: DiscreteSeries | Sequence[int]) -> list[int]:
    return [int(s) for s in (d.symbols if isinstance(d, DiscreteSeries) else d)]


def pairwise_mi(series: Mapping[MetricId, DiscreteSeries | Sequence[int]]) -> dict[tuple[MetricId, MetricId], float]:
    ids = sorted(series)
    syms = {mid: _symbols(series[mid]) for mid in ids}
    return {(a, b): naive_mutual_information(syms[a], syms[b]) for a, b in itertools.combinations(ids, 2)}


def objective(subset: Iterable[MetricId], series: Mapping[MetricId, DiscreteSeries | Sequence[int]]) -> float:
    """Sum of mutual information over distinct unordered pairs in ``subset``.

    Pairs are summed in sorted-id order, the same order :func:`solve_exact`
    accumulates in, so equal subsets always score bit-identically.
    """
    ids = sorted(subset)
    total = 0.0
    for a, b in itertools.combinations(ids, 2):
        total += naive_mutual_information(_symbols(series[a]), _symbols(series[b]))
    return total


def check_feasible(
    subset: Iterable[MetricId],
    series: Mapping[MetricId, DiscreteSeries | Sequence[int]],
    epsilon: float,
    chi: int,
) -> bool:
    """True iff every pair has MI at most ``epsilon`` and the subset has at most ``chi`` members."""
    ids = sorted(set(subset))
    if len(ids) > chi:
        return False
    return all(
        naive_mutual_information(_symbols(series[a]), _symbols(series[b])) <= epsilon
        for a, b in itertools.combinations(ids, 2)
    )


@dataclass(frozen=True)
class OracleProblem:
    metrics: tuple[tuple[MetricId, DiscreteSeries], ...]
    epsilon: float
    chi: int

    def __post_init__(self):
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if len(self.metrics) > MAX_METRICS:
            raise SizeCapError(f"exact solver is capped at {MAX_METRICS} metrics, got {len(self.metrics)}")
        if len({mid for mid, _ in self.metrics}) != len(self.metrics):
            raise ValueError("duplicate metric id")
        if self.chi < 1:
            raise ValueError("chi must be a positive integer")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


def solve_exact(p: OracleProblem) -> tuple[frozenset[MetricId], float]:
    """Enumerate every subset and return the best feasible one.

    Best means largest pairwise-MI sum, then most members, then the
    lexicographically smallest sorted id tuple. The empty set only wins
    when no metric is supplied.
    """
    if len(p.metrics) > MAX_METRICS:
        raise SizeCapError(f"exact solver is capped at {MAX_METRICS} metrics")
    ids = sorted(mid for mid, _ in p.metrics)
    n = len(ids)
    if n == 0:
        return frozenset(), 0.0
    series = dict(p.metrics)
    mi = pairwise_mi(series)

    masks = np.arange(1, 1 << n, dtype=np.int64)
    bits = [((masks >> i) & 1).astype(bool) for i in range(n)]
    size = np.sum(bits, axis=0)
    feasible = size <= p.chi
    score = np.zeros(masks.size)
    # pairs in canonical order so sums do not depend on input order
    for i, j in itertools.combinations(range(n), 2):
        both = bits[i] & bits[j]
        v = mi[(ids[i], ids[j])]
        if v > p.epsilon:
            feasible &= ~both
        score[both] += v

    best = score[feasible].max()
    tied = masks[feasible & (score == best)]

    def key(mask: int):
        members = tuple(ids[i] for i in range(n) if mask >> i & 1)
        return (-len(members), members)

    winner = min((int(m) for m in tied), key=key)
    chosen = frozenset(ids[i] for i in range(n) if winner >> i & 1)
    return chosen, objective(chosen, series)
