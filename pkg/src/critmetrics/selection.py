"""Greedy per-microservice metric selection against a pivot set."""
from __future__ import annotations

import logging
from typing import Iterable, Mapping, Sequence

from .errors import UnresolvedPivotError
from .infotheory import DiscreteSeries, InfoCache
from .model import MetricId

log = logging.getLogger(__name__)


def entropy_order(metrics: Iterable[MetricId], cache: InfoCache) -> list[MetricId]:
    """Positive-entropy metrics by non-increasing entropy, ties by id."""
    scored = [(cache.entropy(mid), mid) for mid in metrics]
    return [mid for h, mid in sorted(scored, key=lambda t: (-t[0], t[1])) if h > 0.0]


def select_subset(
    m: str,
    metrics: Sequence[tuple[MetricId, DiscreteSeries]],
    pivot: Iterable[MetricId],
    epsilon: float,
    pivot_series: Mapping[MetricId, DiscreteSeries] | None = None,
    cache: InfoCache | None = None,
) -> frozenset[MetricId]:
    """Select a low-redundancy subset of the metrics of microservice ``m``.

    Zero-entropy metrics are dropped and the rest are scanned from highest
    to lowest entropy. With an empty pivot the highest-entropy metric seeds
    the subset. A candidate is admitted when its mutual information with
    every already-selected metric and every pivot metric is at most
    ``epsilon``.

    Args:
        m: microservice name (used for diagnostics).
        metrics: ``(id, discretized series)`` for every metric of ``m``.
        pivot: metric ids already selected upstream.
        epsilon: admission threshold in bits.
        pivot_series: discretized series for the pivot metrics. May be
            omitted when ``cache`` already holds them.
        cache: shared memo of entropies and pairwise MI. Series in
            ``metrics`` and ``pivot_series`` are added to it.

    Raises:
        UnresolvedPivotError: a pivot id has no series.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    cache = InfoCache() if cache is None else cache
    for mid, d in metrics:
        cache.add(mid, d)
    pivot = sorted(set(pivot))
    for mid in pivot:
        if pivot_series is not None and mid in pivot_series:
            cache.add(mid, pivot_series[mid])
        elif mid not in cache:
            raise UnresolvedPivotError(f"{m}: pivot metric {mid} has no series")

    pivot_set = set(pivot)
    ordered = [mid for mid in entropy_order((mid for mid, _ in metrics), cache) if mid not in pivot_set]
    selected: list[MetricId] = []
    if not pivot and ordered:
        selected.append(ordered[0])

    for candidate in ordered[len(selected):]:
        if all(cache.mi(other, candidate) <= epsilon for other in (*selected, *pivot)):
            selected.append(candidate)

    if pivot and not selected and ordered:
        log.debug("%s: every candidate redundant with the pivot at epsilon=%g", m, epsilon)
    return frozenset(selected)
