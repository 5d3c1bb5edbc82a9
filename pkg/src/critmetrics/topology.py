"""Topology-aware selection: levels, root paths, trace path probabilities."""
from __future__ import annotations

import graphlib
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import PathExplosionError, ZeroSupportError
from .infotheory import DEFAULT_BINS, InfoCache
from .model import MetricTable, PathRecord, SubsetMapping, Topology, TraceSet
from .selection import select_subset

DEFAULT_PATH_CAP = 10_000


def topo_levels(t: Topology) -> dict[str, int]:
    """Longest-path distance from the root for every microservice."""
    sorter = graphlib.TopologicalSorter({n: () for n in t.microservices})
    for u, v in t.edges:
        sorter.add(v, u)
    level = {t.root: 0}
    for node in sorter.static_order():
        preds = t.predecessors(node)
        if preds:
            level[node] = 1 + max(level[p] for p in preds)
    return dict(sorted(level.items()))


def processing_order(t: Topology) -> list[str]:
    levels = topo_levels(t)
    return sorted(levels, key=lambda n: (levels[n], n))


def enumerate_paths(t: Topology, target: str, cap: int = DEFAULT_PATH_CAP) -> list[tuple[str, ...]]:
    """All root-to-``target`` paths in lexicographic order of hop names.

    Raises:
        PathExplosionError: more than ``cap`` paths exist.
    """
    if target not in t.microservices:
        raise KeyError(f"unknown microservice {target!r}")
    allowed = t.ancestors(target) | {target}
    paths: list[tuple[str, ...]] = []
    stack: list[tuple[str, ...]] = [(t.root,)]
    while stack:
        path = stack.pop()
        node = path[-1]
        if node == target:
            paths.append(path)
            if len(paths) > cap:
                raise PathExplosionError(f"more than {cap} paths from {t.root} to {target}")
            continue
        # reversed so the smallest successor is expanded first
        for nxt in reversed(t.successors(node)):
            if nxt in allowed:
                stack.append(path + (nxt,))
    return sorted(paths)


@dataclass(frozen=True)
class PathProbabilityModel:
    root: str
    root_prob: float
    cond: Mapping[tuple[str, str], float]


def estimate_path_model(traces: TraceSet, t: Topology) -> PathProbabilityModel:
    """Estimate edge conditionals as (#traces with hop u->v) / (#traces visiting u)."""
    if len(traces) == 0:
        raise ZeroSupportError("cannot estimate path probabilities from zero traces")
    visits: Counter[str] = Counter()
    hops: Counter[tuple[str, str]] = Counter()
    starts = 0
    for trace in traces:
        t.check_trace(trace)
        starts += trace.hops[0] == t.root
        visits.update(set(trace.hops))
        hops.update(set(zip(trace.hops, trace.hops[1:])))
    cond = {edge: hops[edge] / visits[edge[0]] for edge in sorted(hops)}
    return PathProbabilityModel(t.root, starts / len(traces), cond)


def path_probability(model: PathProbabilityModel, rho: Sequence[str]) -> float:
    """Root probability times the product of edge conditionals along ``rho``."""
    if not rho or rho[0] != model.root:
        raise ValueError(f"path must start at root {model.root!r}")
    p = model.root_prob
    for edge in zip(rho, rho[1:]):
        c = model.cond.get(edge)
        if not c:
            raise ZeroSupportError(f"edge {edge[0]}->{edge[1]} never observed in traces")
        p *= c
    if p <= 0:
        raise ZeroSupportError(f"path {'->'.join(rho)} has zero probability")
    return p


def topology_aware_select(
    t: Topology,
    table: MetricTable,
    traces: TraceSet,
    epsilon: float,
    *,
    bins: int = DEFAULT_BINS,
    path_cap: int = DEFAULT_PATH_CAP,
    model: PathProbabilityModel | None = None,
    cache: InfoCache | None = None,
) -> SubsetMapping:
    """Select metrics for every microservice in level order.

    The root is selected with an empty pivot at ``epsilon``. Every other
    microservice uses the union of its ancestors' selections as pivot and
    runs one greedy selection per root path at ``epsilon / P(path)``; its
    subset is the union of those runs.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    model = estimate_path_model(traces, t) if model is None else model
    cache = InfoCache.from_table(table, bins) if cache is None else cache

    def own(m: str):
        return [(mid, cache.series(mid)) for mid in table.metrics_of(m)]

    assignments: dict[str, frozenset] = {}
    provenance: dict[str, tuple[PathRecord, ...]] = {}
    for m in processing_order(t):
        if m == t.root:
            chosen = select_subset(m, own(m), (), epsilon, cache=cache)
            assignments[m] = chosen
            provenance[m] = (PathRecord((m,), model.root_prob, epsilon, chosen),)
            continue
        pivot = frozenset().union(*(assignments[a] for a in t.ancestors(m)))
        records = []
        gamma: frozenset = frozenset()
        for rho in enumerate_paths(t, m, path_cap):
            p = path_probability(model, rho)
            eps_rho = epsilon / p
            chosen = select_subset(m, own(m), pivot, eps_rho, cache=cache)
            records.append(PathRecord(rho, p, eps_rho, chosen))
            gamma |= chosen
        assignments[m] = gamma
        provenance[m] = tuple(records)
    return SubsetMapping(assignments, provenance)
