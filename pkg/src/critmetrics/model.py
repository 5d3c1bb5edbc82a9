"""Domain types shared by every module.

All types are immutable once constructed. Numpy arrays held by a
:class:`MetricTable` are flagged read-only.
"""
from __future__ import annotations

import graphlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import CycleError, RootError, TopologyError, TraceError

CORRELATION_METHODS = ("pearson", "spearman", "kendall", "mutual_information")

# Correlation pruning thresholds for coverage, per method.
DEFAULT_THETA = {
    "mutual_information": 0.05,
    "pearson": 0.27,
    "spearman": 0.13,
    "kendall": 0.08,
}


@dataclass(frozen=True, order=True)
class MetricId:
    """A metric name namespaced by the microservice that emits it."""

    microservice: str
    name: str

    def __post_init__(self):
        if not self.microservice or not self.name:
            raise ValueError(f"empty metric id component: {self.microservice!r}/{self.name!r}")

    def __str__(self) -> str:
        return f"{self.microservice}/{self.name}"


@dataclass(frozen=True)
class MetricSeries:
    id: MetricId
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vs = np.asarray(self.values, dtype=float)
        if ts.ndim != 1 or ts.shape != vs.shape:
            raise ValueError(f"{self.id}: timestamps and values must be 1-D and equal length")
        if ts.size == 0:
            raise ValueError(f"{self.id}: series has no samples")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError(f"{self.id}: timestamps must be strictly increasing")
        if not np.all(np.isfinite(vs)):
            raise ValueError(f"{self.id}: non-finite sample value")
        ts.flags.writeable = False
        vs.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vs)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class MetricTable:
    """Metric series aligned on one shared timestamp grid."""

    timestamps: np.ndarray
    values: Mapping[MetricId, np.ndarray]

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        if ts.ndim != 1 or ts.size == 0:
            raise ValueError("metric table needs a non-empty 1-D timestamp grid")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamp grid must be strictly increasing")
        ts.flags.writeable = False
        frozen = {}
        for mid in sorted(self.values):
            arr = np.asarray(self.values[mid], dtype=float)
            if arr.shape != ts.shape:
                raise ValueError(f"{mid}: series length {arr.size} != grid length {ts.size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{mid}: non-finite sample value")
            arr = arr.copy()
            arr.flags.writeable = False
            frozen[mid] = arr
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", frozen)

    @classmethod
    def from_series(cls, series: Iterable[MetricSeries]) -> "MetricTable":
        series = list(series)
        if not series:
            raise ValueError("no series supplied")
        grid = series[0].timestamps
        for s in series[1:]:
            if not np.array_equal(s.timestamps, grid):
                raise ValueError(f"{s.id}: not aligned with the common grid")
        if len({s.id for s in series}) != len(series):
            raise ValueError("duplicate metric id")
        return cls(grid, {s.id: s.values for s in series})

    @property
    def sigma(self) -> frozenset[MetricId]:
        return frozenset(self.values)

    @property
    def ids(self) -> list[MetricId]:
        """Metric ids in canonical (sorted) order."""
        return list(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, mid: object) -> bool:
        return mid in self.values

    def series(self, mid: MetricId) -> MetricSeries:
        return MetricSeries(mid, self.timestamps, self.values[mid])

    def microservices(self) -> list[str]:
        return sorted({mid.microservice for mid in self.values})

    def metrics_of(self, microservice: str) -> list[MetricId]:
        return [mid for mid in self.values if mid.microservice == microservice]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MetricTable):
            return NotImplemented
        return (
            np.array_equal(self.timestamps, other.timestamps)
            and list(self.values) == list(other.values)
            and all(np.array_equal(self.values[k], other.values[k]) for k in self.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class Topology:
    """Application call graph: a DAG with exactly one in-degree-0 root."""

    microservices: frozenset[str]
    edges: frozenset[tuple[str, str]]
    root: str

    def __post_init__(self):
        object.__setattr__(self, "microservices", frozenset(self.microservices))
        object.__setattr__(self, "edges", frozenset((u, v) for u, v in self.edges))
        for u, v in self.edges:
            if u not in self.microservices or v not in self.microservices:
                raise TopologyError(f"edge ({u}, {v}) references an unknown microservice")
            if u == v:
                raise CycleError(f"self-loop on {u}")
        roots = _roots(self.microservices, self.edges)
        if len(roots) != 1:
            raise RootError(f"expected exactly one root, found {len(roots)}: {roots}")
        _check_acyclic(self.microservices, self.edges)
        if self.root != roots[0]:
            raise RootError(f"declared root {self.root!r} is not the in-degree-0 node {roots[0]!r}")

    @classmethod
    def from_edges(
        cls, edges: Iterable[Sequence[str]], microservices: Iterable[str] = ()
    ) -> "Topology":
        """Build a topology, inferring the root as the unique in-degree-0 node."""
        edge_set = frozenset((str(u), str(v)) for u, v in edges)
        nodes = set(microservices)
        for u, v in edge_set:
            nodes.update((u, v))
        if not nodes:
            raise RootError("topology has no microservices")
        _check_acyclic(nodes, edge_set)
        roots = _roots(nodes, edge_set)
        if len(roots) != 1:
            raise RootError(f"expected exactly one root, found {len(roots)}: {roots}")
        return cls(frozenset(nodes), edge_set, roots[0])

    def successors(self, node: str) -> list[str]:
        return sorted(v for u, v in self.edges if u == node)

    def predecessors(self, node: str) -> list[str]:
        return sorted(u for u, v in self.edges if v == node)

    def ancestors(self, node: str) -> frozenset[str]:
        """Every microservice with a directed path to ``node`` (excluding it)."""
        seen: set[str] = set()
        stack = self.predecessors(node)
        while stack:
            u = stack.pop()
            if u not in seen:
                seen.add(u)
                stack.extend(self.predecessors(u))
        return frozenset(seen)

    def check_trace(self, trace: "Trace") -> None:
        if trace.hops[0] != self.root:
            raise TraceError(f"trace {trace.trace_id}: starts at {trace.hops[0]!r}, root is {self.root!r}")
        for u, v in zip(trace.hops, trace.hops[1:]):
            if (u, v) not in self.edges:
                raise TraceError(f"trace {trace.trace_id}: hop ({u}, {v}) is not a topology edge")


def _roots(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[str]:
    targets = {v for _, v in edges}
    return sorted(n for n in nodes if n not in targets)


def _check_acyclic(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> None:
    sorter = graphlib.TopologicalSorter({n: () for n in nodes})
    for u, v in edges:
        sorter.add(v, u)
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        raise CycleError(f"topology contains a cycle: {exc.args[1]}") from None


@dataclass(frozen=True)
class Trace:
    trace_id: str
    hops: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "hops", tuple(self.hops))
        if not self.hops:
            raise ValueError(f"trace {self.trace_id}: no hops")
        if not all(isinstance(h, str) and h for h in self.hops):
            raise ValueError(f"trace {self.trace_id}: hops must be non-empty strings")


@dataclass(frozen=True)
class TraceSet:
    traces: tuple[Trace, ...]
    # Malformed lines dropped by the loader; not part of equality.
    skipped: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self) -> Iterator[Trace]:
        return iter(self.traces)


@dataclass(frozen=True)
class PathRecord:
    """One per-path selection run for a microservice."""

    path: tuple[str, ...]
    probability: float
    epsilon: float
    selected: frozenset[MetricId]


@dataclass(frozen=True)
class SubsetMapping:
    """Selected metrics per microservice, with per-path provenance."""

    assignments: Mapping[str, frozenset[MetricId]]
    provenance: Mapping[str, tuple[PathRecord, ...]] = field(default_factory=dict)

    def __post_init__(self):
        assignments = {m: frozenset(ids) for m, ids in sorted(self.assignments.items())}
        for m, ids in assignments.items():
            foreign = [str(i) for i in ids if i.microservice != m]
            if foreign:
                raise ValueError(f"metrics {foreign} assigned to {m!r} belong to another microservice")
        object.__setattr__(self, "assignments", assignments)
        object.__setattr__(
            self, "provenance", {m: tuple(recs) for m, recs in sorted(self.provenance.items())}
        )

    def total_size(self) -> int:
        return total_size(self)

    def metrics(self) -> frozenset[MetricId]:
        out: set[MetricId] = set()
        for ids in self.assignments.values():
            out |= ids
        return frozenset(out)

    def __getitem__(self, microservice: str) -> frozenset[MetricId]:
        return self.assignments.get(microservice, frozenset())


def total_size(mapping: SubsetMapping) -> int:
    """Sum of per-microservice subset sizes."""
    return sum(len(ids) for ids in mapping.assignments.values())


@dataclass(frozen=True)
class AimdParams:
    tau: float = 5.0
    alpha: float = 0.4
    beta: float = 0.005
    eta: int = 100
    epsilon0: float = 0.5
    theta: float | None = None
    correlation_method: str = "mutual_information"
    bins: int = 10

    def __post_init__(self):
        if self.correlation_method not in CORRELATION_METHODS:
            raise ValueError(f"unknown correlation method {self.correlation_method!r}")
        if self.theta is None:
            object.__setattr__(self, "theta", DEFAULT_THETA[self.correlation_method])
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie in (0, 1)")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if int(self.eta) != self.eta or self.eta < 1:
            raise ValueError("eta must be a positive integer")
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise ValueError("tau must be non-negative")
        if not (self.epsilon0 > 0 and math.isfinite(self.epsilon0)):
            raise ValueError("epsilon0 must be positive")
        # MI is stored in bits, so its threshold may exceed 1.
        upper = math.inf if self.correlation_method == "mutual_information" else 1.0
        if not 0.0 <= self.theta <= upper:
            raise ValueError(f"theta must lie in [0, {upper}]")
        if int(self.bins) != self.bins or self.bins < 1:
            raise ValueError("bins must be a positive integer")


@dataclass(frozen=True)
class AimdRecord:
    iteration: int
    epsilon: float
    mapping: SubsetMapping
    xi: int
    coverage: float
    within_tolerance: bool


@dataclass(frozen=True)
class AimdLog:
    iterations: tuple[AimdRecord, ...]
    sigma_size: int

    def __len__(self) -> int:
        return len(self.iterations)

    def __iter__(self) -> Iterator[AimdRecord]:
        return iter(self.iterations)


@dataclass(frozen=True)
class AnomalyLabelSet:
    impacted: frozenset[MetricId] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "impacted", frozenset(self.impacted))

    def __len__(self) -> int:
        return len(self.impacted)
