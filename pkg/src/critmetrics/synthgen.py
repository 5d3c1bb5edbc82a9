"""Deterministic synthetic bundles: topology, traces, metrics and anomaly labels.

Time is compressed so one "minute" is four samples at a nominal 15 s
cadence. Healthy stretches last 10 to 30 minutes; with probability
``anomaly_rate`` each one is followed by an anomaly of 1 to 10 minutes,
both durations uniform. An anomaly shifts one redundancy group's base
signal by ``anomaly_shift`` base standard deviations, up for ``*_spike``
kinds and down for ``*_drop`` kinds, so every member of that group is
directly perturbed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SpecError
from .ingest import write_anomaly_labels, write_metrics, write_topology, write_traces
from .model import AnomalyLabelSet, MetricId, MetricTable, Topology, Trace, TraceSet

ANOMALY_KINDS = (
    "cpu_spike", "memory_spike", "latency_spike", "error_spike",
    "cpu_drop", "memory_drop", "latency_drop", "error_drop",
)
# group signal families, in the order groups are created per service
FAMILIES = ("cpu", "memory", "latency", "error", "network", "disk", "requests", "threads")
_LEVEL = {"cpu": 0.4, "memory": 512.0, "latency": 120.0, "error": 2.0,
          "network": 900.0, "disk": 40.0, "requests": 300.0, "threads": 64.0}

SAMPLES_PER_MINUTE = 4
SAMPLE_INTERVAL = 15
START_TS = 1_700_000_000

BUNDLE_FILES = {
    "metrics": "metrics.csv",
    "traces": "traces.jsonl",
    "topology": "topology.json",
    "labels": "labels.csv",
}


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    services: int = 5
    # edge -> probability of calling that child next; empty means random DAG
    branch_probs: dict[tuple[str, str], float] = field(default_factory=dict)
    metrics_per_service: int = 12
    redundancy_groups: int = 3
    group_size: int = 3
    constant_metrics: int = 2
    noise_sigma: float = 0.05
    samples: int = 1000
    traces: int = 2000
    anomaly_kinds: tuple[str, ...] = ANOMALY_KINDS
    anomaly_rate: float = 0.0
    anomaly_shift: float = 6.0
    # probability a generated walk stops at a node that has children
    stop_prob: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "branch_probs", {tuple(k): float(v) for k, v in self.branch_probs.items()})
        object.__setattr__(self, "anomaly_kinds", tuple(self.anomaly_kinds))
        if self.services < 1:
            raise SpecError("services must be positive")
        if self.metrics_per_service < 1 or self.samples < 2 or self.traces < 1:
            raise SpecError("metrics_per_service, samples and traces must be positive (samples >= 2)")
        if self.redundancy_groups < 0 or self.group_size < 1 or self.constant_metrics < 0:
            raise SpecError("group counts must be non-negative")
        if self.redundancy_groups > self.metrics_per_service:
            raise SpecError("redundancy_groups exceeds metrics_per_service")
        if self.redundancy_groups * self.group_size + self.constant_metrics > self.metrics_per_service:
            raise SpecError("groups plus constant metrics do not fit in metrics_per_service")
        if self.redundancy_groups > len(FAMILIES):
            raise SpecError(f"at most {len(FAMILIES)} redundancy groups per service")
        if self.noise_sigma < 0 or not 0.0 <= self.anomaly_rate <= 1.0:
            raise SpecError("noise_sigma must be >= 0 and anomaly_rate in [0, 1]")
        if not 0.0 <= self.stop_prob < 1.0:
            raise SpecError("stop_prob must lie in [0, 1)")
        bad = [k for k in self.anomaly_kinds if k not in ANOMALY_KINDS]
        if bad:
            raise SpecError(f"unknown anomaly kinds: {bad}")
        if self.anomaly_rate > 0 and (not self.anomaly_kinds or self.redundancy_groups == 0):
            raise SpecError("anomalies need at least one kind and one redundancy group")
        out: dict[str, float] = {}
        for (u, _), p in self.branch_probs.items():
            if not 0.0 < p <= 1.0:
                raise SpecError(f"branch probability {p} outside (0, 1]")
            out[u] = out.get(u, 0.0) + p
        over = {u: s for u, s in out.items() if s > 1.0 + 1e-12}
        if over:
            raise SpecError(f"branch probabilities out of {sorted(over)} sum to more than 1")
        if self.branch_probs:
            nodes = {n for edge in self.branch_probs for n in edge}
            if len(nodes) != self.services:
                raise SpecError(f"branch_probs name {len(nodes)} services, spec says {self.services}")


@dataclass(frozen=True)
class SynthBundle:
    topology: Topology
    traces: TraceSet
    table: MetricTable
    labels: AnomalyLabelSet
    # ground truth: per service, the member ids of each redundancy group
    groups: dict[str, tuple[tuple[MetricId, ...], ...]]
    constants: frozenset[MetricId]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {k: out / name for k, name in BUNDLE_FILES.items()}
        write_metrics(self.table, paths["metrics"])
        write_traces(self.traces, paths["traces"])
        write_topology(self.topology, paths["topology"])
        write_anomaly_labels(self.labels, paths["labels"])
        return paths


def service_names(n: int) -> list[str]:
    width = max(2, len(str(n - 1)))
    return [f"svc{i:0{width}d}" for i in range(n)]


def _random_dag(spec: SynthSpec, rng: np.random.Generator) -> dict[tuple[str, str], float]:
    names = service_names(spec.services)
    edges: set[tuple[str, str]] = set()
    for i in range(1, len(names)):
        edges.add((names[int(rng.integers(0, i))], names[i]))
        # occasional second parent makes multi-path nodes
        if i >= 2 and rng.random() < 0.3:
            edges.add((names[int(rng.integers(0, i))], names[i]))
    probs: dict[tuple[str, str], float] = {}
    for u in names:
        kids = sorted(v for a, v in edges if a == u)
        if kids:
            w = rng.dirichlet(np.full(len(kids), 4.0)) * (1.0 - spec.stop_prob)
            probs.update({(u, v): float(p) for v, p in zip(kids, w)})
    return probs


def _walk(root: str, children: dict[str, list[tuple[str, float]]], rng: np.random.Generator) -> list[str]:
    hops = [root]
    while children.get(hops[-1]):
        options = children[hops[-1]]
        r = rng.random()
        acc = 0.0
        nxt = None
        for v, p in options:
            acc += p
            if r < acc:
                nxt = v
                break
        if nxt is None:
            break
        hops.append(nxt)
    return hops


def _base_signal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Standardized AR(1) process."""
    x = np.empty(n)
    x[0] = rng.normal()
    shocks = rng.normal(size=n)
    for i in range(1, n):
        x[i] = 0.9 * x[i - 1] + shocks[i]
    return (x - x.mean()) / x.std()


def _anomaly_windows(spec: SynthSpec, rng: np.random.Generator) -> list[tuple[int, int, str]]:
    """(start, stop, kind) sample windows following the healthy/anomaly cycle."""
    windows = []
    t = 0
    while True:
        t += int(round(rng.uniform(10, 30) * SAMPLES_PER_MINUTE))
        if t >= spec.samples:
            break
        if rng.random() < spec.anomaly_rate:
            length = max(1, int(round(rng.uniform(1, 10) * SAMPLES_PER_MINUTE)))
            kind = spec.anomaly_kinds[int(rng.integers(0, len(spec.anomaly_kinds)))]
            windows.append((t, min(t + length, spec.samples), kind))
            t += length
    return windows


def generate(spec: SynthSpec) -> SynthBundle:
    """Build a reproducible bundle from ``spec``; identical specs give identical bundles."""
    rng = np.random.default_rng(spec.seed)
    probs = dict(sorted(spec.branch_probs.items())) or _random_dag(spec, rng)
    if spec.services == 1 and not probs:
        topology = Topology.from_edges([], service_names(1))
    else:
        topology = Topology.from_edges(probs)
    names = sorted(topology.microservices)

    children: dict[str, list[tuple[str, float]]] = {}
    for (u, v), p in sorted(probs.items()):
        children.setdefault(u, []).append((v, p))
    width = len(str(spec.traces))
    traces = TraceSet(tuple(
        Trace(f"t{i:0{width}d}", tuple(_walk(topology.root, children, rng))) for i in range(spec.traces)
    ))

    n = spec.samples
    values: dict[MetricId, np.ndarray] = {}
    groups: dict[str, tuple[tuple[MetricId, ...], ...]] = {}
    bases: dict[tuple[str, int], np.ndarray] = {}
    constants: set[MetricId] = set()
    for svc in names:
        svc_groups = []
        for g in range(spec.redundancy_groups):
            bases[(svc, g)] = _base_signal(n, rng)
            svc_groups.append(tuple(MetricId(svc, f"{FAMILIES[g]}_{k}") for k in range(spec.group_size)))
        groups[svc] = tuple(svc_groups)
        for c in range(spec.constant_metrics):
            mid = MetricId(svc, f"const_{c}")
            values[mid] = np.full(n, float(c + 1))
            constants.add(mid)
    free = spec.metrics_per_service - spec.redundancy_groups * spec.group_size - spec.constant_metrics

    impacted: set[MetricId] = set()
    if spec.anomaly_rate > 0:
        for start, stop, kind in _anomaly_windows(spec, rng):
            family = kind.split("_")[0]
            svc = names[int(rng.integers(0, len(names)))]
            g = FAMILIES.index(family) if FAMILIES.index(family) < spec.redundancy_groups \
                else int(rng.integers(0, spec.redundancy_groups))
            sign = 1.0 if kind.endswith("spike") else -1.0
            bases[(svc, g)][start:stop] += sign * spec.anomaly_shift
            impacted.update(groups[svc][g])

    for svc in names:
        for g, members in enumerate(groups[svc]):
            family = FAMILIES[g]
            level = _LEVEL[family]
            scale = 0.1 * level
            base = bases[(svc, g)]
            for mid in members:
                noise = rng.normal(scale=spec.noise_sigma, size=n) if spec.noise_sigma > 0 else 0.0
                values[mid] = level + scale * (base + noise)
        for k in range(free):
            values[MetricId(svc, f"aux_{k}")] = 10.0 + _base_signal(n, rng)

    # keeps the CSV compact
    values = {mid: np.round(v, 6) for mid, v in values.items()}
    timestamps = START_TS + SAMPLE_INTERVAL * np.arange(n, dtype=np.int64)
    table = MetricTable(timestamps, values)
    return SynthBundle(topology, traces, table, AnomalyLabelSet(frozenset(impacted)), groups, frozenset(constants))


def diamond_spec(p_left: float = 0.5, **kw) -> SynthSpec:
    """Four-service diamond a->{b,c}->d with the given left-branch probability."""
    probs = {("a", "b"): p_left, ("a", "c"): 1.0 - p_left, ("b", "d"): 1.0, ("c", "d"): 1.0}
    return SynthSpec(services=4, branch_probs=probs, **kw)


def parse_branch_probs(text: str) -> dict[tuple[str, str], float]:
    """Parse ``"a>b=0.5,a>c=0.5"``."""
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            edge, p = item.split("=")
            u, v = edge.split(">")
            out[(u.strip(), v.strip())] = float(p)
        except ValueError:
            raise SpecError(f"bad branch probability {item!r}; expected parent>child=p") from None
        if not math.isfinite(out[(u.strip(), v.strip())]):
            raise SpecError(f"non-finite branch probability in {item!r}")
    return out
