"""File loaders (and writers) for metrics, traces, topology and anomaly labels.

Formats:

* metrics CSV, long form: ``timestamp,microservice,metric,value``
* traces JSONL: ``{"trace_id": "...", "hops": ["svc1", "svc2", ...]}`` per line
* topology JSON: ``{"edges": [["a", "b"], ...]}``, optional ``"microservices"``
* anomaly labels CSV: ``microservice,metric``
"""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import reduce
from pathlib import Path

import numpy as np

from .errors import AlignmentError, ParseError, UnknownMetricError
from .model import AnomalyLabelSet, MetricId, MetricTable, Topology, Trace, TraceSet

log = logging.getLogger(__name__)

METRICS_HEADER = ("timestamp", "microservice", "metric", "value")
LABELS_HEADER = ("microservice", "metric")
ALIGNMENTS = ("intersect", "forward_fill")


@dataclass(frozen=True)
class IngestConfig:
    resample_interval: int = 15
    alignment: str = "intersect"
    max_gap: int = 60

    def __post_init__(self):
        if self.resample_interval <= 0:
            raise ValueError("resample_interval must be positive")
        if self.max_gap <= 0:
            raise ValueError("max_gap must be positive")
        if self.alignment not in ALIGNMENTS:
            raise ValueError(f"alignment must be one of {ALIGNMENTS}")


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file") from None
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None


def load_metrics(path: str | Path, cfg: IngestConfig | None = None) -> MetricTable:
    """Load a long-form metrics CSV and align every series onto one grid."""
    cfg = cfg or IngestConfig()
    rows = csv.reader(_read_text(path).splitlines())
    header = next(rows, None)
    if header is None or tuple(h.strip() for h in header) != METRICS_HEADER:
        raise ParseError(f"{path}: expected header {','.join(METRICS_HEADER)}")

    raw: dict[MetricId, dict[int, float]] = defaultdict(dict)
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
        ts_text, svc, name, val_text = (c.strip() for c in row)
        try:
            ts = int(ts_text)
            value = float(val_text)
            mid = MetricId(svc, name)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if not math.isfinite(value):
            raise ParseError(f"{path}:{lineno}: non-finite value {val_text!r}")
        if ts in raw[mid]:
            raise ParseError(f"{path}:{lineno}: duplicate timestamp {ts} for {mid}")
        raw[mid][ts] = value
    if not raw:
        raise ParseError(f"{path}: no metric samples")

    series = {mid: dict(sorted(samples.items())) for mid, samples in raw.items()}
    if cfg.alignment == "intersect":
        grid = sorted(reduce(lambda a, b: a & b, (set(s) for s in series.values())))
        if not grid:
            raise AlignmentError(f"{path}: series share no common timestamps")
        values = {mid: [s[t] for t in grid] for mid, s in series.items()}
        return MetricTable(np.array(grid), values)
    return _forward_fill(path, series, cfg)


def _forward_fill(path, series: dict[MetricId, dict[int, float]], cfg: IngestConfig) -> MetricTable:
    # Grid spans from the latest series start to the latest sample, so every
    # series has an observation to carry forward from the first grid point.
    start = max(min(s) for s in series.values())
    stop = max(max(s) for s in series.values())
    grid = np.arange(start, stop + 1, cfg.resample_interval, dtype=np.int64)
    keep = np.ones(grid.size, dtype=bool)
    filled = {}
    for mid, samples in series.items():
        ts = np.fromiter(samples, dtype=np.int64)
        vs = np.fromiter(samples.values(), dtype=float)
        pos = np.searchsorted(ts, grid, side="right") - 1
        ok = (pos >= 0) & (grid - ts[np.maximum(pos, 0)] <= cfg.max_gap)
        if not ok.any():
            raise AlignmentError(f"{path}: {mid} has no samples within max_gap of the common grid")
        keep &= ok
        filled[mid] = vs[np.maximum(pos, 0)]
    if not keep.any():
        raise AlignmentError(f"{path}: no grid point is covered by every series within max_gap")
    return MetricTable(grid[keep], {mid: v[keep] for mid, v in filled.items()})


def write_metrics(table: MetricTable, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for mid in table.ids:
            for ts, v in zip(table.timestamps, table.values[mid]):
                writer.writerow([int(ts), mid.microservice, mid.name, repr(float(v))])


def _parse_trace(line: str) -> Trace:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("trace record is not an object")
    hops = obj["hops"]
    if not isinstance(hops, list):
        raise ValueError("hops is not a list")
    return Trace(str(obj["trace_id"]), tuple(hops))


def load_traces(path: str | Path) -> TraceSet:
    """Load JSONL traces, skipping malformed lines.

    Raises:
        ParseError: more than half of the non-blank lines are malformed, or
            no valid trace remains.
    """
    traces, bad, total = [], 0, 0
    for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        total += 1
        try:
            traces.append(_parse_trace(line))
        except (ValueError, KeyError, TypeError) as exc:
            bad += 1
            log.warning("%s:%d: skipping malformed trace (%s)", path, lineno, exc)
    if total and bad / total > 0.5:
        raise ParseError(f"{path}: {bad} of {total} trace lines malformed")
    if not traces:
        raise ParseError(f"{path}: no traces")
    if bad:
        log.warning("%s: skipped %d malformed trace line(s)", path, bad)
    return TraceSet(tuple(traces), skipped=bad)


def write_traces(traces: TraceSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(json.dumps({"trace_id": t.trace_id, "hops": list(t.hops)}) + "\n")


def load_topology(path: str | Path) -> Topology:
    try:
        data = json.loads(_read_text(path))
        edges = [tuple(e) for e in data["edges"]]
        nodes = data.get("microservices", [])
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed topology ({exc})") from None
    if any(len(e) != 2 or not all(isinstance(x, str) and x for x in e) for e in edges):
        raise ParseError(f"{path}: every edge must be a pair of microservice names")
    return Topology.from_edges(edges, nodes)


def write_topology(t: Topology, path: str | Path) -> None:
    data = {"edges": [list(e) for e in sorted(t.edges)], "microservices": sorted(t.microservices)}
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def derive_topology(traces: TraceSet) -> Topology:
    """Topology whose edges are the consecutive hop pairs seen in ``traces``."""
    if len(traces) == 0:
        raise ParseError("cannot derive a topology from zero traces")
    nodes, edges = set(), set()
    for t in traces:
        nodes.update(t.hops)
        edges.update(zip(t.hops, t.hops[1:]))
    return Topology.from_edges(edges, nodes)


def check_traces(traces: TraceSet, t: Topology) -> None:
    for trace in traces:
        t.check_trace(trace)


def load_anomaly_labels(path: str | Path, table: MetricTable) -> AnomalyLabelSet:
    text = _read_text(path)
    rows = [r for r in csv.reader(text.splitlines()) if r]
    if not rows:
        return AnomalyLabelSet()
    if tuple(h.strip() for h in rows[0]) != LABELS_HEADER:
        raise ParseError(f"{path}: expected header {','.join(LABELS_HEADER)}")
    labels = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 fields")
        try:
            labels.add(MetricId(row[0].strip(), row[1].strip()))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
    missing = labels - table.sigma
    if missing:
        raise UnknownMetricError(missing)
    return AnomalyLabelSet(frozenset(labels))


def write_anomaly_labels(labels: AnomalyLabelSet, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LABELS_HEADER)
        for mid in sorted(labels.impacted):
            writer.writerow([mid.microservice, mid.name])
