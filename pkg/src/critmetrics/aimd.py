"""AIMD search over the selection threshold, with coverage scoring."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import EmptyLabelError, UnknownMetricError
from .infotheory import CorrelationMatrix, InfoCache, correlation_matrix
from .model import (
    AimdLog,
    AimdParams,
    AimdRecord,
    AnomalyLabelSet,
    MetricId,
    MetricTable,
    PathRecord,
    SubsetMapping,
    Topology,
    TraceSet,
)
from .topology import estimate_path_model, topology_aware_select

LOG_COLUMNS = ("iteration", "epsilon", "subset_size", "coverage", "within_tolerance")


@dataclass(frozen=True)
class CoverageReport:
    covered: frozenset[MetricId]
    coverage: float
    theta: float
    method: str
    # size of the denominator set
    total: int


def _covered(selected: Iterable[MetricId], corr: CorrelationMatrix, theta: float) -> frozenset[MetricId]:
    selected = frozenset(selected)
    unknown = [mid for mid in selected if mid not in corr]
    if unknown:
        raise UnknownMetricError(unknown)
    if not selected:
        return frozenset()
    cols = [corr.index(mid) for mid in sorted(selected)]
    inferable = np.any(corr.values[:, cols] > theta, axis=1)
    return selected | {corr.ids[i] for i in np.flatnonzero(inferable)}


def coverage(mapping: SubsetMapping, corr: CorrelationMatrix, theta: float) -> CoverageReport:
    """Fraction of all metrics that are selected or correlate above ``theta`` with a selected one."""
    covered = _covered(mapping.metrics(), corr, theta)
    total = len(corr.ids)
    return CoverageReport(covered, len(covered) / total if total else 0.0, theta, corr.method, total)


def anomaly_coverage(
    mapping: SubsetMapping, labels: AnomalyLabelSet, corr: CorrelationMatrix, theta: float
) -> CoverageReport:
    """Coverage restricted to the anomaly-impacted metrics."""
    if not labels.impacted:
        raise EmptyLabelError("anomaly coverage needs at least one labelled metric")
    unknown = [mid for mid in labels.impacted if mid not in corr]
    if unknown:
        raise UnknownMetricError(unknown)
    covered = _covered(mapping.metrics(), corr, theta) & labels.impacted
    total = len(labels.impacted)
    return CoverageReport(covered, len(covered) / total, theta, corr.method, total)


def best_record(log: AimdLog) -> AimdRecord:
    """Maximum coverage, then minimum size, then earliest iteration."""
    return min(log.iterations, key=lambda r: (-r.coverage, r.xi, r.iteration))


def aimd_select(
    t: Topology,
    table: MetricTable,
    traces: TraceSet,
    params: AimdParams,
    *,
    corr: CorrelationMatrix | None = None,
    threads: int = 1,
) -> tuple[SubsetMapping, AimdLog]:
    """Run ``params.eta`` AIMD iterations and return the best mapping and the full log.

    Each iteration selects at the current threshold. The threshold grows by
    ``beta`` when the subset size is within ``tau`` of every size seen so
    far (seeded with the total metric count), otherwise it is multiplied by
    ``alpha``.
    """
    if corr is None:
        corr = correlation_matrix(table, params.correlation_method, params.bins, threads)
    model = estimate_path_model(traces, t)
    cache = InfoCache.from_table(table, params.bins)

    sizes = [len(table)]
    eps = params.epsilon0
    records = []
    for i in range(1, params.eta + 1):
        gamma = topology_aware_select(t, table, traces, eps, bins=params.bins, model=model, cache=cache)
        xi = gamma.total_size()
        cov = coverage(gamma, corr, params.theta).coverage
        within = all(abs(xi - s) < params.tau for s in sizes)
        records.append(AimdRecord(i, eps, gamma, xi, cov, within))
        eps = eps + params.beta if within else eps * params.alpha
        sizes.append(xi)

    log = AimdLog(tuple(records), len(table))
    return best_record(log).mapping, log


def mapping_to_json(mapping: SubsetMapping) -> dict:
    return {
        "assignments": {m: sorted(mid.name for mid in ids) for m, ids in mapping.assignments.items()},
        "provenance": {
            m: [
                {
                    "path": list(rec.path),
                    "probability": rec.probability,
                    "epsilon": rec.epsilon,
                    "selected": sorted(mid.name for mid in rec.selected),
                }
                for rec in recs
            ]
            for m, recs in mapping.provenance.items()
        },
    }


def mapping_from_json(data: dict) -> SubsetMapping:
    assignments = {m: frozenset(MetricId(m, n) for n in names) for m, names in data["assignments"].items()}
    provenance = {
        m: tuple(
            PathRecord(
                tuple(rec["path"]),
                float(rec["probability"]),
                float(rec["epsilon"]),
                frozenset(MetricId(m, n) for n in rec["selected"]),
            )
            for rec in recs
        )
        for m, recs in data.get("provenance", {}).items()
    }
    return SubsetMapping(assignments, provenance)


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def export_log(log: AimdLog, path: str | Path, config: dict | None = None) -> None:
    """Write the iteration table as CSV and full assignments to a JSON sidecar.

    The sidecar sits next to ``path`` with a ``.json`` suffix. ``config`` is
    echoed into the sidecar verbatim when given.
    """
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for r in log:
            writer.writerow([r.iteration, repr(r.epsilon), r.xi, repr(r.coverage), str(r.within_tolerance).lower()])
    sidecar = {
        "config": config,
        "sigma_size": log.sigma_size,
        "iterations": [
            {
                "iteration": r.iteration,
                "epsilon": r.epsilon,
                "subset_size": r.xi,
                "coverage": r.coverage,
                "within_tolerance": r.within_tolerance,
                **mapping_to_json(r.mapping),
            }
            for r in log
        ],
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_log(path: str | Path) -> AimdLog:
    """Parse a log written by :func:`export_log` (CSV plus its sidecar)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    side = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    records = []
    for row, full in zip(rows, side["iterations"], strict=True):
        records.append(
            AimdRecord(
                int(row["iteration"]),
                float(row["epsilon"]),
                mapping_from_json(full),
                int(row["subset_size"]),
                float(row["coverage"]),
                row["within_tolerance"] == "true",
            )
        )
    return AimdLog(tuple(records), int(side["sigma_size"]))
