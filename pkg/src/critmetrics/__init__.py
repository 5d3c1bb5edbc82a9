"""Select a small, informative set of metrics per microservice.

Metrics are ranked by entropy and pruned by pairwise mutual information,
walking the service DAG so upstream selections act as a pivot for
downstream services. An AIMD loop over the pruning threshold trades subset
size against correlation coverage.
"""
from .aimd import CoverageReport, aimd_select, anomaly_coverage, coverage, export_log, read_log
from .errors import *  # noqa: F401,F403
from .infotheory import CorrelationMatrix, DiscreteSeries, correlation_matrix, discretize, entropy, mutual_information
from .ingest import (
    IngestConfig,
    derive_topology,
    load_anomaly_labels,
    load_metrics,
    load_topology,
    load_traces,
)
from .model import (
    AimdLog,
    AimdParams,
    AimdRecord,
    AnomalyLabelSet,
    MetricId,
    MetricSeries,
    MetricTable,
    PathRecord,
    SubsetMapping,
    Topology,
    Trace,
    TraceSet,
    total_size,
)
from .selection import select_subset
from .topology import (
    PathProbabilityModel,
    enumerate_paths,
    estimate_path_model,
    path_probability,
    topo_levels,
    topology_aware_select,
)

__version__ = "0.1.0"
