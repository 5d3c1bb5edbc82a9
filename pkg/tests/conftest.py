import numpy as np
import pytest

from critmetrics.infotheory import DiscreteSeries
from critmetrics.model import MetricId, MetricTable, Topology, Trace, TraceSet


def mid(text: str) -> MetricId:
    svc, name = text.split("/")
    return MetricId(svc, name)


def ds(symbols, bins=None) -> DiscreteSeries:
    symbols = list(symbols)
    return DiscreteSeries(np.array(symbols), bins or max(symbols) + 1)


def make_table(columns: dict, start: int = 0, step: int = 15) -> MetricTable:
    """Table from ``{"svc/name": values}``."""
    n = len(next(iter(columns.values())))
    ts = start + step * np.arange(n)
    return MetricTable(ts, {mid(k): np.asarray(v, dtype=float) for k, v in columns.items()})


def traces_of(*paths, repeat=1) -> TraceSet:
    out = []
    for path in paths:
        for _ in range(repeat):
            out.append(Trace(f"t{len(out)}", tuple(path)))
    return TraceSet(tuple(out))


@pytest.fixture
def diamond() -> Topology:
    return Topology.from_edges([("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
