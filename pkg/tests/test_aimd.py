import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critmetrics.aimd import (
    LOG_COLUMNS,
    aimd_select,
    anomaly_coverage,
    best_record,
    coverage,
    export_log,
    read_log,
)
from critmetrics.errors import EmptyLabelError, UnknownMetricError
from critmetrics.infotheory import CorrelationMatrix, correlation_matrix
from critmetrics.model import AimdLog, AimdParams, AimdRecord, AnomalyLabelSet, MetricTable, SubsetMapping
from critmetrics.oracle import naive_coverage
from critmetrics.synthgen import SynthSpec, generate

from conftest import mid


def corr_of(names, pairs, method="pearson"):
    ids = sorted(mid(n) for n in names)
    vals = np.eye(len(ids))
    for (a, b), v in pairs.items():
        i, j = ids.index(mid(a)), ids.index(mid(b))
        vals[i, j] = vals[j, i] = v
    return CorrelationMatrix(method, vals, ids)


def mapping_of(*names):
    out = {}
    for n in names:
        m = mid(n)
        out.setdefault(m.microservice, set()).add(m)
    return SubsetMapping(out)


@pytest.fixture(scope="module")
def bundle():
    return generate(SynthSpec(seed=3, services=4, metrics_per_service=8, redundancy_groups=2, samples=300, traces=400))


def test_coverage_example():
    corr = corr_of(["s/a", "s/b", "s/c", "s/d"], {("s/a", "s/b"): 0.9})
    rep = coverage(mapping_of("s/a"), corr, 0.5)
    assert rep.coverage == 0.5
    assert rep.covered == {mid("s/a"), mid("s/b")}


def test_coverage_threshold_is_strict():
    corr = corr_of(["s/a", "s/b"], {("s/a", "s/b"): 0.5})
    assert coverage(mapping_of("s/a"), corr, 0.5).coverage == 0.5
    assert coverage(mapping_of("s/a"), corr, 0.49).coverage == 1.0


def test_anomaly_coverage_example():
    corr = corr_of(["s/x", "s/y", "s/z"], {("s/x", "s/z"): 0.2, ("s/y", "s/z"): 0.2})
    labels = AnomalyLabelSet(frozenset({mid("s/x"), mid("s/y")}))
    rep = anomaly_coverage(mapping_of("s/x"), labels, corr, 0.3)
    assert rep.coverage == 0.5
    assert rep.total == 2


def test_anomaly_coverage_needs_labels():
    corr = corr_of(["s/x"], {})
    with pytest.raises(EmptyLabelError):
        anomaly_coverage(mapping_of("s/x"), AnomalyLabelSet(), corr, 0.3)


def test_coverage_unknown_metric():
    corr = corr_of(["s/x"], {})
    with pytest.raises(UnknownMetricError):
        coverage(mapping_of("s/ghost"), corr, 0.3)


def test_empty_selection_has_zero_coverage():
    corr = corr_of(["s/x", "s/y"], {("s/x", "s/y"): 1.0})
    assert coverage(SubsetMapping({}), corr, 0.1).coverage == 0.0


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_coverage_matches_set_definition(data):
    n = data.draw(st.integers(1, 8))
    names = [f"s{i % 2}/m{i}" for i in range(n)]
    pairs = {
        (names[i], names[j]): data.draw(st.floats(0, 1))
        for i in range(n) for j in range(i + 1, n)
    }
    corr = corr_of(names, pairs)
    chosen = data.draw(st.sets(st.sampled_from(names)))
    theta = data.draw(st.floats(0, 1))
    got = coverage(mapping_of(*chosen), corr, theta).coverage
    want = naive_coverage({mid(c) for c in chosen}, corr.ids, lambda a, b: corr[a, b], theta)
    assert got == want


def test_coverage_monotone_in_theta(bundle):
    corr = correlation_matrix(bundle.table, "pearson")
    m = mapping_of(*(str(x) for x in bundle.table.ids[::5]))
    covs = [coverage(m, corr, th).coverage for th in np.linspace(0, 1, 11)]
    assert all(a >= b for a, b in zip(covs, covs[1:]))


def test_single_iteration(bundle):
    params = AimdParams(eta=1, correlation_method="pearson")
    best, log = aimd_select(bundle.topology, bundle.table, bundle.traces, params)
    assert len(log) == 1
    assert log.iterations[0].epsilon == params.epsilon0
    assert best == log.iterations[0].mapping


def test_multiplicative_then_additive_updates(bundle):
    # tau huge: always within tolerance
    up = AimdParams(eta=4, tau=1e9, epsilon0=0.5, beta=0.25, correlation_method="pearson")
    _, log = aimd_select(bundle.topology, bundle.table, bundle.traces, up)
    assert [r.epsilon for r in log] == [0.5, 0.75, 1.0, 1.25]
    # tau zero: never within tolerance
    down = AimdParams(eta=2, tau=0.0, epsilon0=0.5, alpha=0.4, correlation_method="pearson")
    _, log = aimd_select(bundle.topology, bundle.table, bundle.traces, down)
    assert log.iterations[1].epsilon == 0.5 * 0.4
    assert not any(r.within_tolerance for r in log)


@pytest.mark.parametrize("tau", [0.0, 3.0, 20.0, 1e9])
def test_replay_invariants(bundle, tau):
    params = AimdParams(eta=25, tau=tau, beta=0.01, correlation_method="pearson", theta=0.8)
    best, log = aimd_select(bundle.topology, bundle.table, bundle.traces, params)
    assert [r.iteration for r in log] == list(range(1, 26))
    sizes = [len(bundle.table)]
    for prev, cur in zip(log.iterations, log.iterations[1:]):
        if prev.within_tolerance:
            assert math.isclose(cur.epsilon - prev.epsilon, params.beta, abs_tol=1e-12)
        else:
            assert math.isclose(cur.epsilon / prev.epsilon, params.alpha, abs_tol=1e-12)
    for r in log:
        assert r.within_tolerance == all(abs(r.xi - s) < tau for s in sizes)
        assert r.xi == r.mapping.total_size()
        sizes.append(r.xi)
    top = max(r.coverage for r in log)
    rec = best_record(log)
    assert rec.coverage == top
    assert rec.xi == min(r.xi for r in log if r.coverage == top)
    assert best == rec.mapping


def test_best_record_tiebreaks():
    m = SubsetMapping({})
    recs = (
        AimdRecord(1, 0.5, m, 10, 0.8, False),
        AimdRecord(2, 0.2, m, 7, 0.9, False),
        AimdRecord(3, 0.1, m, 5, 0.9, False),
        AimdRecord(4, 0.05, m, 5, 0.9, False),
    )
    assert best_record(AimdLog(recs, 20)).iteration == 3


def test_export_and_read_roundtrip(bundle, tmp_path):
    params = AimdParams(eta=3, correlation_method="pearson")
    _, log = aimd_select(bundle.topology, bundle.table, bundle.traces, params)
    path = tmp_path / "log.csv"
    export_log(log, path, config={"k": 1})
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == LOG_COLUMNS
    assert len(rows) == 4
    assert read_log(path) == log


def test_app_with_metricless_service(bundle):
    keep = {k: v for k, v in bundle.table.values.items() if k.microservice != "svc01"}
    table = MetricTable(bundle.table.timestamps, keep)
    best, log = aimd_select(bundle.topology, table, bundle.traces, AimdParams(eta=2, correlation_method="pearson"))
    assert best["svc01"] == frozenset()
