import filecmp

import numpy as np
import pytest

from critmetrics.errors import SpecError
from critmetrics.infotheory import correlation_matrix
from critmetrics.synthgen import SynthSpec, diamond_spec, generate, parse_branch_probs
from critmetrics.topology import estimate_path_model


def test_default_shape():
    b = generate(SynthSpec(samples=200, traces=100))
    assert len(b.topology.microservices) == 5
    assert len(b.table) == 60
    assert len(b.constants) == 10
    assert all(len(g) == 3 for g in b.groups.values())
    assert b.labels.impacted == frozenset()


def test_zero_noise_members_identical():
    b = generate(SynthSpec(noise_sigma=0.0, samples=100, traces=50))
    corr = correlation_matrix(b.table, "pearson")
    for groups in b.groups.values():
        for members in groups:
            first = b.table.values[members[0]]
            for m in members[1:]:
                assert np.array_equal(b.table.values[m], first)
                assert corr[members[0], m] == pytest.approx(1.0)


def test_constants_are_constant():
    b = generate(SynthSpec(samples=50, traces=10))
    for c in b.constants:
        assert np.ptp(b.table.values[c]) == 0


def test_anomalies_labelled():
    b = generate(SynthSpec(samples=2000, traces=50, anomaly_rate=1.0))
    assert b.labels.impacted
    assert b.labels.impacted <= b.table.sigma
    grouped = {m for gs in b.groups.values() for g in gs for m in g}
    assert b.labels.impacted <= grouped


def test_diamond_branch_estimates():
    b = generate(diamond_spec(0.5, traces=10_000, samples=50))
    model = estimate_path_model(b.traces, b.topology)
    assert abs(model.cond[("a", "b")] - 0.5) <= 0.03
    assert abs(model.cond[("a", "c")] - 0.5) <= 0.03
    assert model.cond[("b", "d")] == 1.0


def test_same_seed_byte_identical(tmp_path):
    spec = SynthSpec(seed=7, samples=100, traces=100, anomaly_rate=0.5)
    a = generate(spec).write(tmp_path / "a")
    b = generate(spec).write(tmp_path / "b")
    for k in a:
        assert filecmp.cmp(a[k], b[k], shallow=False)
    c = generate(SynthSpec(seed=8, samples=100, traces=100)).write(tmp_path / "c")
    assert not filecmp.cmp(a["metrics"], c["metrics"], shallow=False)


def test_traces_follow_topology():
    b = generate(SynthSpec(seed=1, services=8, samples=20, traces=300))
    for t in b.traces:
        b.topology.check_trace(t)


@pytest.mark.parametrize(
    "kw",
    [
        {"services": 0},
        {"metrics_per_service": 4},
        {"noise_sigma": -1},
        {"anomaly_rate": 1.5},
        {"anomaly_kinds": ("meteor_strike",)},
        {"redundancy_groups": 9, "group_size": 1, "constant_metrics": 0, "metrics_per_service": 12},
        {"services": 3, "branch_probs": {("a", "b"): 0.8, ("a", "c"): 0.5}},
        {"services": 2, "branch_probs": {("a", "b"): 0.0}},
    ],
)
def test_invalid_specs(kw):
    with pytest.raises(SpecError):
        SynthSpec(**kw)


def test_parse_branch_probs():
    assert parse_branch_probs("a>b=0.5, a>c=0.5") == {("a", "b"): 0.5, ("a", "c"): 0.5}
    for bad in ["a>b", "a=0.5", "a>b=x", "a>b=nan"]:
        with pytest.raises(SpecError):
            parse_branch_probs(bad)
