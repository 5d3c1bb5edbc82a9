import json

import pytest

from critmetrics.cli import REPORT_FILES, main
from critmetrics.synthgen import SynthSpec, generate


@pytest.fixture(scope="module")
def bundle_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    generate(SynthSpec(seed=2, services=3, samples=200, traces=200, anomaly_rate=0.5)).write(out)
    return out


def analyze(bundle_dir, out, *extra):
    return main([
        "analyze",
        "--metrics", str(bundle_dir / "metrics.csv"),
        "--traces", str(bundle_dir / "traces.jsonl"),
        "--topology", str(bundle_dir / "topology.json"),
        "--out", str(out),
        "--eta", "10",
        *extra,
    ])


def test_analyze_writes_reports(bundle_dir, tmp_path, capsys):
    code = analyze(bundle_dir, tmp_path / "r", "--labels", str(bundle_dir / "labels.csv"), "--method", "pearson")
    assert code == 0
    for name in REPORT_FILES.values():
        assert (tmp_path / "r" / name).exists()
    subset = json.loads((tmp_path / "r" / "subset.json").read_text())
    assert subset["config"]["aimd"]["method"] == "pearson"
    assert subset["subset_size"] == sum(len(v) for v in subset["assignments"].values())
    cov = json.loads((tmp_path / "r" / "coverage.json").read_text())
    assert cov["anomaly_coverage"]["total"] > 0
    assert "selected metrics" in capsys.readouterr().out


def test_analyze_derives_topology(bundle_dir, tmp_path):
    code = main([
        "analyze", "--metrics", str(bundle_dir / "metrics.csv"), "--traces", str(bundle_dir / "traces.jsonl"),
        "--out", str(tmp_path / "r"), "--eta", "3",
    ])
    assert code == 0


def test_missing_metrics_file(bundle_dir, tmp_path, capsys):
    code = main([
        "analyze", "--metrics", str(tmp_path / "absent.csv"), "--traces", str(bundle_dir / "traces.jsonl"),
        "--out", str(tmp_path / "r"),
    ])
    assert code == 1
    err = capsys.readouterr().err
    assert "absent.csv" in err
    assert "ingest" in err


def test_trace_edge_not_in_topology(bundle_dir, tmp_path, capsys):
    bad = tmp_path / "t.jsonl"
    bad.write_text(json.dumps({"trace_id": "x", "hops": ["svc00", "nowhere"]}) + "\n")
    code = main([
        "analyze", "--metrics", str(bundle_dir / "metrics.csv"), "--traces", str(bad),
        "--topology", str(bundle_dir / "topology.json"), "--out", str(tmp_path / "r"),
    ])
    assert code == 1
    assert "nowhere" in capsys.readouterr().err


def test_invalid_aimd_parameter(bundle_dir, tmp_path):
    assert analyze(bundle_dir, tmp_path / "r", "--alpha", "1.5") == 1


def test_synth_deterministic(tmp_path):
    args = ["--samples", "100", "--traces", "50", "--seed", "4"]
    assert main(["synth", "--out", str(tmp_path / "a"), *args]) == 0
    assert main(["synth", "--out", str(tmp_path / "b"), *args]) == 0
    for name in ("metrics.csv", "traces.jsonl", "topology.json", "labels.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_invalid_branch_probs(tmp_path, capsys):
    code = main(["synth", "--out", str(tmp_path), "--services", "3", "--branch-probs", "a>b=0.9,a>c=0.9"])
    assert code == 1
    assert "synthgen" in capsys.readouterr().err


def _small_metrics(path, k):
    lines = ["timestamp,microservice,metric,value"]
    for i in range(k):
        for t in range(16):
            lines.append(f"{15 * t},s,m{i},{(t * (i + 1)) % 7}")
    path.write_text("\n".join(lines) + "\n")
    return path


def test_oracle_command(tmp_path, capsys):
    p = _small_metrics(tmp_path / "m.csv", 3)
    assert main(["oracle", "--metrics", str(p), "--epsilon", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "greedy" in out and "exact" in out
    assert main(["oracle", "--metrics", str(p), "--epsilon", "1e-9"]) == 0


def test_oracle_size_cap(tmp_path, capsys):
    p = _small_metrics(tmp_path / "m.csv", 25)
    assert main(["oracle", "--metrics", str(p), "--epsilon", "0.5"]) == 1
    assert "oracle" in capsys.readouterr().err


def test_correlate(bundle_dir, tmp_path):
    out = tmp_path / "c.csv"
    assert main(["correlate", "--metrics", str(bundle_dir / "metrics.csv"), "--method", "spearman", "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[0] == "metric"
    assert len(header) == 37
