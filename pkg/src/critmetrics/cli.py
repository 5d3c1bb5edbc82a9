"""Command-line entry point.

Exit codes: 0 success, 1 input/ingest errors, 2 analysis errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

from . import __version__
from .aimd import aimd_select, anomaly_coverage, best_record, coverage, export_log, mapping_to_json
from .errors import AnalysisError, CritMetricsError, InputError
from .infotheory import DEFAULT_BINS, correlation_matrix, discretize
from .ingest import (
    ALIGNMENTS,
    IngestConfig,
    check_traces,
    derive_topology,
    load_anomaly_labels,
    load_metrics,
    load_topology,
    load_traces,
)
from .model import DEFAULT_THETA, AimdParams
from .oracle import OracleProblem, check_feasible, objective, solve_exact
from .selection import select_subset
from .synthgen import ANOMALY_KINDS, SynthSpec, generate, parse_branch_probs

log = logging.getLogger("critmetrics")

METHOD_ALIASES = {
    "mi": "mutual_information",
    "mutual_information": "mutual_information",
    "pearson": "pearson",
    "spearman": "spearman",
    "kendall": "kendall",
}

REPORT_FILES = {
    "subset": "subset.json",
    "log": "aimd_log.csv",
    "coverage": "coverage.json",
    "summary": "summary.txt",
}


def _failing_module(exc: BaseException) -> str:
    module = "cli"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("critmetrics."):
            module = name.rsplit(".", 1)[-1]
    return module


def _dump(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _ingest_config(args) -> IngestConfig:
    return IngestConfig(args.resample_interval, args.alignment, args.max_gap)


def cmd_analyze(args) -> int:
    try:
        cfg = _ingest_config(args)
        table = load_metrics(args.metrics, cfg)
        traces = load_traces(args.traces)
        topology = load_topology(args.topology) if args.topology else derive_topology(traces)
        check_traces(traces, topology)
        labels = load_anomaly_labels(args.labels, table) if args.labels else None
        params = AimdParams(
            tau=args.tau,
            alpha=args.alpha,
            beta=args.beta,
            eta=args.eta,
            epsilon0=args.epsilon0,
            theta=args.theta,
            correlation_method=METHOD_ALIASES[args.method],
            bins=args.bins,
        )
    except (CritMetricsError, ValueError) as exc:
        return _fail(exc, 1)

    orphans = sorted(set(table.microservices()) - topology.microservices)
    if orphans:
        log.warning("metrics for microservices outside the topology are never selected: %s", orphans)

    config = {
        "inputs": {
            "metrics": str(args.metrics),
            "traces": str(args.traces),
            "topology": str(args.topology) if args.topology else None,
            "labels": str(args.labels) if args.labels else None,
        },
        "ingest": {"resample_interval": cfg.resample_interval, "alignment": cfg.alignment, "max_gap": cfg.max_gap},
        "aimd": {
            "tau": params.tau,
            "alpha": params.alpha,
            "beta": params.beta,
            "eta": params.eta,
            "epsilon0": params.epsilon0,
            "theta": params.theta,
            "method": params.correlation_method,
            "bins": params.bins,
        },
        "seed": args.seed,
    }

    try:
        corr = correlation_matrix(table, params.correlation_method, params.bins, args.threads)
        best, aimd_log = aimd_select(topology, table, traces, params, corr=corr, threads=args.threads)
        rec = best_record(aimd_log)
        cov = coverage(best, corr, params.theta)
        cov_a = anomaly_coverage(best, labels, corr, params.theta) if labels and labels.impacted else None
    except (CritMetricsError, ValueError) as exc:
        return _fail(exc, 2)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    empty = sorted(m for m in sorted(topology.microservices) if table.metrics_of(m) and not best[m])
    subset = {
        "config": config,
        "iteration": rec.iteration,
        "epsilon": rec.epsilon,
        "subset_size": rec.xi,
        "total_metrics": len(table),
        "coverage": cov.coverage,
        **mapping_to_json(best),
    }
    (out / REPORT_FILES["subset"]).write_text(_dump(subset), encoding="utf-8")
    export_log(aimd_log, out / REPORT_FILES["log"], config=config)
    coverage_doc = {
        "config": config,
        "coverage": {
            "value": cov.coverage,
            "covered": len(cov.covered),
            "total": cov.total,
            "theta": cov.theta,
            "method": cov.method,
            "covered_metrics": sorted(str(m) for m in cov.covered),
        },
        "anomaly_coverage": None if cov_a is None else {
            "value": cov_a.coverage,
            "covered": len(cov_a.covered),
            "total": cov_a.total,
            "theta": cov_a.theta,
            "method": cov_a.method,
            "covered_metrics": sorted(str(m) for m in cov_a.covered),
            "uncovered_metrics": sorted(str(m) for m in labels.impacted - cov_a.covered),
        },
    }
    (out / REPORT_FILES["coverage"]).write_text(_dump(coverage_doc), encoding="utf-8")

    reduction = 100.0 * (1 - rec.xi / len(table)) if len(table) else 0.0
    lines = [
        "metric subset summary",
        "",
        f"total metrics      {len(table)}",
        f"selected metrics   {rec.xi}",
        f"reduction          {reduction:.2f}%",
        f"coverage C         {100 * cov.coverage:.2f}%  (theta={params.theta}, {params.correlation_method})",
    ]
    if cov_a is not None:
        lines.append(f"anomaly coverage   {100 * cov_a.coverage:.2f}%  ({len(cov_a.covered)}/{cov_a.total})")
    elif labels is not None:
        lines.append("anomaly coverage   undefined (label file is empty)")
    lines += [f"best iteration     {rec.iteration} of {params.eta} (epsilon={rec.epsilon!r})", "", "per microservice:"]
    for m in sorted(topology.microservices):
        chosen = sorted(mid.name for mid in best[m])
        lines.append(f"  {m}: {len(chosen)}/{len(table.metrics_of(m))}  {', '.join(chosen)}")
    for m in empty:
        lines.append(f"warning: {m} has metrics but none were selected")
    lines += ["", "config:", *("  " + line for line in json.dumps(config, indent=2, sort_keys=True).splitlines())]
    (out / REPORT_FILES["summary"]).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines[:8]))
    return 0


def cmd_synth(args) -> int:
    try:
        spec = SynthSpec(
            seed=args.seed,
            services=args.services,
            branch_probs=parse_branch_probs(args.branch_probs) if args.branch_probs else {},
            metrics_per_service=args.metrics_per_service,
            redundancy_groups=args.groups,
            group_size=args.group_size,
            constant_metrics=args.constant_metrics,
            noise_sigma=args.noise_sigma,
            samples=args.samples,
            traces=args.trace_count,
            anomaly_kinds=tuple(k.strip() for k in args.anomaly_kinds.split(",") if k.strip()),
            anomaly_rate=args.anomaly_rate,
        )
        bundle = generate(spec)
    except (CritMetricsError, ValueError) as exc:
        return _fail(exc, 1)
    paths = bundle.write(args.out)
    for path in paths.values():
        print(path)
    return 0


def cmd_oracle(args) -> int:
    try:
        table = load_metrics(args.metrics, _ingest_config(args))
        series = {mid: discretize(table.values[mid], args.bins) for mid in table.ids}
        chi = args.chi or len(series)
        problem = OracleProblem(tuple(series.items()), args.epsilon, chi)
    except (CritMetricsError, ValueError) as exc:
        return _fail(exc, 1)
    try:
        greedy = select_subset("*", list(series.items()), (), args.epsilon)
        exact, exact_obj = solve_exact(problem)
    except (CritMetricsError, ValueError) as exc:
        return _fail(exc, 2)
    rows = [
        ("greedy", greedy, objective(greedy, series), check_feasible(greedy, series, args.epsilon, chi)),
        ("exact", exact, exact_obj, check_feasible(exact, series, args.epsilon, chi)),
    ]
    print(f"epsilon={args.epsilon!r} chi={chi} metrics={len(series)}")
    print(f"{'solver':<8}{'size':>6}{'feasible':>10}{'objective':>14}  subset")
    for name, subset, obj, ok in rows:
        members = ", ".join(str(m) for m in sorted(subset))
        print(f"{name:<8}{len(subset):>6}{str(ok).lower():>10}{obj:>14.6f}  {members}")
    return 0


def cmd_correlate(args) -> int:
    try:
        table = load_metrics(args.metrics, _ingest_config(args))
    except (CritMetricsError, ValueError) as exc:
        return _fail(exc, 1)
    try:
        corr = correlation_matrix(table, METHOD_ALIASES[args.method], args.bins, args.threads)
    except (CritMetricsError, ValueError) as exc:
        return _fail(exc, 2)
    corr.to_csv(args.out)
    print(args.out)
    return 0


def _fail(exc: Exception, code: int) -> int:
    if isinstance(exc, InputError):
        code = 1
    elif isinstance(exc, AnalysisError):
        code = 2
    print(f"error [{_failing_module(exc)}]: {exc}", file=sys.stderr)
    return code


def _add_ingest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--resample-interval", type=int, default=15, help="forward_fill grid step in seconds")
    p.add_argument("--alignment", choices=ALIGNMENTS, default="intersect")
    p.add_argument("--max-gap", type=int, default=60, help="forward_fill staleness limit in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="critmetrics", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="select an approximate minimal metric subset")
    a.add_argument("--metrics", required=True, type=Path)
    a.add_argument("--traces", required=True, type=Path)
    a.add_argument("--topology", type=Path, help="topology JSON; derived from traces when omitted")
    a.add_argument("--labels", type=Path, help="anomaly label CSV (enables anomaly coverage)")
    a.add_argument("--method", choices=sorted(METHOD_ALIASES), default="mi")
    a.add_argument("--theta", type=float, default=None,
                   help="coverage threshold; default per method " + str(DEFAULT_THETA))
    a.add_argument("--epsilon0", type=float, default=0.5)
    a.add_argument("--alpha", type=float, default=0.4)
    a.add_argument("--beta", type=float, default=0.005)
    a.add_argument("--eta", type=int, default=100)
    a.add_argument("--tau", type=float, default=5.0)
    a.add_argument("--bins", type=int, default=DEFAULT_BINS)
    a.add_argument("--out", required=True, type=Path)
    a.add_argument("--seed", type=int, default=0, help="recorded in the config echo; analysis is deterministic")
    a.add_argument("--threads", type=int, default=1)
    _add_ingest_flags(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("synth", help="write a synthetic metrics/traces/topology/labels bundle")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--services", type=int, default=5)
    s.add_argument("--branch-probs", default="", help='e.g. "a>b=0.5,a>c=0.5,b>d=1,c>d=1"')
    s.add_argument("--metrics-per-service", type=int, default=12)
    s.add_argument("--groups", type=int, default=3)
    s.add_argument("--group-size", type=int, default=3)
    s.add_argument("--constant-metrics", type=int, default=2)
    s.add_argument("--noise-sigma", type=float, default=0.05)
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--traces", dest="trace_count", type=int, default=2000)
    s.add_argument("--anomaly-kinds", default=",".join(ANOMALY_KINDS))
    s.add_argument("--anomaly-rate", type=float, default=0.0)
    s.set_defaults(func=cmd_synth)

    o = sub.add_parser("oracle", help="compare greedy and exact selection on a tiny metrics file")
    o.add_argument("--metrics", required=True, type=Path)
    o.add_argument("--epsilon", type=float, required=True)
    o.add_argument("--chi", type=int, default=0, help="subset size bound; default all metrics")
    o.add_argument("--bins", type=int, default=DEFAULT_BINS)
    _add_ingest_flags(o)
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("correlate", help="export the pairwise correlation matrix as CSV")
    c.add_argument("--metrics", required=True, type=Path)
    c.add_argument("--method", choices=sorted(METHOD_ALIASES), default="mi")
    c.add_argument("--bins", type=int, default=DEFAULT_BINS)
    c.add_argument("--out", required=True, type=Path)
    c.add_argument("--threads", type=int, default=1)
    _add_ingest_flags(c)
    c.set_defaults(func=cmd_correlate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
