"""Command line: simulate -> analyze -> rank -> report.

Exit codes: 0 success, 1 internal error, 2 user or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from statistics import fmean

from . import domain_metrics as dm
from . import epi_sim, tables
from .config import ConfigError, ToolkitConfig, load_config
from .interestingness import AnalysisError
from .io_utils import atomic_write_text, csv_text
from .policies import generate_variant_traces
from .reliability import ReliabilityError, combine_rankings, reliability_ranks
from .report import ReportError, analyze, dumps_report, load_report
from .traces import TraceFormatError, load as load_traces, save as save_traces

log = logging.getLogger("abmrank")

TRACE_SUFFIX = ".traces.jsonl"
REPORT_SUFFIX = ".report.jsonl"
CURVE_SUFFIX = ".curve.csv"
DOMAIN_CSV = "domain_ranking.csv"
DOMAIN_TXT = "domain_ranking.txt"
COMBINED_CSV = "combined_ranking.csv"
COMBINED_TXT = "combined_ranking.txt"


class UsageError(Exception):
    """Bad user input; reported with exit code 2."""


def _config(args) -> ToolkitConfig:
    try:
        return load_config(args.config)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    cfg = _config(args)
    try:
        sim = cfg.experiment(args.experiment)
        variants = cfg.variants
        if args.variants:
            variants = [cfg.variant(v.strip()) for v in args.variants.split(",") if v.strip()]
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out or cfg.output_dir) / args.experiment
    for v in variants:
        curves: list = []
        traces = generate_variant_traces(
            sim, v, cfg.train_episodes, cfg.exploit_episodes, cfg.seed,
            args.experiment, cfg.analysis.binning, cfg.learner, curves)
        save_traces(traces, out / f"{v.label}{TRACE_SUFFIX}")
        if curves:
            atomic_write_text(out / f"{v.label}{CURVE_SUFFIX}",
                              csv_text(epi_sim.CURVE_COLUMNS, epi_sim.curve_rows(curves[0])))
        print(f"{v.label}: {len(traces.train)} train + {len(traces.exploit)} exploit episodes")
    print(f"traces written to {out}")
    return 0


def _files(path: Path, suffix: str, what: str) -> list[Path]:
    if path.is_file():
        return [path]
    if not path.is_dir():
        raise UsageError(f"{path} does not exist")
    found = sorted(path.glob(f"*{suffix}"))
    if not found:
        raise UsageError(f"no {what} files (*{suffix}) in {path}")
    return found


def cmd_analyze(args) -> int:
    cfg = _config(args)
    src = Path(args.traces)
    out = Path(args.out) if args.out else (src if src.is_dir() else src.parent)
    for path in _files(src, TRACE_SUFFIX, "trace"):
        try:
            traces = load_traces(path)
            rep = analyze(traces, cfg.analysis)
        except (TraceFormatError, ReportError, AnalysisError, ValueError) as exc:
            raise UsageError(f"{path}: {exc}") from None
        dest = out / (path.name[: -len(TRACE_SUFFIX)] + REPORT_SUFFIX)
        atomic_write_text(dest, dumps_report(rep))
        print(f"{path.name} -> {dest.name}")
    return 0


def _load_reports(src: Path):
    reports = []
    for path in _files(src, REPORT_SUFFIX, "report"):
        try:
            reports.append(load_report(path))
        except ReportError as exc:
            raise UsageError(f"{path}: {exc}") from None
    names = [r.algorithm for r in reports]
    if len(set(names)) != len(names):
        raise UsageError("duplicate algorithm names among reports")
    return reports


def cmd_rank(args) -> int:
    cfg = _config(args)
    src = Path(args.reports)
    out = Path(args.out) if args.out else (src if src.is_dir() else src.parent)
    reports = _load_reports(src)
    if len(reports) < 2:
        raise UsageError(f"ranking needs at least two algorithms, found {len(reports)}")
    try:
        metrics = [r.metric_row() for r in reports]
        ranks = dm.rank_metric_table(metrics)
    except (dm.MetricError, AnalysisError) as exc:
        raise UsageError(str(exc)) from None
    atomic_write_text(out / DOMAIN_CSV, tables.domain_csv(metrics, ranks))
    atomic_write_text(out / DOMAIN_TXT, tables.domain_text(metrics, ranks))
    atomic_write_text(out / "domain_metric_ranks.csv", tables.metric_ranks_csv(ranks))
    print(tables.domain_text(metrics, ranks), end="")
    if args.with_reliability:
        try:
            scores = {r.algorithm: r.reliability(cfg.alpha, cfg.windows) for r in reports}
            combined = combine_rankings(reliability_ranks(scores),
                                        {r.algorithm: r.aggregate_rank for r in ranks})
        except ReliabilityError as exc:
            raise UsageError(str(exc)) from None
        atomic_write_text(out / "reliability_scores.csv", tables.reliability_csv(scores))
        atomic_write_text(out / COMBINED_CSV, tables.combined_csv(combined))
        atomic_write_text(out / COMBINED_TXT, tables.combined_text(combined))
        print()
        print(tables.combined_text(combined), end="")
    return 0


def _experiment_dirs(root: Path) -> list[Path]:
    if (root / DOMAIN_CSV).exists():
        return [root]
    return sorted(p for p in root.iterdir() if p.is_dir() and (p / DOMAIN_CSV).exists())


def cmd_report(args) -> int:
    root = Path(args.results)
    if not root.is_dir():
        raise UsageError(f"{root} is not a directory")
    dirs = _experiment_dirs(root)
    if not dirs:
        raise UsageError(f"no rank tables ({DOMAIN_CSV}) under {root}")
    out = Path(args.out) if args.out else root
    lines = ["# Algorithm ranking report", ""]
    for d in dirs:
        reports = _load_reports(d)
        name = reports[0].experiment
        rows = [[name, r.algorithm, repr(fmean(r.exploit_means)), repr(fmean(r.train_curve))]
                for r in sorted(reports, key=lambda r: r.algorithm)]
        csv_name = f"{d.name}_mean_rewards.csv" if out != d else "mean_rewards.csv"
        atomic_write_text(out / csv_name, csv_text(
            ["experiment", "algorithm", "mean_of_mean_rewards_exploit",
             "mean_of_mean_rewards_train"], rows))
        lines += [f"## {name}", "", "Domain-driven ranking:", "", "```",
                  (d / DOMAIN_TXT).read_text(encoding="utf-8").rstrip(), "```", ""]
        if (d / COMBINED_TXT).exists():
            lines += ["Combined with reliability metrics:", "", "```",
                      (d / COMBINED_TXT).read_text(encoding="utf-8").rstrip(), "```", ""]
        lines += [f"Mean of mean-rewards per algorithm: `{csv_name}`", ""]
    atomic_write_text(out / "report.md", "\n".join(lines))
    print(f"report written to {out / 'report.md'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="abmrank", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", help="YAML config (default: $ABMRANK_CONFIG or built-in)")
        sp.add_argument("--out", help="output directory")

    s = sub.add_parser("simulate", help="generate traces for one experiment")
    common(s)
    s.add_argument("--experiment", required=True)
    s.add_argument("--variants", help="comma-separated variant labels (default: whole roster)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="analyze trace files into reports")
    common(a)
    a.add_argument("traces", help="trace file or directory of *.traces.jsonl")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("rank", help="rank algorithms from analysis reports")
    common(r)
    r.add_argument("reports", help="directory of *.report.jsonl")
    r.add_argument("--with-reliability", action="store_true",
                   help="also combine with reliability-metric ranks")
    r.set_defaults(func=cmd_rank)

    m = sub.add_parser("report", help="markdown summary and plot data")
    common(m)
    m.add_argument("results", help="experiment directory or a directory of them")
    m.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
