"""CSV and aligned-text renderings of metric and rank tables."""

from __future__ import annotations

from typing import Sequence

from .domain_metrics import METRIC_TITLES, METRICS, MetricRow, RankRow
from .io_utils import aligned_table, csv_text
from .reliability import RELIABILITY_METRICS, RELIABILITY_TITLES, CombinedRow, ReliabilityScores

DOMAIN_HEADER = ["Algorithm", *(METRIC_TITLES[m] for m in METRICS), "Aggregate Rank", "Rank"]
COMBINED_HEADER = ["Algorithm", *(RELIABILITY_TITLES[m] for m in RELIABILITY_METRICS),
                   "Reliability Rank", "Domain Rank", "Aggregate Rank", "Rank"]
_DISPLAY = {
    "mean_reward_train": "{:.3f}",
    "state_coverage_pct": "{:.3f}",
    "unified_coverage_pct": "{:.3f}",
    "best_sequence_pct": "{:.2f}",
    "median_mean_reward_exploit": "{:.4f}",
}


def _ordered(metrics: Sequence[MetricRow], ranks: Sequence[RankRow]):
    by_name = {m.algorithm: m for m in metrics}
    return [(by_name[r.algorithm], r) for r in ranks]


def domain_csv(metrics: Sequence[MetricRow], ranks: Sequence[RankRow]) -> str:
    rows = [[m.algorithm, *(repr(getattr(m, k)) for k in METRICS), r.aggregate_rank, r.final_rank]
            for m, r in _ordered(metrics, ranks)]
    return csv_text(DOMAIN_HEADER, rows)


def domain_text(metrics: Sequence[MetricRow], ranks: Sequence[RankRow]) -> str:
    rows = [[m.algorithm, *(_DISPLAY[k].format(getattr(m, k)) for k in METRICS),
             str(r.aggregate_rank), f"{r.final_rank:.1f}"]
            for m, r in _ordered(metrics, ranks)]
    return aligned_table(DOMAIN_HEADER, rows)


def metric_ranks_csv(ranks: Sequence[RankRow]) -> str:
    header = ["Algorithm", *(METRIC_TITLES[m] for m in METRICS)]
    return csv_text(header, [[r.algorithm, *(r.ranks[m] for m in METRICS)] for r in ranks])


def reliability_csv(scores: dict[str, ReliabilityScores]) -> str:
    n_win = max(len(s.iqr_scores) for s in scores.values())
    header = ["Algorithm", *(f"IQR window {i + 1}" for i in range(n_win)),
              *(RELIABILITY_TITLES[m] for m in RELIABILITY_METRICS)]
    rows = [[name, *map(repr, scores[name].iqr_scores),
             *(repr(v) for v in scores[name].values().values())]
            for name in sorted(scores)]
    return csv_text(header, rows)


def combined_csv(rows: Sequence[CombinedRow]) -> str:
    return csv_text(COMBINED_HEADER, [
        [r.algorithm, *(r.ranks[m] for m in RELIABILITY_METRICS),
         r.reliability_rank_sum, r.domain_rank, r.overall_aggregate, r.final_rank]
        for r in rows])


def combined_text(rows: Sequence[CombinedRow]) -> str:
    return aligned_table(COMBINED_HEADER, [
        [r.algorithm, *(f"{r.ranks[m]:.1f}" for m in RELIABILITY_METRICS),
         f"{r.reliability_rank_sum:.1f}", f"{r.domain_rank:g}",
         f"{r.overall_aggregate:.1f}", f"{r.final_rank:.1f}"]
        for r in rows])
