"""Domain-driven metrics, per-metric ranks and the aggregate ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import median
from typing import Iterable, Mapping, Sequence

from .interestingness import SequenceRecord, pair_coverage

# column order of the domain ranking table
METRICS = (
    "mean_reward_train",
    "state_coverage_pct",
    "unified_coverage_pct",
    "best_sequence_pct",
    "median_mean_reward_exploit",
)
METRIC_TITLES = {
    "mean_reward_train": "Mean Reward",
    "state_coverage_pct": "State Coverage",
    "unified_coverage_pct": "Unified Coverage",
    "best_sequence_pct": "Best sequences %",
    "median_mean_reward_exploit": "Median Reward",
}


class MetricError(ValueError):
    pass


def sequence_comparison_metric(sequences: Sequence[SequenceRecord]) -> float:
    """Percentage of exploit sequences that end in the best state."""
    if not sequences:
        raise MetricError("no exploit sequences")
    return 100.0 * sum(s.is_best for s in sequences) / len(sequences)


def median_mean_reward_metric(episode_means: Sequence[float]) -> float:
    if not episode_means:
        raise MetricError("no exploit episodes")
    return float(median(episode_means))


def state_coverage_metric(visited: Iterable[int], valid_states: Sequence[int]) -> float:
    if not valid_states:
        raise MetricError("no valid states")
    return 100.0 * len(set(visited) & set(valid_states)) / len(valid_states)


def unified_coverage_metric(
    visited_pairs: Iterable[tuple[int, int]],
    valid_states: Sequence[int],
    budget: int = 8,
    weight: float = 0.5,
) -> float:
    """Weighted mean of state coverage and budgeted state-action coverage, in percent.

    The pair fraction is ``min(1, distinct pairs / (visited states * budget))``.
    """
    if not 0.0 <= weight <= 1.0:
        raise MetricError(f"weight must be in [0, 1], got {weight}")
    pairs = set(visited_pairs)
    states = {s for s, _ in pairs}
    if not states:
        raise MetricError("no visited states")
    state_frac = state_coverage_metric(states, valid_states) / 100.0
    pair_frac = pair_coverage(len(states), len(pairs), budget)
    return 100.0 * (weight * state_frac + (1.0 - weight) * pair_frac)


def mean_reward_metric(reward_lists: Iterable[Sequence[float]]) -> float:
    """Mean over all training steps pooled across episodes."""
    rewards = [r for rs in reward_lists for r in rs]
    if not rewards:
        raise MetricError("no training steps")
    return math.fsum(rewards) / len(rewards)


def rank_by_metric(values: Mapping[str, float], higher_is_better: bool = True) -> dict[str, int]:
    """Dense ranks (1 = best); equal values share a rank."""
    if len(values) < 2:
        raise MetricError("ranking needs at least two algorithms")
    distinct = sorted(set(values.values()), reverse=higher_is_better)
    pos = {v: i + 1 for i, v in enumerate(distinct)}
    return {name: pos[v] for name, v in values.items()}


def dense_positions(scores: Mapping[str, float]) -> dict[str, float]:
    """Final positions for aggregate scores where lower is better; ties shared."""
    return {k: float(v) for k, v in rank_by_metric(scores, higher_is_better=False).items()}


@dataclass
class RankRow:
    algorithm: str
    ranks: dict[str, int]
    aggregate_rank: int
    final_rank: float


def aggregate_ranking(per_metric: Mapping[str, Mapping[str, int]]) -> list[RankRow]:
    """Sum the five metric ranks per algorithm and rank the sums.

    ``per_metric`` maps metric name to ``{algorithm: rank}``.  Rows are
    returned best first, ties broken by algorithm name.
    """
    missing = [m for m in METRICS if m not in per_metric]
    if missing:
        raise MetricError(f"missing metric ranks: {', '.join(missing)}")
    algos = set(per_metric[METRICS[0]])
    for m in METRICS[1:]:
        if set(per_metric[m]) != algos:
            diff = sorted(algos ^ set(per_metric[m]))
            raise MetricError(f"metric {m} ranks a different algorithm set: {diff}")
    aggregates = {a: sum(per_metric[m][a] for m in METRICS) for a in algos}
    final = dense_positions(aggregates)
    rows = [RankRow(a, {m: per_metric[m][a] for m in METRICS}, aggregates[a], final[a])
            for a in algos]
    return sorted(rows, key=lambda r: (r.final_rank, r.algorithm))


@dataclass
class MetricRow:
    algorithm: str
    mean_reward_train: float
    state_coverage_pct: float
    unified_coverage_pct: float
    best_sequence_pct: float
    median_mean_reward_exploit: float

    def values(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}


def rank_metric_table(rows: Sequence[MetricRow]) -> list[RankRow]:
    per_metric = {
        m: rank_by_metric({r.algorithm: getattr(r, m) for r in rows}, higher_is_better=True)
        for m in METRICS
    }
    return aggregate_ranking(per_metric)
