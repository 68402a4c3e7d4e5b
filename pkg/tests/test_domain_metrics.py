import pytest
from hypothesis import given
from hypothesis import strategies as st

from abmrank.domain_metrics import (METRICS, MetricError, MetricRow, aggregate_ranking,
                                    mean_reward_metric, median_mean_reward_metric,
                                    rank_by_metric, rank_metric_table,
                                    sequence_comparison_metric, state_coverage_metric,
                                    unified_coverage_metric)
from abmrank.interestingness import SequenceRecord


def seqs(n_best, n):
    return [SequenceRecord(f"Run-{i}-Exploit", [0 if i < n_best else 25], 1.0, i < n_best)
            for i in range(n)]


@pytest.mark.parametrize("n_best, n, expected", [(50, 50, 100.0), (0, 7, 0.0), (4, 5, 80.0)])
def test_sequence_comparison(n_best, n, expected):
    assert sequence_comparison_metric(seqs(n_best, n)) == expected


def test_sequence_comparison_needs_sequences():
    with pytest.raises(MetricError):
        sequence_comparison_metric([])


@pytest.mark.parametrize("means, expected", [
    ([2.8, 2.9, 3.0], 2.9), ([2.9085], 2.9085), ([1, 2, 3, 4], 2.5)])
def test_median_mean_reward(means, expected):
    assert median_mean_reward_metric(means) == pytest.approx(expected)


def test_state_coverage():
    valid = list(range(45))
    assert state_coverage_metric(valid, valid) == 100.0
    assert round(state_coverage_metric(range(13), valid), 3) == 28.889
    assert state_coverage_metric([100, 120], valid) == 0.0
    with pytest.raises(MetricError):
        state_coverage_metric([0], [])


def test_unified_coverage_examples():
    valid = list(range(50))
    # half the valid states visited, each with the full budget of actions
    pairs = [(s, a) for s in range(25) for a in range(8)]
    assert unified_coverage_metric(pairs, valid) == pytest.approx(75.0)
    assert unified_coverage_metric([(0, 0)], valid) == pytest.approx(7.25)
    with pytest.raises(MetricError):
        unified_coverage_metric([], valid)


def test_unified_coverage_fixed_point():
    # 10 of 50 states with 8/40 pairs each -> both fractions 0.2
    valid = list(range(50))
    pairs = [(s, a) for s in range(10) for a in range(8)]
    assert unified_coverage_metric(pairs, valid, budget=40) == pytest.approx(20.0)


def test_mean_reward_is_pooled():
    assert mean_reward_metric([[2.853] * 14]) == pytest.approx(2.853)
    assert mean_reward_metric([[0.0, 0.0]]) == 0.0
    assert mean_reward_metric([[1, 2], [3]]) == 2.0
    with pytest.raises(MetricError):
        mean_reward_metric([[]])


def test_rank_by_metric():
    assert rank_by_metric({"A": 100, "B": 100, "C": 78.57, "D": 34.55}) == \
        {"A": 1, "B": 1, "C": 2, "D": 3}
    assert rank_by_metric({"A": 1.0, "B": 1.0, "C": 1.0}) == {"A": 1, "B": 1, "C": 1}
    assert rank_by_metric({"NR_BN_TD3": 2.940, "DDPG": 2.938}) == {"NR_BN_TD3": 1, "DDPG": 2}
    assert rank_by_metric({"A": 1, "B": 2}, higher_is_better=False) == {"A": 1, "B": 2}
    with pytest.raises(MetricError):
        rank_by_metric({"A": 1})


def test_aggregate_all_ones():
    rows = aggregate_ranking({m: {"A": 1, "B": 2} for m in METRICS})
    assert (rows[0].algorithm, rows[0].aggregate_rank, rows[0].final_rank) == ("A", 5, 1.0)
    assert rows[1].aggregate_rank == 10


def test_aggregate_shared_final_rank():
    # aggregates 9, 14, 15, 15 -> 1, 2, 3, 3
    per = {m: {} for m in METRICS}
    for name, ranks in {"TD3": (1, 1, 1, 3, 3), "NR_BN_TD3": (1, 4, 4, 1, 4),
                        "DDPG": (2, 4, 5, 1, 3), "BN_DDPG": (3, 3, 3, 2, 4)}.items():
        for m, r in zip(METRICS, ranks):
            per[m][name] = r
    got = {r.algorithm: (r.aggregate_rank, r.final_rank) for r in aggregate_ranking(per)}
    assert got == {"TD3": (9, 1.0), "NR_BN_TD3": (14, 2.0), "DDPG": (15, 3.0),
                   "BN_DDPG": (15, 3.0)}


def test_aggregate_names_missing_metric():
    per = {m: {"A": 1, "B": 2} for m in METRICS[:-1]}
    with pytest.raises(MetricError, match=METRICS[-1]):
        aggregate_ranking(per)


def test_dense_final_rank_can_move_when_a_tie_splits():
    # Improving alg2's mean reward splits its tie with alg8, whose aggregate
    # grows by one; that creates a new distinct aggregate ahead of alg2.
    zero = (0.0,) * 5
    table = [zero, zero, (-2.0, 0, 0, 0, -2.0), zero, zero, zero, zero,
             (0, 0, 0, 0, -1.0), (-2.0, 0, 0, 0, 0)]
    rows = [MetricRow(f"alg{i}", *v) for i, v in enumerate(table)]
    before = {r.algorithm: r for r in rank_metric_table(rows)}["alg2"]
    rows[2].mean_reward_train = -1.0
    after = {r.algorithm: r for r in rank_metric_table(rows)}["alg2"]
    assert after.aggregate_rank == before.aggregate_rank == 8
    assert (before.final_rank, after.final_rank) == (3.0, 4.0)


@given(st.dictionaries(st.sampled_from("ABCDEFGH"), st.integers(-5, 5), min_size=2))
def test_dense_ranks_are_contiguous_and_order_preserving(values):
    ranks = rank_by_metric(values)
    assert sorted(set(ranks.values())) == list(range(1, len(set(values.values())) + 1))
    for a in values:
        for b in values:
            if values[a] > values[b]:
                assert ranks[a] < ranks[b]
