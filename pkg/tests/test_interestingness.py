import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abmrank.discretize import BinningSpec
from abmrank.interestingness import (AnalysisError, DiscreteEpisode, EmpiricalModel,
                                     ExtremaReport, build_empirical_model, collapse_trajectory,
                                     discounted_returns, discretize_episodes,
                                     extract_exploit_sequences, normalized_entropy,
                                     reward_analysis, sequence_analysis,
                                     state_action_frequency_analysis, state_frequency_analysis,
                                     transition_value_analysis)
from abmrank.traces import Episode, Kind, Step


def ep(states, actions=None, rewards=None, name="Run-1-Train"):
    n = len(states)
    return DiscreteEpisode(name, tuple(states), tuple(actions or [0] * n),
                           tuple(rewards or [1.0] * n))


def episodes_from_counts(counts):
    states = [s for s, c in counts.items() for _ in range(c)]
    return [ep(states)]


# state frequency

def test_single_state_coverage_and_dispersion():
    sf = state_frequency_analysis([ep([0] * 10)], list(range(50)))
    assert sf.coverage == pytest.approx(0.02)
    assert sf.dispersion == 1.0


def test_uniform_visits_over_all_valid_states():
    valid = list(range(50))
    sf = state_frequency_analysis([ep(valid)], valid)
    assert sf.coverage == 1.0
    assert sf.dispersion == pytest.approx(1.0)


def test_frequent_and_infrequent_states():
    sf = state_frequency_analysis(episodes_from_counts({0: 90, 25: 9, 50: 1}), list(range(50)))
    assert sf.frequent == {0}
    assert sf.infrequent == {50}


def test_state_frequency_rejects_empty():
    with pytest.raises(AnalysisError):
        state_frequency_analysis([], list(range(50)))


# state-action frequency

def test_single_action_state_is_certain():
    sa = state_action_frequency_analysis([ep([3, 3, 3], [7, 7, 7])])
    assert sa.dispersion[3] == 0.0
    assert sa.certain == {3}


def test_two_equal_actions_is_uncertain():
    sa = state_action_frequency_analysis([ep([3, 3], [1, 2])])
    assert sa.dispersion[3] == pytest.approx(1.0)
    assert sa.uncertain == {3}


def test_three_to_one_dispersion():
    sa = state_action_frequency_analysis([ep([3] * 4, [1, 1, 1, 2])])
    h = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25)) / math.log(2)
    assert sa.dispersion[3] == pytest.approx(h) == pytest.approx(0.811, abs=1e-3)


# reward analysis

def test_equal_rewards_give_no_outliers():
    ra = reward_analysis([ep([0, 1, 2], [0, 0, 0], [2.0, 2.0, 2.0])])
    assert ra.high == set() and ra.low == set()


def test_low_reward_outlier():
    ra = reward_analysis([ep([0, 1, 2], [0, 0, 0], [2.9, 2.9, 0.1])])
    assert ra.low == {(2, 0)}
    assert ra.high == set()


def test_single_pair_has_no_outliers():
    ra = reward_analysis([ep([5], [5], [1.0])])
    assert ra.high == ra.low == set()


# empirical model

def test_two_step_chain():
    m = build_empirical_model([ep([0, 1], [4, 4], [1.0, 0.0])], gamma=0.5)
    assert m.q_table[(0, 4)] == 1.0
    assert m.transition_probs(0, 4) == {1: 1.0}


def test_gamma_zero_gives_immediate_reward():
    m = build_empirical_model([ep([0, 1, 2], [0, 1, 2], [1.0, 1.0, 1.0])], gamma=0.0)
    assert all(q == 1.0 for q in m.q_table.values())


def test_gamma_out_of_range():
    with pytest.raises(AnalysisError):
        build_empirical_model([ep([0])], gamma=1.0)


def test_discounted_returns():
    assert discounted_returns([1.0, 1.0, 1.0], 0.5) == [1.75, 1.5, 1.0]


# transition values

def _model(v, edges):
    trans = {}
    for s, nxt in edges:
        trans.setdefault((s, 0), {})[nxt] = trans.get((s, 0), {}).get(nxt, 0) + 1
    return EmpiricalModel(trans, {}, {}, dict(v))


def test_monotone_chain_extrema():
    # only successors count: s1 undercuts its sole successor, s2 has none
    ext = transition_value_analysis(_model({0: 1, 1: 2, 2: 3}, [(0, 1), (1, 2)]))
    assert ext.local_maxima == set() and ext.local_minima == {0, 1}
    ext = transition_value_analysis(_model({0: 1, 1: 2, 2: 3}, [(0, 1), (1, 2), (2, 1)]))
    assert ext.local_maxima == {2} and ext.local_minima == {0, 1}
    assert ext.absolute_maximum == 2 and ext.absolute_minimum == 0


def test_self_loop_has_no_extrema():
    ext = transition_value_analysis(_model({0: 1.0}, [(0, 0)]))
    assert ext.local_maxima == ext.local_minima == set()


def test_four_state_graph_matches_brute_force():
    v = {0: 0.5, 1: 2.0, 2: 1.0, 3: 3.0}
    edges = [(0, 1), (0, 2), (1, 0), (2, 3), (2, 0), (3, 2), (1, 3)]
    ext = transition_value_analysis(_model(v, edges))
    succ = {s: {b for a, b in edges if a == s and b != s} for s in v}
    assert ext.local_maxima == {s for s in v if succ[s] and all(v[s] > v[x] for x in succ[s])}
    assert ext.local_minima == {s for s in v if succ[s] and all(v[s] < v[x] for x in succ[s])}
    assert ext.local_maxima == {3} and ext.local_minima == {0}


# sequence analysis

def test_deterministic_two_hop_chain():
    m = _model({0: 1, 1: 2, 2: 3}, [(0, 1), (1, 2), (2, 1)])
    ext = ExtremaReport({2}, {0})
    [rec] = sequence_analysis(m, ext, best_state=2)
    assert rec.chain == [0, 0, 1, 0, 2]
    assert rec.reach_probability == 1.0
    assert rec.is_best


def test_low_probability_target_is_unreachable():
    edges = [(0, 1)] * 19 + [(0, 2)]
    m = _model({0: 0, 1: 0.5, 2: 5}, edges)
    [rec] = sequence_analysis(m, ExtremaReport({2}, {0}), p_min=0.1)
    assert not rec.reachable and rec.chain == []


def test_picks_target_with_larger_probability_times_value():
    # 0 -> 1 with 0.5 (V=2), 0 -> 2 with 0.5 then 2 -> 3 with 0.9 (V=1)
    edges = [(0, 1), (0, 2)] + [(2, 3)] * 9 + [(2, 4)]
    m = _model({0: 0, 1: 2.0, 2: 0.5, 3: 1.0, 4: 0.2}, edges)
    [rec] = sequence_analysis(m, ExtremaReport({1, 3}, {0}), p_min=0.1)
    assert rec.end_state == 1
    assert rec.reach_probability == 0.5


# exploit sequences

def test_collapse_trajectory_mirrors_exploit_example():
    chain = collapse_trajectory([100, 100, 50, 25, 0], [2432, 2432, 2435, 2431, 9])
    assert chain == [100, 2432, 50, 2435, 25, 2431, 0]


def test_exploit_sequence_best_flag():
    recs = extract_exploit_sequences([ep([100, 50, 0], name="Run-9-Exploit"),
                                      ep([100, 25], name="Run-10-Exploit")], best_state=0)
    assert [r.is_best for r in recs] == [True, False]
    assert recs[0].run_name == "Run-9-Exploit"


def test_discretize_episodes():
    e = Episode("Run-1-Train", Kind.TRAIN,
                (Step(0, (0.25, 0.01, 0.02), (3, 1, 3, 1, 1, 1, 1, 6), 2.5),))
    [d] = discretize_episodes([e], BinningSpec())
    assert (d.states, d.actions, d.rewards) == ((100,), (2432,), (2.5,))


# properties

counts = st.lists(st.integers(0, 50), min_size=1, max_size=20)


@given(counts)
def test_entropy_bounded(cs):
    assert 0.0 <= normalized_entropy(cs, single=0.0) <= 1.0


trajectories = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 2)), min_size=1, max_size=20)


@settings(max_examples=100)
@given(trajectories)
def test_collapsed_chain_has_no_repeated_neighbours(traj):
    states, actions = zip(*traj)
    chain = collapse_trajectory(states, actions)
    kept = chain[::2]
    assert all(a != b for a, b in zip(kept, kept[1:]))
    assert kept[0] == states[0] and kept[-1] == states[-1]
    assert len(chain) % 2 == 1


@settings(max_examples=100)
@given(trajectories, st.sampled_from([0.0, 0.5, 0.95]))
def test_v_is_max_q_and_extrema_disjoint(traj, gamma):
    states, actions = zip(*traj)
    rewards = [float(s) for s in states]
    m = build_empirical_model([ep(states, actions, rewards)], gamma)
    for s, v in m.v_table.items():
        assert v == max(q for (s2, _), q in m.q_table.items() if s2 == s)
    ext = transition_value_analysis(m)
    assert not ext.local_maxima & ext.local_minima
    for rec in sequence_analysis(m, ext):
        if rec.reachable:
            assert rec.chain[0] in ext.local_minima
            assert rec.end_state in ext.local_maxima
            assert 0.1 <= rec.reach_probability <= 1.0
            assert len(rec.chain) // 2 <= 10
