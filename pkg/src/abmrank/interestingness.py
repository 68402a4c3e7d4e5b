"""Analyses of an agent's interaction history over discretized traces.

State frequency, state-action frequency, reward outliers, transition
values (local extrema of an empirical value function) and sequences
between extrema.  Every analysis is a pure function of a list of episodes.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from statistics import fmean, pstdev
from typing import Iterable, Sequence

from .discretize import BinningSpec, discretize_step
from .traces import Episode


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteEpisode:
    run_name: str
    states: tuple[int, ...]
    actions: tuple[int, ...]
    rewards: tuple[float, ...]


def discretize_episodes(episodes: Iterable[Episode], spec: BinningSpec) -> list[DiscreteEpisode]:
    out = []
    for ep in episodes:
        pairs = [discretize_step(st, spec) for st in ep.steps]
        out.append(DiscreteEpisode(
            ep.run_name,
            tuple(s for s, _ in pairs),
            tuple(a for _, a in pairs),
            tuple(st.reward for st in ep.steps),
        ))
    if not out:
        raise AnalysisError("no episodes to analyze")
    return out


def normalized_entropy(counts: Iterable[int], single: float) -> float:
    """Shannon entropy of ``counts`` divided by log of the support size.

    ``single`` is returned when fewer than two outcomes have positive counts.
    """
    counts = [c for c in counts if c > 0]
    if len(counts) <= 1:
        return single
    total = sum(counts)
    h = -math.fsum(c / total * math.log(c / total) for c in counts)
    return min(1.0, max(0.0, h / math.log(len(counts))))


@dataclass
class FrequencyTable:
    state_counts: dict[int, int]
    pair_counts: dict[tuple[int, int], int]
    total_steps: int


def frequency_table(episodes: Sequence[DiscreteEpisode]) -> FrequencyTable:
    states: Counter = Counter()
    pairs: Counter = Counter()
    for ep in episodes:
        states.update(ep.states)
        pairs.update(zip(ep.states, ep.actions))
    return FrequencyTable(dict(sorted(states.items())), dict(sorted(pairs.items())),
                          sum(len(ep.states) for ep in episodes))


@dataclass
class StateFrequency:
    counts: dict[int, int]
    coverage: float
    dispersion: float
    frequent: set[int]
    infrequent: set[int]


def state_frequency_analysis(
    episodes: Sequence[DiscreteEpisode],
    valid_states: Sequence[int],
    k: float = 1.0,
) -> StateFrequency:
    """Coverage of valid states, visit dispersion and frequent/infrequent states.

    Frequent states have counts at least mean + k*std of the visit counts,
    infrequent ones at most max(1, mean - k*std).
    """
    if not episodes or not any(ep.states for ep in episodes):
        raise AnalysisError("state frequency analysis needs at least one step")
    if not valid_states:
        raise AnalysisError("no valid states")
    counts = frequency_table(episodes).state_counts
    coverage = len(counts.keys() & set(valid_states)) / len(valid_states)
    dispersion = normalized_entropy(counts.values(), single=1.0)
    mu, sigma = fmean(counts.values()), pstdev(counts.values())
    frequent = {s for s, c in counts.items() if c >= mu + k * sigma}
    infrequent = {s for s, c in counts.items() if c <= max(1.0, mu - k * sigma)}
    return StateFrequency(counts, coverage, dispersion, frequent, infrequent)


def pair_coverage(n_states: int, n_pairs: int, budget: int) -> float:
    """Distinct (state, action) pairs over a per-visited-state action budget."""
    if n_states == 0:
        raise AnalysisError("no visited states")
    if budget < 1:
        raise AnalysisError("candidate action budget must be positive")
    return min(1.0, n_pairs / (n_states * budget))


@dataclass
class StateActionFrequency:
    pair_counts: dict[tuple[int, int], int]
    pair_coverage: float
    dispersion: dict[int, float]
    mean_dispersion: float
    certain: set[int]
    uncertain: set[int]


def state_action_frequency_analysis(
    episodes: Sequence[DiscreteEpisode],
    budget: int = 8,
    certain_max: float = 0.25,
    uncertain_min: float = 0.75,
) -> StateActionFrequency:
    if not episodes or not any(ep.states for ep in episodes):
        raise AnalysisError("state-action frequency analysis needs at least one step")
    table = frequency_table(episodes)
    per_state: dict[int, list[int]] = defaultdict(list)
    for (s, _a), c in table.pair_counts.items():
        per_state[s].append(c)
    dispersion = {s: normalized_entropy(cs, single=0.0) for s, cs in sorted(per_state.items())}
    return StateActionFrequency(
        pair_counts=table.pair_counts,
        pair_coverage=pair_coverage(len(per_state), len(table.pair_counts), budget),
        dispersion=dispersion,
        mean_dispersion=fmean(dispersion.values()),
        certain={s for s, d in dispersion.items() if d <= certain_max},
        uncertain={s for s, d in dispersion.items() if d >= uncertain_min},
    )


@dataclass
class RewardAnalysis:
    mean_reward: dict[tuple[int, int], float]
    high: set[tuple[int, int]]
    low: set[tuple[int, int]]


def reward_analysis(episodes: Sequence[DiscreteEpisode], k: float = 1.0) -> RewardAnalysis:
    """Pairs whose mean reward is more than ``k`` std away from the mean of pair means."""
    sums: dict[tuple[int, int], list[float]] = defaultdict(list)
    for ep in episodes:
        for s, a, r in zip(ep.states, ep.actions, ep.rewards):
            sums[(s, a)].append(r)
    if not sums:
        raise AnalysisError("reward analysis needs at least one step")
    means = {p: math.fsum(rs) / len(rs) for p, rs in sorted(sums.items())}
    mu, sigma = fmean(means.values()), pstdev(means.values())
    if sigma == 0:
        return RewardAnalysis(means, set(), set())
    return RewardAnalysis(
        means,
        high={p for p, m in means.items() if m > mu + k * sigma},
        low={p for p, m in means.items() if m < mu - k * sigma},
    )


@dataclass
class EmpiricalModel:
    transition_counts: dict[tuple[int, int], dict[int, int]]
    pair_counts: dict[tuple[int, int], int]
    q_table: dict[tuple[int, int], float]
    v_table: dict[int, float]
    gamma: float = 0.95

    def transition_probs(self, state: int, action: int) -> dict[int, float]:
        row = self.transition_counts.get((state, action), {})
        total = sum(row.values())
        return {s: c / total for s, c in row.items()} if total else {}

    def successors(self, state: int) -> set[int]:
        out = set()
        for (s, _a), row in self.transition_counts.items():
            if s == state:
                out.update(row)
        return out


def discounted_returns(rewards: Sequence[float], gamma: float) -> list[float]:
    out = [0.0] * len(rewards)
    g = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


def build_empirical_model(episodes: Sequence[DiscreteEpisode], gamma: float = 0.95) -> EmpiricalModel:
    """Empirical transition counts and Monte-Carlo Q/V estimates.

    Q(s, a) is the mean discounted return observed after every occurrence
    of (s, a); V(s) is the best Q over actions executed in s.
    """
    if not 0.0 <= gamma < 1.0:
        raise AnalysisError(f"gamma must be in [0, 1), got {gamma}")
    if not episodes or not any(ep.states for ep in episodes):
        raise AnalysisError("empirical model needs at least one step")
    trans: dict[tuple[int, int], Counter] = defaultdict(Counter)
    returns: dict[tuple[int, int], list[float]] = defaultdict(list)
    for ep in episodes:
        for t, g in enumerate(discounted_returns(ep.rewards, gamma)):
            pair = (ep.states[t], ep.actions[t])
            returns[pair].append(g)
            if t + 1 < len(ep.states):
                trans[pair][ep.states[t + 1]] += 1
    q = {p: math.fsum(gs) / len(gs) for p, gs in sorted(returns.items())}
    v: dict[int, float] = {}
    for (s, _a), val in q.items():
        v[s] = max(v.get(s, -math.inf), val)
    return EmpiricalModel(
        transition_counts={p: dict(sorted(row.items())) for p, row in sorted(trans.items())},
        pair_counts={p: len(gs) for p, gs in sorted(returns.items())},
        q_table=q,
        v_table=dict(sorted(v.items())),
        gamma=gamma,
    )


@dataclass
class ExtremaReport:
    local_maxima: set[int]
    local_minima: set[int]
    absolute_maximum: int | None = None
    absolute_minimum: int | None = None


def transition_value_analysis(model: EmpiricalModel) -> ExtremaReport:
    maxima, minima = set(), set()
    for s, v in model.v_table.items():
        succ = model.successors(s) - {s}
        if not succ:
            continue
        sv = [model.v_table[x] for x in succ]
        if all(v > x for x in sv):
            maxima.add(s)
        elif all(v < x for x in sv):
            minima.add(s)
    vt = model.v_table
    return ExtremaReport(
        maxima, minima,
        absolute_maximum=max(vt, key=lambda s: (vt[s], -s)) if vt else None,
        absolute_minimum=min(vt, key=lambda s: (vt[s], s)) if vt else None,
    )


@dataclass
class SequenceRecord:
    run_name: str
    chain: list[int]
    reach_probability: float
    is_best: bool
    reachable: bool = True

    @property
    def end_state(self) -> int | None:
        return self.chain[-1] if self.chain else None


def most_likely_action(model: EmpiricalModel, state: int) -> int | None:
    """Most frequently executed action with an observed successor; ties go to the lower index."""
    best = None
    for (s, a), row in model.transition_counts.items():
        if s != state:
            continue
        n = sum(row.values())
        if best is None or n > best[0] or (n == best[0] and a < best[1]):
            best = (n, a)
    return None if best is None else best[1]


def sequence_analysis(
    model: EmpiricalModel,
    extrema: ExtremaReport,
    p_min: float = 0.1,
    max_len: int = 10,
    best_state: int | None = None,
) -> list[SequenceRecord]:
    """Plan one sequence from every local minimum to its most valuable reachable maximum.

    From each state the most likely action is taken and every observed
    successor is followed (no state repeated, at most ``max_len``
    transitions, accumulated probability kept >= ``p_min``).  The target is
    the local maximum maximising probability * V.
    """
    if not 0.0 < p_min <= 1.0:
        raise AnalysisError(f"p_min must be in (0, 1], got {p_min}")
    records = []
    for start in sorted(extrema.local_minima):
        best = None  # (score, prob, -target, chain)
        stack = [(start, 1.0, [start])]
        while stack:
            s, prob, chain = stack.pop()
            if s != start and s in extrema.local_maxima:
                key = (prob * model.v_table[s], prob, -s)
                if best is None or key > best[0]:
                    best = (key, chain)
            if len(chain) // 2 >= max_len:
                continue
            a = most_likely_action(model, s)
            if a is None:
                continue
            probs = model.transition_probs(s, a)
            visited = set(chain[::2])
            # reversed so the lowest successor index is explored first
            for nxt in sorted(probs, reverse=True):
                p = prob * probs[nxt]
                if nxt in visited or p < p_min:
                    continue
                stack.append((nxt, p, chain + [a, nxt]))
        name = f"planned-from-{start}"
        if best is None:
            records.append(SequenceRecord(name, [], 0.0, False, reachable=False))
        else:
            (_, prob, _), chain = best
            records.append(SequenceRecord(
                name, chain, prob,
                is_best=best_state is not None and chain[-1] == best_state,
            ))
    return records


def collapse_trajectory(states: Sequence[int], actions: Sequence[int]) -> list[int]:
    """Alternating state/action chain with repeated consecutive states merged.

    Each kept state is followed by the action executed when it was entered.
    """
    stretches: list[tuple[int, int]] = []  # (state, action on entry)
    for s, a in zip(states, actions):
        if not stretches or stretches[-1][0] != s:
            stretches.append((s, a))
    chain: list[int] = []
    for s, a in stretches[:-1]:
        chain += [s, a]
    if stretches:
        chain.append(stretches[-1][0])
    return chain


def extract_exploit_sequences(
    episodes: Sequence[DiscreteEpisode], best_state: int = 0,
) -> list[SequenceRecord]:
    return [
        SequenceRecord(
            ep.run_name,
            chain := collapse_trajectory(ep.states, ep.actions),
            1.0,
            is_best=chain[-1] == best_state,
        )
        for ep in episodes if ep.states
    ]
