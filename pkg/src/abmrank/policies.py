"""Baseline policies and noise wrappers that generate traces for ranking.

Variants are labelled ``[NR_][BN_]<base>``: ``NR_`` perturbs the emitted
action (directives not followed exactly), ``BN_`` perturbs the observation
the policy sees (imprecise measurement).
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .discretize import BinningSpec, bin_midpoints, decode, state_index
from .epi_sim import MAX_DAYS, N_ACTION, SimConfig, simulate
from .traces import Kind, TraceSet

BASES = ("Random", "Heuristic", "BinnedQ")


class Policy:
    """Observation -> 8 action components in days.

    ``train`` toggles learning/exploration; ``feedback`` receives the reward
    of the last action and ``end_episode`` closes an episode.
    """

    train = False

    def __call__(self, observation: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def feedback(self, reward: float) -> None:
        pass

    def end_episode(self) -> None:
        pass

    def set_train(self, flag: bool) -> None:
        self.train = flag


class RandomPolicy(Policy):
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def __call__(self, observation):
        return self.rng.uniform(0.0, MAX_DAYS, size=N_ACTION)


def random_policy(observation, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, MAX_DAYS, size=N_ACTION)


def heuristic_policy(observation: Sequence[float], full_lockdown_at: float = 0.2,
                     economy_guard: float = 0.1) -> np.ndarray:
    """Lock down in proportion to mild infections unless households are struggling."""
    mild, _hosp, poor = observation[:3]
    duration = min(1.0, mild / full_lockdown_at) * MAX_DAYS
    if poor > economy_guard:
        duration = 0.0
    half = MAX_DAYS / 2
    return np.array([0.0, duration, 0.0, half, 0.0, half, 0.0, MAX_DAYS])


class HeuristicPolicy(Policy):
    def __call__(self, observation):
        return heuristic_policy(observation)


class QLearner:
    """Tabular Q-learning with a linearly decaying epsilon-greedy rule."""

    def __init__(self, n_states: int, n_actions: int, rng: np.random.Generator,
                 learning_rate: float = 0.1, gamma: float = 0.95,
                 epsilon_start: float = 0.2, epsilon_end: float = 0.02,
                 decay_steps: int = 500):
        self.q = np.zeros((n_states, n_actions))
        self.rng = rng
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.epsilon_start = epsilon_start
        self.epsilon_end = epsilon_end
        self.decay_steps = decay_steps
        self.updates = 0

    @property
    def epsilon(self) -> float:
        frac = min(1.0, self.updates / self.decay_steps) if self.decay_steps > 0 else 1.0
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    def greedy(self, state: int) -> int:
        return int(np.argmax(self.q[state]))  # ties: lowest index

    def select(self, state: int, explore: bool) -> int:
        if explore and self.rng.random() < self.epsilon:
            return int(self.rng.integers(self.q.shape[1]))
        return self.greedy(state)

    def update(self, state: int, action: int, reward: float, next_state: int | None) -> None:
        target = reward
        if next_state is not None:
            target += self.gamma * self.q[next_state].max()
        self.q[state, action] += self.learning_rate * (target - self.q[state, action])
        self.updates += 1


class BinnedQPolicy(Policy):
    """Q-learning over discretized states and actions.

    Chosen action indices are emitted at the midpoints of their bins.
    Updates are one step late: the transition is closed when the next
    state is seen, or at the end of the episode without bootstrapping.
    """

    def __init__(self, rng: np.random.Generator, spec: BinningSpec | None = None, **learner_kw):
        self.spec = spec or BinningSpec()
        self.learner = QLearner(self.spec.n_states, self.spec.n_actions, rng, **learner_kw)
        self._pending: tuple[int, int, float | None] | None = None

    def action_values(self, action_idx: int) -> np.ndarray:
        bins = decode(action_idx, self.spec.action_radices)
        return np.array(bin_midpoints(bins, self.spec.action_edges))

    def __call__(self, observation):
        s = state_index(np.clip(observation, 0.0, 1.0), self.spec)
        if self.train and self._pending is not None:
            ps, pa, pr = self._pending
            if pr is not None:
                self.learner.update(ps, pa, pr, s)
        a = self.learner.select(s, explore=self.train)
        self._pending = (s, a, None)
        return self.action_values(a)

    def feedback(self, reward):
        if self._pending is not None:
            s, a, _ = self._pending
            self._pending = (s, a, reward)

    def end_episode(self):
        if self.train and self._pending is not None and self._pending[2] is not None:
            s, a, r = self._pending
            self.learner.update(s, a, r, None)
        self._pending = None


def binned_q_policy(train: bool, q_state: BinnedQPolicy, observation) -> np.ndarray:
    q_state.set_train(train)
    return q_state(observation)


class _Wrapper(Policy):
    def __init__(self, inner: Policy):
        self.inner = inner

    @property
    def train(self):
        return getattr(self.inner, "train", False)

    def set_train(self, flag):
        if hasattr(self.inner, "set_train"):
            self.inner.set_train(flag)

    def feedback(self, reward):
        if hasattr(self.inner, "feedback"):
            self.inner.feedback(reward)

    def end_episode(self):
        if hasattr(self.inner, "end_episode"):
            self.inner.end_episode()


class ActionNoise(_Wrapper):
    def __init__(self, inner, scale: float, rng: np.random.Generator):
        if scale < 0:
            raise ValueError("noise scale must be non-negative")
        super().__init__(inner)
        self.scale, self.rng = scale, rng

    def __call__(self, observation):
        a = np.asarray(self.inner(observation), dtype=float)
        if self.scale == 0:
            return a
        noisy = a + self.rng.normal(0.0, self.scale * MAX_DAYS, size=a.shape)
        return np.clip(noisy, 0.0, MAX_DAYS)


class ObservationNoise(_Wrapper):
    def __init__(self, inner, scale: float, rng: np.random.Generator):
        if scale < 0:
            raise ValueError("noise scale must be non-negative")
        super().__init__(inner)
        self.scale, self.rng = scale, rng

    def __call__(self, observation):
        o = np.asarray(observation, dtype=float)
        if self.scale > 0:
            o = np.clip(o + self.rng.normal(0.0, self.scale, size=o.shape), 0.0, 1.0)
        return self.inner(o)


def wrap_action_noise(policy, scale: float, rng: np.random.Generator) -> ActionNoise:
    return ActionNoise(policy, scale, rng)


def wrap_observation_noise(policy, scale: float, rng: np.random.Generator) -> ObservationNoise:
    return ObservationNoise(policy, scale, rng)


_LABEL = re.compile(r"^(NR_)?(BN_)?(" + "|".join(BASES) + r")$")


@dataclass(frozen=True)
class PolicyVariant:
    base: str
    action_noise: bool = False
    observation_noise: bool = False
    noise_scale: float = 0.1

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"unknown base policy {self.base!r}; expected one of {BASES}")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")

    @property
    def label(self) -> str:
        return ("NR_" if self.action_noise else "") + ("BN_" if self.observation_noise else "") + self.base

    @classmethod
    def from_label(cls, label: str, noise_scale: float = 0.1) -> "PolicyVariant":
        m = _LABEL.match(label)
        if not m:
            raise ValueError(f"bad variant label {label!r}")
        return cls(m.group(3), bool(m.group(1)), bool(m.group(2)), noise_scale)


def default_roster(noise_scale: float = 0.1) -> list[PolicyVariant]:
    return [PolicyVariant(base, nr, bn, noise_scale)
            for base in ("Heuristic", "BinnedQ")
            for nr in (False, True)
            for bn in (False, True)]


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=keys))


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def build_policy(variant: PolicyVariant, seed: int, spec: BinningSpec | None = None,
                 learner_kw: dict | None = None) -> Policy:
    """Instantiate the wrapper stack for ``variant`` with independent RNG streams."""
    key = label_key(variant.label)
    if variant.base == "Random":
        policy: Policy = RandomPolicy(_rng(seed, key, 0))
    elif variant.base == "Heuristic":
        policy = HeuristicPolicy()
    else:
        policy = BinnedQPolicy(_rng(seed, key, 0), spec, **(learner_kw or {}))
    if variant.observation_noise:
        policy = ObservationNoise(policy, variant.noise_scale, _rng(seed, key, 1))
    if variant.action_noise:
        policy = ActionNoise(policy, variant.noise_scale, _rng(seed, key, 2))
    return policy


def generate_variant_traces(
    config: SimConfig,
    variant: PolicyVariant,
    train_episodes: int,
    exploit_episodes: int,
    seed: int,
    experiment_name: str = "experiment",
    spec: BinningSpec | None = None,
    learner_kw: dict | None = None,
    curves: list | None = None,
) -> TraceSet:
    """Train then exploit one variant.

    Episode ``i`` of every variant uses the same simulator seed, so variants
    face identical world draws.  Compartment curves of the exploit runs are
    appended to ``curves`` when given.
    """
    policy = build_policy(variant, seed, spec, learner_kw)
    episodes = []
    n = 0
    for kind, count in ((Kind.TRAIN, train_episodes), (Kind.EXPLOIT, exploit_episodes)):
        policy.set_train(kind is Kind.TRAIN)
        for _ in range(count):
            n += 1
            sim_seed = int(_rng(seed, 0, n).integers(2**63))
            res = simulate(config, policy, sim_seed, f"Run-{n}-{kind.value}", kind)
            policy.end_episode()
            episodes.append(res.episode)
            if curves is not None and kind is Kind.EXPLOIT:
                curves.append(res.curve)
    return TraceSet(
        algorithm_name=variant.label,
        experiment_name=experiment_name,
        episodes=tuple(episodes),
        meta={
            "base": variant.base,
            "noise_scale": repr(variant.noise_scale),
            "seed": str(seed),
            "train_episodes": str(train_episodes),
            "exploit_episodes": str(exploit_episodes),
        },
    )


def generate_traces(
    config: SimConfig,
    variants: Sequence[PolicyVariant],
    train_episodes: int,
    exploit_episodes: int,
    seed: int,
    experiment_name: str = "experiment",
    spec: BinningSpec | None = None,
    learner_kw: dict | None = None,
) -> list[TraceSet]:
    if not variants:
        raise ValueError("no variants to simulate")
    return [generate_variant_traces(config, v, train_episodes, exploit_episodes, seed,
                                    experiment_name, spec, learner_kw)
            for v in variants]
