"""Binning of continuous observation/action vectors into integer indices.

Each component is binned against its own edge list and the per-component
bin indices are packed into one integer with a big-endian mixed radix
(first component most significant).
"""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field
from math import prod
from typing import Callable, Mapping, Sequence

STATE_EDGES = (0.0, 0.05, 0.10, 0.15, 0.20, 1.0)
ACTION_EDGES = (0.0, 2.5, 5.0, 7.0)

# observation components: infected-mild, hospitalized, below-poverty-line households
HOSPITALIZED = 1


class BinningError(ValueError):
    pass


def _check_edges(edges: Sequence[float], name: str) -> tuple[float, ...]:
    edges = tuple(float(e) for e in edges)
    if len(edges) < 2:
        raise BinningError(f"{name}: need at least two edges")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise BinningError(f"{name}: edges must be strictly increasing, got {edges}")
    return edges


@dataclass(frozen=True)
class BinningSpec:
    state_edges: tuple[tuple[float, ...], ...] = (STATE_EDGES,) * 3
    action_edges: tuple[tuple[float, ...], ...] = (ACTION_EDGES,) * 8

    def __post_init__(self):
        object.__setattr__(self, "state_edges", tuple(
            _check_edges(e, f"state component {i}") for i, e in enumerate(self.state_edges)))
        object.__setattr__(self, "action_edges", tuple(
            _check_edges(e, f"action component {i}") for i, e in enumerate(self.action_edges)))

    @property
    def state_radices(self) -> tuple[int, ...]:
        return tuple(len(e) - 1 for e in self.state_edges)

    @property
    def action_radices(self) -> tuple[int, ...]:
        return tuple(len(e) - 1 for e in self.action_edges)

    @property
    def n_states(self) -> int:
        return prod(self.state_radices)

    @property
    def n_actions(self) -> int:
        return prod(self.action_radices)


def bin_component(value: float, edges: Sequence[float], component: str = "value") -> int:
    """Index ``i`` with ``edges[i] <= value < edges[i+1]``; the last bin is closed."""
    lo, hi = edges[0], edges[-1]
    if not lo <= value <= hi:
        raise BinningError(f"{component}={value} outside [{lo}, {hi}]")
    if value == hi:
        return len(edges) - 2
    return bisect.bisect_right(edges, value) - 1


def encode(bins: Sequence[int], radices: Sequence[int]) -> int:
    if len(bins) != len(radices):
        raise BinningError(f"expected {len(radices)} bin indices, got {len(bins)}")
    index = 0
    for i, (b, r) in enumerate(zip(bins, radices)):
        if not 0 <= b < r:
            raise BinningError(f"bin index {b} of component {i} not in [0, {r})")
        index = index * r + b
    return index


def decode(index: int, radices: Sequence[int]) -> list[int]:
    total = prod(radices)
    if not 0 <= index < total:
        raise BinningError(f"index {index} not in [0, {total})")
    bins = []
    for r in reversed(radices):
        index, b = divmod(index, r)
        bins.append(b)
    return bins[::-1]


def state_bins(observation: Sequence[float], spec: BinningSpec) -> list[int]:
    return [bin_component(v, e, f"observation[{i}]")
            for i, (v, e) in enumerate(zip(observation, spec.state_edges))]


def action_bins(action: Sequence[float], spec: BinningSpec) -> list[int]:
    return [bin_component(v, e, f"action[{i}]")
            for i, (v, e) in enumerate(zip(action, spec.action_edges))]


def state_index(observation: Sequence[float], spec: BinningSpec) -> int:
    if len(observation) != len(spec.state_edges):
        raise BinningError(f"observation has {len(observation)} components, "
                           f"binning expects {len(spec.state_edges)}")
    return encode(state_bins(observation, spec), spec.state_radices)


def action_index(action: Sequence[float], spec: BinningSpec) -> int:
    if len(action) != len(spec.action_edges):
        raise BinningError(f"action has {len(action)} components, "
                           f"binning expects {len(spec.action_edges)}")
    return encode(action_bins(action, spec), spec.action_radices)


def discretize_step(step, spec: BinningSpec) -> tuple[int, int]:
    return state_index(step.observation, spec), action_index(step.action, spec)


def bin_ranges(index: int, edges: Sequence[Sequence[float]]) -> list[tuple[float, float]]:
    """Per-component ``(lo, hi)`` ranges of the bins behind ``index``."""
    bins = decode(index, [len(e) - 1 for e in edges])
    return [(e[b], e[b + 1]) for b, e in zip(bins, edges)]


def bin_midpoints(bins: Sequence[int], edges: Sequence[Sequence[float]]) -> list[float]:
    return [(e[b] + e[b + 1]) / 2 for b, e in zip(bins, edges)]


@dataclass(frozen=True)
class ValidityMask:
    """Per-component upper bounds on state bin indices.

    ``max_bins`` maps component number to the largest admissible bin index.
    An explicit ``predicate`` overrides it.
    """

    max_bins: Mapping[int, int] = field(default_factory=lambda: {HOSPITALIZED: 1})
    predicate: Callable[[Sequence[int]], bool] | None = None

    def __call__(self, bins: Sequence[int]) -> bool:
        if self.predicate is not None:
            return bool(self.predicate(bins))
        return all(bins[c] <= m for c, m in self.max_bins.items())


def enumerate_valid(mask: ValidityMask, radices: Sequence[int]) -> list[int]:
    """All state indices whose bin vectors satisfy ``mask``, ascending."""
    return [encode(bins, radices)
            for bins in itertools.product(*(range(r) for r in radices))
            if mask(bins)]
