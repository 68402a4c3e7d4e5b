"""Interaction traces: episodes of (observation, action, reward) steps.

Traces are stored as line-delimited JSON.  The first line is a header
describing the algorithm and dimensionality, every following line is one
step tagged with the run it belongs to.  Steps of one run are contiguous.
"""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

from .io_utils import atomic_write_text

FORMAT_VERSION = 1

OBS_RANGE = (0.0, 1.0)
ACTION_RANGE = (0.0, 7.0)


class Kind(str, enum.Enum):
    TRAIN = "Train"
    EXPLOIT = "Exploit"


class TraceFormatError(ValueError):
    """Malformed or inconsistent trace data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceWriteError(IOError):
    def __init__(self, message: str, records_written: int, bytes_written: int):
        self.records_written = records_written
        self.bytes_written = bytes_written
        super().__init__(
            f"{message} (after {records_written} records, {bytes_written} bytes)"
        )


@dataclass(frozen=True)
class Step:
    tick: int
    observation: tuple[float, ...]
    action: tuple[float, ...]
    reward: float


@dataclass(frozen=True)
class Episode:
    run_name: str
    kind: Kind
    steps: tuple[Step, ...]

    @property
    def rewards(self) -> list[float]:
        return [s.reward for s in self.steps]

    @property
    def mean_reward(self) -> float:
        return math.fsum(self.rewards) / len(self.steps)


@dataclass(frozen=True)
class TraceSet:
    algorithm_name: str
    experiment_name: str
    episodes: tuple[Episode, ...]
    meta: dict[str, str] = field(default_factory=dict)

    @property
    def train(self) -> list[Episode]:
        return [e for e in self.episodes if e.kind is Kind.TRAIN]

    @property
    def exploit(self) -> list[Episode]:
        return [e for e in self.episodes if e.kind is Kind.EXPLOIT]

    @property
    def obs_dim(self) -> int:
        return len(self.episodes[0].steps[0].observation) if self.episodes else 0

    @property
    def act_dim(self) -> int:
        return len(self.episodes[0].steps[0].action) if self.episodes else 0


def kind_from_run_name(run_name: str) -> Kind | None:
    """Kind implied by a ``Run-<n>-Exploit`` style name, if any."""
    suffix = run_name.rsplit("-", 1)[-1]
    for kind in Kind:
        if suffix == kind.value:
            return kind
    return None


def validate_traces(traces: TraceSet) -> list[str]:
    """List every invariant violation; an empty list means the set is valid."""
    problems: list[str] = []
    if not traces.episodes:
        return ["no episodes"]

    ref = None  # (episode name, obs_dim, act_dim)
    seen: set[str] = set()
    for ep in traces.episodes:
        name = ep.run_name
        if name in seen:
            problems.append(f"episode {name}: duplicate run name")
        seen.add(name)
        if not ep.steps:
            problems.append(f"episode {name}: no steps")
            continue
        if ref is None:
            ref = (name, len(ep.steps[0].observation), len(ep.steps[0].action))
        prev_tick = None
        for i, st in enumerate(ep.steps):
            where = f"episode {name}, step {i}"
            if len(st.observation) != ref[1]:
                problems.append(
                    f"{where}: observation dimensionality {len(st.observation)} "
                    f"differs from episode {ref[0]} ({ref[1]})"
                )
            if len(st.action) != ref[2]:
                problems.append(
                    f"{where}: action dimensionality {len(st.action)} "
                    f"differs from episode {ref[0]} ({ref[2]})"
                )
            for j, v in enumerate(st.observation):
                if not OBS_RANGE[0] <= v <= OBS_RANGE[1]:
                    problems.append(f"{where}: observation[{j}]={v} outside [0, 1]")
            for j, v in enumerate(st.action):
                if not ACTION_RANGE[0] <= v <= ACTION_RANGE[1]:
                    problems.append(f"{where}: action[{j}]={v} outside [0, 7]")
            if not math.isfinite(st.reward):
                problems.append(f"{where}: reward is not finite")
            if prev_tick is not None and st.tick <= prev_tick:
                problems.append(
                    f"{where}: tick {st.tick} does not increase (previous {prev_tick})"
                )
            prev_tick = st.tick
    return problems


def _header(traces: TraceSet) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "algorithm_name": traces.algorithm_name,
        "experiment_name": traces.experiment_name,
        "obs_dim": traces.obs_dim,
        "act_dim": traces.act_dim,
        "meta": dict(sorted(traces.meta.items())),
    }


def iter_records(traces: TraceSet) -> Iterable[dict]:
    yield _header(traces)
    for ep in traces.episodes:
        for st in ep.steps:
            yield {
                "run_name": ep.run_name,
                "kind": ep.kind.value,
                "tick": st.tick,
                "observation": list(st.observation),
                "action": list(st.action),
                "reward": st.reward,
            }


def write_traces(traces: TraceSet, sink: IO[str]) -> int:
    """Serialize ``traces`` to a text sink; returns the number of records."""
    problems = validate_traces(traces)
    if problems:
        raise TraceFormatError("; ".join(problems[:5]))
    n_records = n_bytes = 0
    for rec in iter_records(traces):
        line = json.dumps(rec, separators=(",", ":"), allow_nan=False) + "\n"
        try:
            sink.write(line)
        except OSError as exc:
            raise TraceWriteError(str(exc), n_records, n_bytes) from exc
        n_records += 1
        n_bytes += len(line.encode("utf-8"))
    return n_records


def dumps(traces: TraceSet) -> str:
    buf = io.StringIO()
    write_traces(traces, buf)
    return buf.getvalue()


def _floats(value, what: str, lineno: int) -> tuple[float, ...]:
    if not isinstance(value, list):
        raise TraceFormatError(f"{what} must be a list", lineno)
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TraceFormatError(f"{what} contains non-number {v!r}", lineno)
        out.append(float(v))
    return tuple(out)


def read_traces(source: IO[str] | Iterable[str]) -> TraceSet:
    """Parse a trace stream; raises :class:`TraceFormatError` on bad input."""
    header = None
    episodes: list[Episode] = []
    finished: set[str] = set()
    cur_name = cur_kind = None
    cur_steps: list[Step] = []
    ref_dims = None  # (episode name, obs_dim, act_dim)

    def close():
        if cur_name is not None:
            episodes.append(Episode(cur_name, cur_kind, tuple(cur_steps)))
            finished.add(cur_name)

    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(rec, dict):
            raise TraceFormatError("record is not an object", lineno)

        if header is None:
            missing = {"format_version", "algorithm_name", "experiment_name",
                       "obs_dim", "act_dim"} - rec.keys()
            if missing:
                raise TraceFormatError(f"header missing {sorted(missing)}", lineno)
            if rec["format_version"] != FORMAT_VERSION:
                raise TraceFormatError(
                    f"unsupported format_version {rec['format_version']}", lineno)
            header = rec
            continue

        missing = {"run_name", "kind", "tick", "observation", "action", "reward"} - rec.keys()
        if missing:
            raise TraceFormatError(f"step record missing {sorted(missing)}", lineno)
        try:
            kind = Kind(rec["kind"])
        except ValueError:
            raise TraceFormatError(f"unknown kind {rec['kind']!r}", lineno) from None
        name = rec["run_name"]
        tick = rec["tick"]
        if not isinstance(tick, int) or isinstance(tick, bool):
            raise TraceFormatError("tick must be an integer", lineno)
        obs = _floats(rec["observation"], "observation", lineno)
        act = _floats(rec["action"], "action", lineno)
        reward = rec["reward"]
        if isinstance(reward, bool) or not isinstance(reward, (int, float)):
            raise TraceFormatError("reward must be a number", lineno)

        if name != cur_name:
            if name in finished:
                raise TraceFormatError(f"episode {name} is not contiguous", lineno)
            close()
            cur_name, cur_kind, cur_steps = name, kind, []
        elif kind is not cur_kind:
            raise TraceFormatError(f"episode {name} changes kind", lineno)

        if ref_dims is None:
            ref_dims = (name, len(obs), len(act))
            if (len(obs), len(act)) != (header["obs_dim"], header["act_dim"]):
                raise TraceFormatError(
                    f"episode {name} dimensionality ({len(obs)}, {len(act)}) differs "
                    f"from header ({header['obs_dim']}, {header['act_dim']})", lineno)
        elif (len(obs), len(act)) != ref_dims[1:]:
            raise TraceFormatError(
                f"episode {name} has dimensionality ({len(obs)}, {len(act)}) but "
                f"episode {ref_dims[0]} has ({ref_dims[1]}, {ref_dims[2]})", lineno)

        if cur_steps and tick <= cur_steps[-1].tick:
            raise TraceFormatError(
                f"episode {name}: tick {tick} does not increase "
                f"(previous {cur_steps[-1].tick})", lineno)
        cur_steps.append(Step(tick, obs, act, float(reward)))

    if header is None:
        raise TraceFormatError("empty stream, no header")
    close()
    meta = header.get("meta") or {}
    traces = TraceSet(
        algorithm_name=header["algorithm_name"],
        experiment_name=header["experiment_name"],
        episodes=tuple(episodes),
        meta={str(k): str(v) for k, v in meta.items()},
    )
    problems = validate_traces(traces)
    if problems:
        raise TraceFormatError(problems[0])
    return traces


def loads(text: str) -> TraceSet:
    return read_traces(text.splitlines())


def load(path) -> TraceSet:
    with open(path, encoding="utf-8") as fh:
        return read_traces(fh)


def save(traces: TraceSet, path) -> None:
    atomic_write_text(path, dumps(traces))
