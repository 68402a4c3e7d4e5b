"""Toolkit configuration loaded from YAML."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .discretize import BinningSpec, ValidityMask, enumerate_valid
from .epi_sim import SimConfig
from .policies import PolicyVariant

CONFIG_ENV = "ABMRANK_CONFIG"


class ConfigError(ValueError):
    pass


def default_config_text() -> str:
    return resources.files("abmrank").joinpath("default_config.yaml").read_text(encoding="utf-8")


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class AnalysisSettings:
    """Everything an analysis report depends on; echoed in report headers."""

    binning: BinningSpec = field(default_factory=BinningSpec)
    validity: dict[int, int] = field(default_factory=lambda: {1: 1})
    best_state: int = 0
    gamma: float = 0.95
    frequency_k: float = 1.0
    reward_k: float = 1.0
    certain_max: float = 0.25
    uncertain_min: float = 0.75
    p_min: float = 0.1
    max_len: int = 10
    unified_budget: int = 8
    unified_weight: float = 0.5

    @property
    def mask(self) -> ValidityMask:
        return ValidityMask(dict(self.validity))

    def valid_states(self) -> list[int]:
        return enumerate_valid(self.mask, self.binning.state_radices)

    def to_dict(self) -> dict:
        return {
            "state_edges": [list(e) for e in self.binning.state_edges],
            "action_edges": [list(e) for e in self.binning.action_edges],
            "validity": [{"component": c, "max_bin_index": m}
                         for c, m in sorted(self.validity.items())],
            "best_state": self.best_state,
            "gamma": self.gamma,
            "frequency_k": self.frequency_k,
            "reward_k": self.reward_k,
            "certain_max": self.certain_max,
            "uncertain_min": self.uncertain_min,
            "p_min": self.p_min,
            "max_len": self.max_len,
            "unified_budget": self.unified_budget,
            "unified_weight": self.unified_weight,
            "unified_formula": "100*(w*state_frac + (1-w)*min(1, pairs/(visited_states*budget)))",
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisSettings":
        return cls(
            binning=BinningSpec(tuple(map(tuple, d["state_edges"])),
                                tuple(map(tuple, d["action_edges"]))),
            validity=_validity(d["validity"]),
            **{k: d[k] for k in ("best_state", "gamma", "frequency_k", "reward_k",
                                 "certain_max", "uncertain_min", "p_min", "max_len",
                                 "unified_budget", "unified_weight")},
        )


def _validity(entries: Any) -> dict[int, int]:
    if entries is None:
        return {}
    if not isinstance(entries, list):
        raise ConfigError("validity must be a list of {component, max_bin_index} entries")
    out = {}
    for e in entries:
        try:
            out[int(e["component"])] = int(e["max_bin_index"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"bad validity entry {e!r}") from None
    return out


@dataclass
class ToolkitConfig:
    analysis: AnalysisSettings
    simulation: SimConfig
    experiments: dict[str, dict]
    variants: list[PolicyVariant]
    learner: dict[str, float]
    train_episodes: int
    exploit_episodes: int
    seed: int
    alpha: float
    windows: int
    output_dir: Path
    source: str = "<default>"

    def experiment(self, name: str) -> SimConfig:
        if name not in self.experiments:
            raise ConfigError(
                f"unknown experiment {name!r}; known: {', '.join(self.experiments)}")
        return self.simulation.with_overrides(**self.experiments[name])

    def variant(self, label: str) -> PolicyVariant:
        for v in self.variants:
            if v.label == label:
                return v
        raise ConfigError(
            f"unknown variant {label!r}; known: {', '.join(v.label for v in self.variants)}")


def _variants(raw: Any, default_scale: float) -> list[PolicyVariant]:
    out = []
    for entry in raw or []:
        if isinstance(entry, str):
            label, scale = entry, default_scale
        elif isinstance(entry, dict) and "label" in entry:
            label, scale = entry["label"], float(entry.get("noise_scale", default_scale))
        else:
            raise ConfigError(f"bad variant entry {entry!r}")
        try:
            out.append(PolicyVariant.from_label(label, scale))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    labels = [v.label for v in out]
    if len(set(labels)) != len(labels):
        raise ConfigError("variant labels must be unique")
    return out


def parse_config(data: dict, source: str = "<dict>") -> ToolkitConfig:
    data = _merge(yaml.safe_load(default_config_text()), data or {})
    try:
        b = data["binning"]
        an, mt, rl, runs = data["analysis"], data["metrics"], data["reliability"], data["runs"]
        settings = AnalysisSettings(
            binning=BinningSpec(tuple(map(tuple, b["state_edges"])),
                                tuple(map(tuple, b["action_edges"]))),
            validity=_validity(data.get("validity")),
            best_state=int(data["best_state"]),
            gamma=float(an["gamma"]),
            frequency_k=float(an["frequency_k"]),
            reward_k=float(an["reward_k"]),
            certain_max=float(an["certain_max"]),
            uncertain_min=float(an["uncertain_min"]),
            p_min=float(an["p_min"]),
            max_len=int(an["max_len"]),
            unified_budget=int(mt["unified_budget"]),
            unified_weight=float(mt["unified_weight"]),
        )
        sim = SimConfig.from_dict(data["simulation"])
        experiments = data["experiments"] or {}
        for name, over in experiments.items():
            sim.with_overrides(**(over or {}))  # fail early on unknown keys
        cfg = ToolkitConfig(
            analysis=settings,
            simulation=sim,
            experiments={k: dict(v or {}) for k, v in experiments.items()},
            variants=_variants(data["variants"], float(data["noise_scale"])),
            learner=dict(data["learner"]),
            train_episodes=int(runs["train_episodes"]),
            exploit_episodes=int(runs["exploit_episodes"]),
            seed=int(runs["seed"]),
            alpha=float(rl["alpha"]),
            windows=int(rl["windows"]),
            output_dir=Path(data["output_dir"]),
            source=source,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: invalid configuration ({exc})") from None
    if not 0 <= settings.best_state < settings.binning.n_states:
        raise ConfigError(f"best_state {settings.best_state} outside the state space")
    return cfg


def load_config(path: str | os.PathLike | None = None) -> ToolkitConfig:
    """Load ``path``, else ``$ABMRANK_CONFIG``, else the packaged defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return parse_config({}, "<default>")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data, str(path))
