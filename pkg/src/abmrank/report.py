"""Per-algorithm analysis reports and their line-delimited JSON form.

A report bundles every interaction analysis of one trace set together
with the raw reward series the metrics need, so ranking never has to
re-read traces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

from . import domain_metrics as dm
from . import interestingness as it
from .config import AnalysisSettings
from .reliability import ReliabilityScores, reliability_scores
from .traces import TraceSet

REPORT_VERSION = 1


class ReportError(ValueError):
    pass


@dataclass
class AnalysisReport:
    algorithm: str
    experiment: str
    settings: AnalysisSettings
    valid_state_count: int
    state_frequency: it.StateFrequency
    state_action: it.StateActionFrequency
    reward: it.RewardAnalysis
    model: it.EmpiricalModel
    extrema: it.ExtremaReport
    planned_sequences: list[it.SequenceRecord]
    exploit_sequences: list[it.SequenceRecord]
    train_rewards: list[list[float]]
    exploit_rewards: list[list[float]]
    exploit_runs: list[str]

    @property
    def train_curve(self) -> list[float]:
        return [sum(rs) / len(rs) for rs in self.train_rewards]

    @property
    def exploit_means(self) -> list[float]:
        return [sum(rs) / len(rs) for rs in self.exploit_rewards]

    def metric_row(self) -> dm.MetricRow:
        valid = self.settings.valid_states()
        return dm.MetricRow(
            algorithm=self.algorithm,
            mean_reward_train=dm.mean_reward_metric(self.train_rewards),
            state_coverage_pct=dm.state_coverage_metric(self.state_frequency.counts, valid),
            unified_coverage_pct=dm.unified_coverage_metric(
                self.state_action.pair_counts, valid,
                self.settings.unified_budget, self.settings.unified_weight),
            best_sequence_pct=dm.sequence_comparison_metric(self.exploit_sequences),
            median_mean_reward_exploit=dm.median_mean_reward_metric(self.exploit_means),
        )

    def reliability(self, alpha: float = 0.05, windows: int = 3) -> ReliabilityScores:
        return reliability_scores(self.train_curve, alpha, windows)


def analyze(traces: TraceSet, settings: AnalysisSettings) -> AnalysisReport:
    """Run all interaction analyses on one trace set."""
    if not traces.train:
        raise ReportError(f"{traces.algorithm_name}: no training episodes")
    if not traces.exploit:
        raise ReportError(f"{traces.algorithm_name}: no exploit episodes")
    spec = settings.binning
    train = it.discretize_episodes(traces.train, spec)
    exploit = it.discretize_episodes(traces.exploit, spec)
    valid = settings.valid_states()

    model = it.build_empirical_model(train, settings.gamma)
    extrema = it.transition_value_analysis(model)
    return AnalysisReport(
        algorithm=traces.algorithm_name,
        experiment=traces.experiment_name,
        settings=settings,
        valid_state_count=len(valid),
        state_frequency=it.state_frequency_analysis(train, valid, settings.frequency_k),
        state_action=it.state_action_frequency_analysis(
            train, settings.unified_budget, settings.certain_max, settings.uncertain_min),
        reward=it.reward_analysis(train, settings.reward_k),
        model=model,
        extrema=extrema,
        planned_sequences=it.sequence_analysis(
            model, extrema, settings.p_min, settings.max_len, settings.best_state),
        exploit_sequences=it.extract_exploit_sequences(exploit, settings.best_state),
        train_rewards=[list(e.rewards) for e in traces.train],
        exploit_rewards=[list(e.rewards) for e in traces.exploit],
        exploit_runs=[e.run_name for e in traces.exploit],
    )


def _seq(rec: it.SequenceRecord, section: str, **extra) -> dict:
    return {"section": section, "run_name": rec.run_name, "chain": rec.chain,
            "reach_probability": rec.reach_probability, "is_best": rec.is_best,
            "reachable": rec.reachable, **extra}


def report_records(rep: AnalysisReport) -> Iterable[dict]:
    sf, sa, rw, md, ex = rep.state_frequency, rep.state_action, rep.reward, rep.model, rep.extrema
    yield {"section": "header", "report_version": REPORT_VERSION,
           "algorithm": rep.algorithm, "experiment": rep.experiment,
           "settings": rep.settings.to_dict(), "valid_state_count": rep.valid_state_count}
    yield {"section": "state_frequency",
           "counts": [[s, c] for s, c in sf.counts.items()],
           "coverage": sf.coverage, "dispersion": sf.dispersion,
           "frequent": sorted(sf.frequent), "infrequent": sorted(sf.infrequent)}
    yield {"section": "state_action_frequency",
           "pair_counts": [[s, a, c] for (s, a), c in sa.pair_counts.items()],
           "pair_coverage": sa.pair_coverage,
           "dispersion": [[s, d] for s, d in sa.dispersion.items()],
           "mean_dispersion": sa.mean_dispersion,
           "certain": sorted(sa.certain), "uncertain": sorted(sa.uncertain)}
    yield {"section": "reward",
           "mean_reward": [[s, a, m] for (s, a), m in rw.mean_reward.items()],
           "high": sorted(map(list, rw.high)), "low": sorted(map(list, rw.low))}
    yield {"section": "transition_value", "gamma": md.gamma,
           "transitions": [[s, a, s2, c] for (s, a), row in md.transition_counts.items()
                           for s2, c in row.items()],
           "pair_counts": [[s, a, c] for (s, a), c in md.pair_counts.items()],
           "q": [[s, a, q] for (s, a), q in md.q_table.items()],
           "v": [[s, v] for s, v in md.v_table.items()],
           "local_maxima": sorted(ex.local_maxima), "local_minima": sorted(ex.local_minima),
           "absolute_maximum": ex.absolute_maximum, "absolute_minimum": ex.absolute_minimum}
    for rec in rep.planned_sequences:
        yield _seq(rec, "planned_sequence")
    for rec, rewards in zip(rep.exploit_sequences, rep.exploit_rewards):
        yield _seq(rec, "exploit_sequence", rewards=rewards)
    yield {"section": "train_rewards", "episodes": rep.train_rewards}
    row = rep.metric_row()
    yield {"section": "metrics", **{m: getattr(row, m) for m in dm.METRICS}}


def dumps_report(rep: AnalysisReport) -> str:
    return "".join(json.dumps(r, separators=(",", ":"), allow_nan=False) + "\n"
                   for r in report_records(rep))


def read_report(source: IO[str] | Iterable[str]) -> AnalysisReport:
    sections: dict[str, dict] = {}
    planned, exploit = [], []
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            name = rec["section"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ReportError(f"line {lineno}: not a report record") from None
        if name == "planned_sequence":
            planned.append(rec)
        elif name == "exploit_sequence":
            exploit.append(rec)
        else:
            sections[name] = rec
    need = {"header", "state_frequency", "state_action_frequency", "reward",
            "transition_value", "train_rewards"}
    if need - sections.keys():
        raise ReportError(f"report missing sections {sorted(need - sections.keys())}")
    try:
        h = sections["header"]
        if h["report_version"] != REPORT_VERSION:
            raise ReportError(f"unsupported report_version {h['report_version']}")
        sf, sa = sections["state_frequency"], sections["state_action_frequency"]
        rw, tv = sections["reward"], sections["transition_value"]
        trans: dict = {}
        for s, a, s2, c in tv["transitions"]:
            trans.setdefault((s, a), {})[s2] = c

        def seq(r):
            return it.SequenceRecord(r["run_name"], list(r["chain"]), r["reach_probability"],
                                     r["is_best"], r["reachable"])

        return AnalysisReport(
            algorithm=h["algorithm"],
            experiment=h["experiment"],
            settings=AnalysisSettings.from_dict(h["settings"]),
            valid_state_count=h["valid_state_count"],
            state_frequency=it.StateFrequency(
                {s: c for s, c in sf["counts"]}, sf["coverage"], sf["dispersion"],
                set(sf["frequent"]), set(sf["infrequent"])),
            state_action=it.StateActionFrequency(
                {(s, a): c for s, a, c in sa["pair_counts"]}, sa["pair_coverage"],
                {s: d for s, d in sa["dispersion"]}, sa["mean_dispersion"],
                set(sa["certain"]), set(sa["uncertain"])),
            reward=it.RewardAnalysis(
                {(s, a): m for s, a, m in rw["mean_reward"]},
                {tuple(p) for p in rw["high"]}, {tuple(p) for p in rw["low"]}),
            model=it.EmpiricalModel(
                trans, {(s, a): c for s, a, c in tv["pair_counts"]},
                {(s, a): q for s, a, q in tv["q"]}, {s: v for s, v in tv["v"]}, tv["gamma"]),
            extrema=it.ExtremaReport(set(tv["local_maxima"]), set(tv["local_minima"]),
                                     tv["absolute_maximum"], tv["absolute_minimum"]),
            planned_sequences=[seq(r) for r in planned],
            exploit_sequences=[seq(r) for r in exploit],
            train_rewards=sections["train_rewards"]["episodes"],
            exploit_rewards=[r["rewards"] for r in exploit],
            exploit_runs=[r["run_name"] for r in exploit],
        )
    except ReportError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ReportError(f"malformed report ({exc!r})") from None


def load_report(path) -> AnalysisReport:
    with open(path, encoding="utf-8") as fh:
        return read_report(fh)
