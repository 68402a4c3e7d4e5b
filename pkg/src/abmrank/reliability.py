"""Reliability metrics over training curves and their combination with domain ranks.

The training curve of an algorithm is its per-episode mean reward in
episode order.  Dispersion is the IQR of the detrended curve inside a few
windows, short-term risk is CVaR of the one-step differences and
long-term risk is CVaR of the (negated) drawdowns from the running peak.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import fmean
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .domain_metrics import dense_positions


class ReliabilityError(ValueError):
    pass


# metric -> higher is better
RELIABILITY_METRICS = {
    "iqr": False,
    "cvar_diff": True,
    "cvar_drawdown": True,
    "median_performance": True,
}
RELIABILITY_TITLES = {
    "iqr": "IQR",
    "cvar_diff": "LCVaRonDiff",
    "cvar_drawdown": "LCVaRonDrawDown",
    "median_performance": "Median Performance",
}


def detrend(series: Sequence[float]) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.size < 2:
        raise ReliabilityError("detrending needs at least two points")
    return np.diff(x)


def iqr_dispersion(series: Sequence[float], windows: int = 3) -> list[float]:
    """IQR of the detrended series in ``windows`` contiguous segments.

    Segments have equal length, the remainder goes to the last one.
    """
    if windows < 1:
        raise ReliabilityError("windows must be positive")
    if len(series) < 2 * windows:
        raise ReliabilityError(
            f"series of length {len(series)} too short for {windows} windows")
    d = detrend(series)
    size = d.size // windows
    out = []
    for w in range(windows):
        seg = d[w * size:] if w == windows - 1 else d[w * size:(w + 1) * size]
        q75, q25 = np.percentile(seg, [75, 25])
        out.append(float(q75 - q25))
    return out


def cvar(values: Sequence[float], alpha: float = 0.05) -> float:
    """Mean of the values at or below the ``alpha`` quantile (lower tail)."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ReliabilityError("cvar of empty input")
    if not 0.0 < alpha < 1.0:
        raise ReliabilityError(f"alpha must be in (0, 1), got {alpha}")
    var = np.quantile(x, alpha)
    tail = x[x <= var]
    if tail.size == 0:
        return float(x.min())
    return float(tail.mean())


def cvar_on_differences(series: Sequence[float], alpha: float = 0.05) -> float:
    return cvar(detrend(series), alpha)


def drawdowns(series: Sequence[float]) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    return np.maximum.accumulate(x) - x


def cvar_on_drawdown(series: Sequence[float], alpha: float = 0.05) -> float:
    if len(series) < 1:
        raise ReliabilityError("drawdown of empty series")
    return cvar(-drawdowns(series), alpha)


def median_performance(series: Sequence[float]) -> float:
    if len(series) == 0:
        raise ReliabilityError("median of empty series")
    return float(np.median(series))


@dataclass
class ReliabilityScores:
    iqr_scores: list[float]
    cvar_diff: float
    cvar_drawdown: float
    median_performance: float

    @property
    def iqr(self) -> float:
        return fmean(self.iqr_scores)

    def values(self) -> dict[str, float]:
        return {
            "iqr": self.iqr,
            "cvar_diff": self.cvar_diff,
            "cvar_drawdown": self.cvar_drawdown,
            "median_performance": self.median_performance,
        }


def reliability_scores(series: Sequence[float], alpha: float = 0.05, windows: int = 3) -> ReliabilityScores:
    return ReliabilityScores(
        iqr_scores=iqr_dispersion(series, windows),
        cvar_diff=cvar_on_differences(series, alpha),
        cvar_drawdown=cvar_on_drawdown(series, alpha),
        median_performance=median_performance(series),
    )


def average_ranks(values: Mapping[str, float], higher_is_better: bool) -> dict[str, float]:
    """Ordinal ranks with ties given the mean of the positions they span."""
    names = list(values)
    x = np.array([values[n] for n in names], dtype=float)
    r = rankdata(-x if higher_is_better else x, method="average")
    return {n: float(v) for n, v in zip(names, r)}


def reliability_ranks(scores: Mapping[str, ReliabilityScores]) -> dict[str, dict[str, float]]:
    """``{algorithm: {metric: rank}}`` over the four reliability metrics."""
    if len(scores) < 2:
        raise ReliabilityError("ranking needs at least two algorithms")
    per_metric = {
        m: average_ranks({a: s.values()[m] for a, s in scores.items()}, hib)
        for m, hib in RELIABILITY_METRICS.items()
    }
    return {a: {m: per_metric[m][a] for m in RELIABILITY_METRICS} for a in scores}


@dataclass
class CombinedRow:
    algorithm: str
    ranks: dict[str, float]
    reliability_rank_sum: float
    domain_rank: float
    overall_aggregate: float
    final_rank: float


def combine_rankings(
    reliability: Mapping[str, Mapping[str, float]],
    domain: Mapping[str, float],
) -> list[CombinedRow]:
    """Add the summed reliability ranks to the domain aggregate rank and rank the totals.

    ``domain`` maps algorithm to its domain aggregate rank.  Rows come back
    best first.
    """
    if set(reliability) != set(domain):
        diff = sorted(set(reliability) ^ set(domain))
        raise ReliabilityError(f"algorithm sets differ: {diff}")
    sums = {}
    for a, ranks in reliability.items():
        missing = set(RELIABILITY_METRICS) - set(ranks)
        if missing:
            raise ReliabilityError(f"{a}: missing reliability ranks {sorted(missing)}")
        sums[a] = float(sum(ranks[m] for m in RELIABILITY_METRICS))
    overall = {a: sums[a] + float(domain[a]) for a in reliability}
    final = dense_positions(overall)
    rows = [CombinedRow(a, {m: float(reliability[a][m]) for m in RELIABILITY_METRICS},
                        sums[a], float(domain[a]), overall[a], final[a])
            for a in reliability]
    return sorted(rows, key=lambda r: (r.final_rank, r.algorithm))
