"""Stress scenarios over ensembles of (reconstructed) banking systems.

Two experiments are supported: a uniform devaluation ``alpha`` of every
bank's external assets, and one-bank-at-a-time shocks that yield impact and
vulnerability scores.  Results from different networks are gathered in input
order so aggregates do not depend on how work was scheduled.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .contagion import RunConfig, Single, StressResult, Uniform, build_shock, run
from .errors import NegativeAlpha, ValidationError
from .model import BankingSystem


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


@dataclass(frozen=True)
class SystemLossSeries:
    H: np.ndarray  # H(t) for t = 1..steps

    @property
    def direct_loss(self) -> float:
        return float(self.H[0])

    @property
    def final_loss(self) -> float:
        return float(self.H[-1])

    @property
    def amplification(self) -> float:
        """Final over direct loss; NaN when there is no direct loss."""
        d = self.direct_loss
        return self.final_loss / d if d > 0 else math.nan

    @classmethod
    def from_result(cls, result: StressResult) -> "SystemLossSeries":
        return cls(H=np.asarray(result.aggregate_series))

    def to_dict(self) -> dict:
        return {
            "H_series": [float(x) for x in self.H],
            "direct_loss": self.direct_loss,
            "final_loss": self.final_loss,
            "amplification": _json_float(self.amplification),
        }


def _json_float(x: float):
    return None if math.isnan(x) else float(x)


def _stats(values) -> dict:
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return {"mean": math.nan, "min": math.nan, "max": math.nan}
    return {"mean": float(v.mean()), "min": float(v.min()), "max": float(v.max())}


@dataclass
class UniformScenario:
    alpha: float
    results: list[StressResult]
    series: list[SystemLossSeries]

    def stats(self) -> dict:
        return {
            "direct_loss": _stats([s.direct_loss for s in self.series]),
            "final_loss": _stats([s.final_loss for s in self.series]),
            "amplification": _stats([s.amplification for s in self.series]),
        }

    def to_dict(self, ids=None, trace: bool = False) -> dict:
        stats = {k: {s: _json_float(x) for s, x in v.items()} for k, v in self.stats().items()}
        return {
            "alpha": self.alpha,
            "ensemble": stats,
            "systems": [
                {**r.to_dict(ids, trace=trace), **s.to_dict()} for r, s in zip(self.results, self.series)
            ],
        }


def _check_alpha(alpha):
    if not alpha >= 0:
        raise NegativeAlpha(f"alpha must be >= 0, got {alpha!r}")


def run_uniform_scenario(systems: Sequence[BankingSystem], alpha: float, config: RunConfig | None = None,
                         threads: int = 1) -> UniformScenario:
    """Shock every bank in every system by ``alpha`` and run the contagion."""
    _check_alpha(alpha)
    config = config or RunConfig()

    def one(system):
        return run(system, build_shock(Uniform(alpha), system), config)

    results = parallel_map(one, systems, threads)
    return UniformScenario(alpha, results, [SystemLossSeries.from_result(r) for r in results])


def alpha_sweep(systems: Sequence[BankingSystem], alphas: Sequence[float], config: RunConfig | None = None,
                threads: int = 1) -> list[dict]:
    """One row of ensemble statistics per ``alpha``."""
    alphas = list(alphas)
    if not alphas:
        raise ValidationError("alphas must be nonempty")
    for a in alphas:
        _check_alpha(a)
    rows = []
    for a in alphas:
        st = run_uniform_scenario(systems, a, config, threads).stats()
        row = {"alpha": float(a)}
        for key, s in st.items():
            for name, value in s.items():
                row[f"{key}_{name}"] = value
        rows.append(row)
    return rows


def reverse_ranks(values, ids) -> np.ndarray:
    """Rank ``n`` for the largest value down to 1 for the smallest.

    Ties are ordered by bank id ascending, so the lower id gets the higher rank.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    order = sorted(range(n), key=lambda k: (-values[k], ids[k]))
    ranks = np.empty(n, dtype=int)
    for pos, k in enumerate(order):
        ranks[k] = n - pos
    return ranks


@dataclass
class ImpactVulnerability:
    ids: list[str]
    names: list[str]
    total_assets: np.ndarray
    impact: np.ndarray
    vulnerability: np.ndarray
    impact_rank: np.ndarray
    vulnerability_rank: np.ndarray

    def rows(self) -> list[dict]:
        return [
            {
                "bank_id": self.ids[k],
                "name": self.names[k],
                "total_assets": float(self.total_assets[k]),
                "impact": float(self.impact[k]),
                "vulnerability": float(self.vulnerability[k]),
                "impact_rank": int(self.impact_rank[k]),
                "vulnerability_rank": int(self.vulnerability_rank[k]),
            }
            for k in range(len(self.ids))
        ]

    def scatter(self) -> dict:
        return {
            "x": "vulnerability_rank",
            "y": "impact_rank",
            "size": "total_assets",
            "points": [
                {
                    "bank_id": self.ids[k],
                    "x": int(self.vulnerability_rank[k]),
                    "y": int(self.impact_rank[k]),
                    "size": float(self.total_assets[k]),
                }
                for k in range(len(self.ids))
            ],
        }


def single_bank_experiments(system: BankingSystem, alpha: float, config: RunConfig | None = None):
    """Impact of each bank and the matrix of final losses.

    Row ``b`` of the returned matrix holds ``h_final`` when only bank ``b``
    was shocked.
    """
    config = config or RunConfig()
    impact = np.empty(system.n)
    losses = np.empty((system.n, system.n))
    for b in range(system.n):
        res = run(system, build_shock(Single(b, alpha), system), config)
        impact[b] = res.final_loss
        losses[b] = res.h_final
    return impact, losses


def run_impact_vulnerability(systems: Sequence[BankingSystem], alpha: float, config: RunConfig | None = None,
                             threads: int = 1) -> ImpactVulnerability:
    """Average impact and vulnerability over the ensemble, then rank."""
    _check_alpha(alpha)
    if not systems:
        raise ValidationError("at least one system is required")
    first = systems[0]
    if first.n < 2:
        raise ValidationError("impact/vulnerability needs at least two banks")
    if any(s.ids != first.ids for s in systems):
        raise ValidationError("all systems in an ensemble must list the same banks in the same order")

    per_system = parallel_map(lambda s: single_bank_experiments(s, alpha, config), systems, threads)
    impact = np.mean([imp for imp, _ in per_system], axis=0)
    vulnerability = np.mean([losses.mean(axis=0) for _, losses in per_system], axis=0)
    ids = first.ids
    return ImpactVulnerability(
        ids=ids,
        names=[r.name for r in first.records],
        total_assets=first.total_assets,
        impact=impact,
        vulnerability=vulnerability,
        impact_rank=reverse_ranks(impact, ids),
        vulnerability_rank=reverse_ranks(vulnerability, ids),
    )
