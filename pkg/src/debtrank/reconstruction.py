"""Reconstruct plausible exposure matrices from interbank totals.

The topology comes from a directed fitness model whose single parameter ``z``
is set so that the expected density hits a target.  Weights are then fitted
to the row (interbank assets) and column (interbank liabilities) totals with
RAS, starting from unit weight on every sampled link.
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ExhaustedRedraws,
    NegativeZ,
    RASNotConverged,
    Unachievable,
    UnsupportedMargin,
    ValidationError,
    ZeroTotal,
)
from .model import BankingSystem, BankRecord, ExposureMatrix, build_system

MAX_REDRAWS = 100
_EPS = 1e-30
_LOG_MAX = 700.0  # keeps math.exp finite while widening the z bracket


@dataclass(frozen=True)
class ReconstructionConfig:
    target_density: float = 0.05
    ensemble_size: int = 100
    ras_tol: float = 1e-8
    ras_max_iter: int = 10_000
    seed: int = 0
    z_bracket: tuple[float, float] = (1e-6, 1e6)

    def __post_init__(self):
        if not 0 < self.target_density <= 1:
            raise ValidationError("target_density must be in (0, 1]")
        if self.ensemble_size < 1:
            raise ValidationError("ensemble_size must be >= 1")
        if not self.ras_tol > 0 or self.ras_max_iter < 1:
            raise ValidationError("ras_tol must be > 0 and ras_max_iter >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")
        lo, hi = self.z_bracket
        if not 0 < lo < hi:
            raise ValidationError("z_bracket must satisfy 0 < lo < hi")
        object.__setattr__(self, "z_bracket", (float(lo), float(hi)))


@dataclass(frozen=True)
class FitnessVectors:
    x_out: np.ndarray
    x_in: np.ndarray

    @classmethod
    def from_totals(cls, assets, liabilities) -> "FitnessVectors":
        a = np.asarray(assets, dtype=float)
        l = np.asarray(liabilities, dtype=float)
        if a.sum() <= 0 or l.sum() <= 0:
            raise ZeroTotal("interbank totals must have a positive sum")
        return cls(x_out=a / a.sum(), x_in=l / l.sum())

    @classmethod
    def from_records(cls, records: Sequence[BankRecord]) -> "FitnessVectors":
        return cls.from_totals(
            [r.interbank_assets_total for r in records],
            [r.interbank_liabilities_total for r in records],
        )


def rescale_liabilities(records: Sequence[BankRecord]) -> list[BankRecord]:
    """Scale interbank liabilities so that they sum to the interbank assets."""
    ta = math.fsum(r.interbank_assets_total for r in records)
    tl = math.fsum(r.interbank_liabilities_total for r in records)
    if ta <= 0 or tl <= 0:
        raise ZeroTotal(f"interbank totals must be positive (assets {ta!r}, liabilities {tl!r})")
    if ta == tl:
        return list(records)
    ratio = ta / tl
    return [
        dataclasses.replace(r, interbank_liabilities_total=r.interbank_liabilities_total * ratio)
        for r in records
    ]


def link_probabilities(f: FitnessVectors, z: float) -> np.ndarray:
    """``p_ij = z x_i^out x_j^in / (1 + z x_i^out x_j^in)``, zero on the diagonal."""
    if not z >= 0:
        raise NegativeZ(f"z must be >= 0, got {z!r}")
    prod = np.outer(f.x_out, f.x_in)
    if math.isinf(z):
        p = (prod > 0).astype(float)
    else:
        zp = z * prod
        p = zp / (1.0 + zp)
    np.fill_diagonal(p, 0.0)
    return p


def _expected_links(prod: np.ndarray, z: float) -> float:
    zp = z * prod
    return float(np.sum(zp / (1.0 + zp)))


def calibrate_z(f: FitnessVectors, target_density: float, bracket=(1e-6, 1e6), rtol: float = 1e-10) -> float:
    """Find ``z`` so the expected number of links equals ``target_density * N(N-1)``.

    Bisection in ``log z`` (the expected link count is increasing in
    ``z``); the bracket is widened until it straddles the root.
    Returns ``inf`` when the target equals the number of pairs with positive
    fitness product (only reachable in the limit).
    """
    if not 0 < target_density <= 1:
        raise ValidationError("target_density must be in (0, 1]")
    n = len(f.x_out)
    prod = np.outer(f.x_out, f.x_in)
    np.fill_diagonal(prod, 0.0)
    target = target_density * n * (n - 1)
    support = int(np.count_nonzero(prod))
    if support < target * (1 - rtol):
        raise Unachievable(
            f"only {support} pairs have positive fitness product, {target:.1f} links requested"
        )
    if support <= target * (1 + rtol):
        return math.inf

    lo, hi = (math.log(b) for b in bracket)
    for _ in range(2000):
        if _expected_links(prod, math.exp(lo)) <= target:
            break
        lo = max(lo - 2 * (hi - lo) - 1, -_LOG_MAX)
    for _ in range(2000):
        if _expected_links(prod, math.exp(hi)) >= target:
            break
        hi = min(hi + 2 * (hi - lo) + 1, _LOG_MAX)

    # bisect to full precision; the density tolerance is checked afterwards
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _expected_links(prod, math.exp(mid)) < target:
            lo = mid
        else:
            hi = mid
    candidates = [math.exp(lo), math.exp(hi)]
    z = min(candidates, key=lambda c: abs(_expected_links(prod, c) - target))
    if abs(_expected_links(prod, z) - target) > rtol * target:
        raise Unachievable(f"could not match density {target_density} within rtol {rtol}")
    return z


def sample_topology(p, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draw of every off-diagonal link."""
    p = np.asarray(p, dtype=float)
    adj = (rng.random(p.shape) < p).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return adj


def ras_balance(adjacency, row_margins, col_margins, tol: float = 1e-8, max_iter: int = 10_000) -> ExposureMatrix:
    """Fit weights on a fixed topology to prescribed row and column sums.

    Alternates row and column scaling from unit weights until both sets of
    relative margin residuals are within ``tol``.
    """
    support = np.asarray(adjacency) != 0
    u = np.asarray(row_margins, dtype=float)
    v = np.asarray(col_margins, dtype=float)
    n_rows, n_cols = support.shape
    if u.shape != (n_rows,) or v.shape != (n_cols,):
        raise ValidationError("margin lengths do not match the adjacency matrix")
    if np.any(u < 0) or np.any(v < 0):
        raise ValidationError("margins must be nonnegative")
    for i in np.flatnonzero((u > 0) & ~support.any(axis=1)):
        raise UnsupportedMargin(int(i), "out")
    for j in np.flatnonzero((v > 0) & ~support.any(axis=0)):
        raise UnsupportedMargin(int(j), "in")

    a = support.astype(float)
    u_den = np.maximum(u, _EPS)
    v_den = np.maximum(v, _EPS)
    residual = np.inf
    for _ in range(max_iter):
        rs = a.sum(axis=1)
        a *= np.divide(u, rs, out=np.zeros_like(u), where=rs > 0)[:, None]
        cs = a.sum(axis=0)
        a *= np.divide(v, cs, out=np.zeros_like(v), where=cs > 0)[None, :]
        residual = max(
            float(np.max(np.abs(a.sum(axis=1) - u) / u_den, initial=0.0)),
            float(np.max(np.abs(a.sum(axis=0) - v) / v_den, initial=0.0)),
        )
        if residual <= tol:
            return ExposureMatrix(a)
    raise RASNotConverged(residual, max_iter)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent random stream for ensemble slot ``index``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def density(adjacency) -> float:
    adj = np.asarray(adjacency)
    n = adj.shape[0]
    return float(np.count_nonzero(adj) / (n * (n - 1))) if n > 1 else 0.0


def _draw_sample(index, p, records, config):
    rng = sample_rng(config.seed, index)
    u = np.array([r.interbank_assets_total for r in records])
    v = np.array([r.interbank_liabilities_total for r in records])
    last = None
    for _ in range(MAX_REDRAWS):
        adj = sample_topology(p, rng)
        try:
            exposures = ras_balance(adj, u, v, tol=config.ras_tol, max_iter=config.ras_max_iter)
        except (UnsupportedMargin, RASNotConverged) as exc:
            last = exc
            continue
        return build_system(records, exposures)
    raise ExhaustedRedraws(index, MAX_REDRAWS, last)


def prepare(records: Sequence[BankRecord], config: ReconstructionConfig):
    """Rescaled records, calibrated ``z`` and the link probability matrix."""
    records = rescale_liabilities(records)
    f = FitnessVectors.from_records(records)
    z = calibrate_z(f, config.target_density, config.z_bracket)
    return records, z, link_probabilities(f, z)


def reconstruct_ensemble(records: Sequence[BankRecord], config: ReconstructionConfig | None = None,
                         threads: int = 1) -> list[BankingSystem]:
    """Sample ``config.ensemble_size`` exposure matrices consistent with the records.

    Output does not depend on ``threads``: every slot draws from its own
    stream seeded by ``(seed, index)``.
    """
    config = config or ReconstructionConfig()
    records, _, p = prepare(records, config)
    idx = range(config.ensemble_size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda k: _draw_sample(k, p, records, config), idx))
    return [_draw_sample(k, p, records, config) for k in idx]
