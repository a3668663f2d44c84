"""Contagion dynamics on a banking system.

Three simulators share the same timing convention: ``h(0) = 0``, the shock
sets ``h(1)``, and interbank assets first react at ``t = 2``.

* :func:`run_contagion` iterates the generalized DebtRank map on relative
  equity losses ``h``; banks keep passing on new distress until they default.
* :func:`run_original_debtrank` is the classic variant where a bank passes
  on its distress exactly once, right after first being hit.
* :func:`simulate_equity` iterates the same generalized dynamics in equity
  space.  It never touches ``h`` and is kept as an independent check.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NegativeAlpha, ValidationError
from .model import DEFAULT_TOL, BankingSystem, active_mask, reduce_leverage


class Mode(str, enum.Enum):
    GENERALIZED = "generalized"
    ORIGINAL_DEBTRANK = "debtrank"


@dataclass(frozen=True)
class RunConfig:
    tol: float = 1e-10
    max_steps: int | None = None  # None -> 10 * N + 1000
    mode: Mode = Mode.GENERALIZED

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError("tol must be > 0")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValidationError("max_steps must be >= 1")
        object.__setattr__(self, "mode", Mode(self.mode))

    def steps_for(self, n: int) -> int:
        return self.max_steps if self.max_steps is not None else 10 * n + 1000


@dataclass(frozen=True)
class ContagionState:
    t: int
    h: np.ndarray
    h_prev: np.ndarray

    @property
    def active_prev(self) -> set[int]:
        return {int(k) for k in np.flatnonzero(active_mask(self.h_prev))}

    @classmethod
    def initial(cls, h1) -> "ContagionState":
        h1 = _clip_losses(h1)
        return cls(t=1, h=h1, h_prev=np.zeros_like(h1))


@dataclass
class StressResult:
    h_final: np.ndarray
    trajectory: np.ndarray  # row k holds h(k + 1)
    defaults: list[tuple[int, int]]
    steps_to_convergence: int
    converged: bool
    aggregate_series: np.ndarray  # H(t) for t = 1..steps
    mode: Mode = Mode.GENERALIZED

    @property
    def direct_loss(self) -> float:
        return float(self.aggregate_series[0])

    @property
    def final_loss(self) -> float:
        return float(self.aggregate_series[-1])

    def to_dict(self, ids=None, trace: bool = False) -> dict:
        ids = ids if ids is not None else list(range(len(self.h_final)))
        d = {
            "h_final": [float(x) for x in self.h_final],
            "defaults": [{"bank_id": ids[i], "step": s} for i, s in self.defaults],
            "steps": self.steps_to_convergence,
            "converged": self.converged,
            "H_series": [float(x) for x in self.aggregate_series],
        }
        if trace:
            d["trajectory"] = [[float(x) for x in row] for row in self.trajectory]
        return d


def _clip_losses(h) -> np.ndarray:
    h = np.clip(np.array(h, dtype=float), 0.0, 1.0)
    h[h >= 1.0 - DEFAULT_TOL] = 1.0
    return h


def _check_shock(system: BankingSystem, h1) -> np.ndarray:
    h1 = np.asarray(h1, dtype=float)
    if h1.shape != (system.n,):
        raise DimensionMismatch(f"shock has shape {h1.shape}, expected ({system.n},)")
    if not np.all(np.isfinite(h1)) or h1.min(initial=0.0) < 0 or h1.max(initial=0.0) > 1:
        raise ValidationError("shock entries must lie in [0, 1]")
    return _clip_losses(h1)


def _generalized_update(lam, h, h_prev):
    active = active_mask(h_prev)
    dh = np.where(active, h - h_prev, 0.0)
    inc = lam @ dh
    inc[~active] = 0.0
    h_new = np.minimum(1.0, h + inc)
    h_new[h_new >= 1.0 - DEFAULT_TOL] = 1.0
    return h_new


def step_generalized(state: ContagionState, system: BankingSystem) -> ContagionState:
    """Advance one step of the generalized dynamics.

    ``h(t+1) = min(1, h(t) + Lambda(t) [h(t) - h(t-1)])`` with ``Lambda(t)``
    reduced to the banks still active at ``t - 1``.
    """
    lam_t = reduce_leverage(system.leverage, active_mask(state.h_prev))
    h_new = _generalized_update(lam_t, state.h, state.h_prev)
    return ContagionState(t=state.t + 1, h=h_new, h_prev=state.h)


def _finish(traj, system, converged, mode) -> StressResult:
    traj = np.array(traj)
    h_final = traj[-1]
    defaults = []
    for i in np.flatnonzero(h_final >= 1.0):
        first = int(np.argmax(traj[:, i] >= 1.0))
        defaults.append((int(i), first + 1))
    defaults.sort(key=lambda d: (d[1], d[0]))
    weights = system.equity0 / system.equity0.sum()
    return StressResult(
        h_final=h_final,
        trajectory=traj,
        defaults=defaults,
        steps_to_convergence=len(traj),
        converged=converged,
        aggregate_series=traj @ weights,
        mode=mode,
    )


def run_contagion(system: BankingSystem, h1, config: RunConfig | None = None) -> StressResult:
    """Iterate the generalized dynamics until ``max |dh| < tol``."""
    config = config or RunConfig()
    max_steps = config.steps_for(system.n)
    lam = system.leverage.lam
    h = _check_shock(system, h1)
    h_prev = np.zeros_like(h)
    traj = [h]
    converged = np.max(h, initial=0.0) < config.tol
    while not converged and len(traj) < max_steps:
        h_new = _generalized_update(lam, h, h_prev)
        converged = np.max(h_new - h, initial=0.0) < config.tol
        h_prev, h = h, h_new
        traj.append(h)
    return _finish(traj, system, bool(converged), Mode.GENERALIZED)


def run_original_debtrank(system: BankingSystem, h1, config: RunConfig | None = None) -> StressResult:
    """Classic DebtRank: each bank propagates only once, right after first being hit.

    Weights are ``min(1, Lambda_ij)``.  Stops when no bank is newly distressed.
    """
    config = config or RunConfig()
    max_steps = config.steps_for(system.n)
    w = np.minimum(1.0, system.leverage.lam)
    h = _check_shock(system, h1)
    h_prev = np.zeros_like(h)
    traj = [h]
    converged = False
    while True:
        fresh = (h > 0) & (h_prev == 0)
        if not fresh.any():
            converged = True
            break
        if len(traj) >= max_steps:
            break
        h_new = np.minimum(1.0, h + w[:, fresh] @ h[fresh])
        h_new[h_new >= 1.0 - DEFAULT_TOL] = 1.0
        h_prev, h = h, h_new
        traj.append(h)
    return _finish(traj, system, converged, Mode.ORIGINAL_DEBTRANK)


def run(system: BankingSystem, h1, config: RunConfig | None = None) -> StressResult:
    """Dispatch on ``config.mode``."""
    config = config or RunConfig()
    if config.mode is Mode.ORIGINAL_DEBTRANK:
        return run_original_debtrank(system, h1, config)
    return run_contagion(system, h1, config)


def simulate_equity(system: BankingSystem, h1, config: RunConfig | None = None) -> np.ndarray:
    """Equity-space version of the generalized dynamics.

    Returns an array whose row ``t`` is ``E(t)``, starting at ``E(0)``.  The
    stopping rule mirrors :func:`run_contagion` (largest relative equity
    change below ``tol``).
    """
    config = config or RunConfig()
    max_steps = config.steps_for(system.n)
    e0 = np.array(system.equity0)
    lam_tilde = system.leverage.lam_tilde
    h1 = _check_shock(system, h1)
    floor = DEFAULT_TOL * e0

    e_prev = e0.copy()
    e = e0 * (1.0 - h1)
    e[e <= floor] = 0.0
    rows = [e_prev, e]
    done = np.max((e_prev - e) / e0, initial=0.0) < config.tol
    while not done and len(rows) - 1 < max_steps:
        active = e_prev > 0
        de = np.where(active, e - e_prev, 0.0)
        inc = lam_tilde @ de
        inc[~active] = 0.0
        e_new = np.maximum(0.0, e + inc)
        e_new[e_new <= floor] = 0.0
        done = np.max((e - e_new) / e0, initial=0.0) < config.tol
        e_prev, e = e, e_new
        rows.append(e)
    return np.array(rows)


# -- shocks -----------------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    """Every bank's external assets lose a fraction ``alpha``."""

    alpha: float


@dataclass(frozen=True)
class Single:
    """Only ``bank`` (id or index) loses a fraction ``alpha`` of its external assets."""

    bank: object
    alpha: float


@dataclass(frozen=True)
class Custom:
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))


ShockSpec = Uniform | Single | Custom


def build_shock(spec: ShockSpec, system: BankingSystem) -> np.ndarray:
    """Initial relative equity losses ``h(1)`` for a shock specification."""
    if isinstance(spec, Custom):
        v = np.asarray(spec.values, dtype=float)
        if v.shape != (system.n,):
            raise DimensionMismatch(f"custom shock has shape {v.shape}, expected ({system.n},)")
        return _clip_losses(v)
    if not spec.alpha >= 0:
        raise NegativeAlpha(f"alpha must be >= 0, got {spec.alpha!r}")
    direct = np.minimum(1.0, spec.alpha * system.external_assets / system.equity0)
    if isinstance(spec, Uniform):
        return _clip_losses(direct)
    if isinstance(spec, Single):
        k = system.index_of(spec.bank)
        h1 = np.zeros(system.n)
        h1[k] = direct[k]
        return _clip_losses(h1)
    raise TypeError(f"unsupported shock spec {spec!r}")
