"""Stability of the contagion dynamics via the spectral radius of the leverage matrix."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SingularSystem, ValidationError
from .model import BankingSystem, reduce_leverage

CRITICAL_BAND = 1e-9
STALL_WINDOW = 50


class Stability(str, enum.Enum):
    STABLE = "STABLE"
    UNSTABLE = "UNSTABLE"
    CRITICAL = "CRITICAL"


def classify(rho: float, band: float = CRITICAL_BAND) -> Stability:
    if abs(rho - 1.0) <= band:
        return Stability.CRITICAL
    return Stability.STABLE if rho < 1.0 else Stability.UNSTABLE


@dataclass(frozen=True)
class StabilityReport:
    spectral_radius: float
    classification: Stability
    iterations: int
    residual: float
    method: str = "power"  # "power" or "dense"
    max_iter_exceeded: bool = False

    def to_dict(self) -> dict:
        return {
            "spectral_radius": self.spectral_radius,
            "classification": self.classification.value,
            "iterations": self.iterations,
            "residual": self.residual,
            "method": self.method,
            "max_iter_exceeded": self.max_iter_exceeded,
        }


def _dense_radius(m: np.ndarray) -> tuple[float, float]:
    """Spectral radius from the full spectrum, with the residual of its eigenpair."""
    w, v = np.linalg.eig(m)
    k = int(np.argmax(np.abs(w)))
    vec = v[:, k] / np.max(np.abs(v[:, k]))
    residual = float(np.max(np.abs(m @ vec - w[k] * vec)))
    return float(abs(w[k])), residual


def spectral_radius(m, tol: float = 1e-12, max_iter: int = 10_000) -> StabilityReport:
    """Spectral radius of a nonnegative square matrix.

    Power iteration runs on ``m + I``: for a nonnegative matrix the Perron
    root shifts by exactly one, and the positive diagonal removes the
    periodicity that makes plain power iteration oscillate on bipartite
    networks.  If the residual fails to halve over ``STALL_WINDOW``
    iterations (nilpotent or badly reducible matrices), the radius is taken
    from the full dense spectrum instead.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got shape {m.shape}")
    if not tol > 0:
        raise ValidationError("tol must be > 0")
    if np.any(m < 0):
        raise ValidationError("matrix must be nonnegative")
    n = m.shape[0]
    if n == 0 or not m.any():
        return StabilityReport(0.0, Stability.STABLE, 0, 0.0)

    x = np.ones(n)
    rho = 0.0
    residual = np.inf
    history = []
    k = 0
    while k < max_iter:
        k += 1
        y = m @ x + x
        scale = np.max(y)
        x = y / scale
        mx = m @ x
        rho = max(scale - 1.0, 0.0)
        residual = float(np.max(np.abs(mx - rho * x)))
        if residual <= tol * max(1.0, rho):
            return StabilityReport(float(rho), classify(rho), k, residual)
        history.append(residual)
        if len(history) > STALL_WINDOW and residual > 0.5 * history[-STALL_WINDOW - 1]:
            dense, res = _dense_radius(m)
            return StabilityReport(dense, classify(dense), k, res, method="dense")
    return StabilityReport(float(rho), classify(rho), k, residual, max_iter_exceeded=True)


def linear_fixed_point(lam, h1, cond_limit: float = 1e12) -> np.ndarray:
    """Asymptotic losses ``(I - lam)^-1 h1`` of the unclipped, default-free dynamics."""
    lam = np.asarray(lam, dtype=float)
    h1 = np.asarray(h1, dtype=float)
    n = lam.shape[0]
    if lam.shape != (n, n) or h1.shape != (n,):
        raise DimensionMismatch(f"incompatible shapes {lam.shape} and {h1.shape}")
    a = np.eye(n) - lam
    if n and np.linalg.cond(a) > cond_limit:
        raise SingularSystem("I - Lambda is numerically singular")
    try:
        return np.linalg.solve(a, h1)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc


def stability_after_defaults(system: BankingSystem, active, **kwargs) -> StabilityReport:
    return spectral_radius(reduce_leverage(system.leverage, active), **kwargs)
