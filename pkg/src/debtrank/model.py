"""Balance sheets, the interbank exposure matrix and the leverage matrices.

Exposures follow the lender -> borrower convention: ``a[i, j]`` is the
amount bank ``i`` has lent to bank ``j``.  The leverage matrix divides each
row by the lender's equity, the "tilde" variant divides each column by the
borrower's equity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeExposure,
    NonPositiveEquity,
    SelfLoop,
    UnknownBank,
    ValidationError,
)

# h_i >= 1 - DEFAULT_TOL counts as a default (rounding at the clip boundary)
DEFAULT_TOL = 1e-12
TOTAL_ASSETS_RTOL = 1e-6


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BankRecord:
    id: str
    name: str
    equity0: float
    external_assets: float
    external_liabilities: float
    interbank_assets_total: float
    interbank_liabilities_total: float
    total_assets: float | None = None

    def __post_init__(self):
        for fname in (
            "external_assets",
            "external_liabilities",
            "interbank_assets_total",
            "interbank_liabilities_total",
        ):
            v = getattr(self, fname)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"bank {self.id!r}: {fname} must be finite and >= 0, got {v!r}")
        if not np.isfinite(self.equity0):
            raise ValidationError(f"bank {self.id!r}: equity must be finite")
        derived = self.external_assets + self.interbank_assets_total
        if self.total_assets is None:
            object.__setattr__(self, "total_assets", derived)
        else:
            ta = self.total_assets
            if not np.isfinite(ta) or ta < 0:
                raise ValidationError(f"bank {self.id!r}: total_assets must be finite and >= 0")
            if abs(ta - derived) > TOTAL_ASSETS_RTOL * max(abs(ta), abs(derived)):
                raise ValidationError(
                    f"bank {self.id!r}: total_assets {ta!r} != external + interbank assets {derived!r}"
                )


@dataclass(frozen=True)
class ExposureMatrix:
    """Dense N x N matrix of interbank loans, ``a[i, j]`` lent by ``i`` to ``j``."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"exposure matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("exposure matrix contains non-finite values")
        neg = np.argwhere(a < 0)
        if len(neg):
            i, j = (int(k) for k in neg[0])
            raise NegativeExposure(i, j, float(a[i, j]))
        diag = np.flatnonzero(np.diag(a))
        if len(diag):
            raise SelfLoop(int(diag[0]))
        object.__setattr__(self, "a", _frozen(a))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @classmethod
    def zeros(cls, n: int) -> "ExposureMatrix":
        return cls(np.zeros((n, n)))


@dataclass(frozen=True)
class LeverageMatrices:
    lam: np.ndarray
    lam_tilde: np.ndarray

    @classmethod
    def from_exposures(cls, exposures: ExposureMatrix, equity0) -> "LeverageMatrices":
        e = np.asarray(equity0, dtype=float)
        a = exposures.a
        return cls(lam=_frozen(a / e[:, None]), lam_tilde=_frozen(a / e[None, :]))


@dataclass(frozen=True)
class BankingSystem:
    records: tuple[BankRecord, ...]
    exposures: ExposureMatrix
    leverage: LeverageMatrices
    equity0: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    @property
    def external_assets(self) -> np.ndarray:
        return np.array([r.external_assets for r in self.records])

    @property
    def total_assets(self) -> np.ndarray:
        return np.array([r.total_assets for r in self.records])

    def index_of(self, bank) -> int:
        """Resolve a bank id (or a plain integer index) to its position."""
        for k, r in enumerate(self.records):
            if r.id == bank:
                return k
        if isinstance(bank, (int, np.integer)) and not isinstance(bank, bool) and 0 <= bank < self.n:
            return int(bank)
        raise UnknownBank(bank)


def build_system(records: Sequence[BankRecord], exposures: ExposureMatrix) -> BankingSystem:
    records = tuple(records)
    if not records:
        raise ValidationError("at least one bank is required")
    if len(records) != exposures.n:
        raise DimensionMismatch(f"{len(records)} records but exposure matrix is {exposures.n}x{exposures.n}")
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate bank ids")
    for r in records:
        if not r.equity0 > 0:
            raise NonPositiveEquity(r.id, r.equity0)
    equity0 = _frozen([r.equity0 for r in records])
    lev = LeverageMatrices.from_exposures(exposures, equity0)
    return BankingSystem(records=records, exposures=exposures, leverage=lev, equity0=equity0)


def active_mask(h) -> np.ndarray:
    return np.asarray(h, dtype=float) < 1.0 - DEFAULT_TOL


def active_set(h) -> set[int]:
    """Indices of banks that have not defaulted, i.e. ``h_j < 1``."""
    return {int(k) for k in np.flatnonzero(active_mask(h))}


def _as_mask(active: Iterable[int] | np.ndarray, n: int) -> np.ndarray:
    if isinstance(active, np.ndarray) and active.dtype == bool:
        if active.shape != (n,):
            raise DimensionMismatch(f"active mask has shape {active.shape}, expected ({n},)")
        return active
    mask = np.zeros(n, dtype=bool)
    idx = list(active)
    if idx:
        idx = np.asarray(idx, dtype=int)
        if idx.min() < 0 or idx.max() >= n:
            raise ValidationError(f"active set has indices outside 0..{n - 1}")
        mask[idx] = True
    return mask


def reduce_leverage(leverage: LeverageMatrices | np.ndarray, active) -> np.ndarray:
    """Zero rows and columns of the leverage matrix for banks not in ``active``."""
    lam = leverage.lam if isinstance(leverage, LeverageMatrices) else np.asarray(leverage, dtype=float)
    m = _as_mask(active, lam.shape[0])
    return lam * m[:, None] * m[None, :]
