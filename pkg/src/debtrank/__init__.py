"""Generalized DebtRank stress testing for interbank networks."""

__version__ = "0.1.0"

from .contagion import (  # noqa: E402
    ContagionState,
    Custom,
    Mode,
    RunConfig,
    Single,
    StressResult,
    Uniform,
    build_shock,
    run,
    run_contagion,
    run_original_debtrank,
    simulate_equity,
    step_generalized,
)
from .model import (  # noqa: E402
    BankingSystem,
    BankRecord,
    ExposureMatrix,
    LeverageMatrices,
    active_set,
    build_system,
    reduce_leverage,
)
from .spectral import StabilityReport, linear_fixed_point, spectral_radius, stability_after_defaults  # noqa: E402
