"""Quantum-style market games: strategies, clearing, phase-space analysis."""

__version__ = "0.1.0"

from .errors import BracketError, NumericalError, QMGError, TruncationError, ValidationError
from .numerics import DEFAULT_GRID, DEFAULT_H_E, Grid1D, fourier_pair, inverse_fourier_pair
from .strategy import (
    PriceEigenstate,
    PureStrategy,
    RiskParams,
    TraderDeclaration,
    buy_cdf,
    collapse_demand,
    make_coherent_correlated,
    make_gaussian,
    make_oscillator_eigenstate,
    make_uniform,
    make_uniform_supply,
    risk_expectation,
    sell_cdf,
)
from .clearing import Division, best_division, clear_price, rescale, settle, uniform_price_check
from .wigner import (
    GibbsSpec,
    WignerField,
    demand_curve,
    is_giffen,
    supply_curve,
    thermal_closed_form,
    thermal_series,
    wigner_of_pure,
)
from .profit import IntensitySpec, fixed_point, profit_intensity
from .scenario import load_scenario, report, run

__all__ = [
    "__version__",
    "PriceEigenstate",
    "PureStrategy",
    "RiskParams",
    "TraderDeclaration",
    "buy_cdf",
    "collapse_demand",
    "make_coherent_correlated",
    "make_gaussian",
    "make_oscillator_eigenstate",
    "make_uniform",
    "make_uniform_supply",
    "risk_expectation",
    "sell_cdf",
    "GibbsSpec",
    "WignerField",
    "demand_curve",
    "is_giffen",
    "supply_curve",
    "thermal_closed_form",
    "thermal_series",
    "wigner_of_pure",
    "BracketError",
    "NumericalError",
    "QMGError",
    "TruncationError",
    "ValidationError",
    "DEFAULT_GRID",
    "DEFAULT_H_E",
    "Grid1D",
    "fourier_pair",
    "inverse_fourier_pair",
    "Division",
    "best_division",
    "clear_price",
    "rescale",
    "settle",
    "uniform_price_check",
    "IntensitySpec",
    "fixed_point",
    "profit_intensity",
    "load_scenario",
    "report",
    "run",
]
