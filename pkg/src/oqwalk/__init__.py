"""Classification and simulation of homogeneous open quantum walks on the line."""

from .auxmap import build_superoperator, invariant_states, oqw_irreducibility_search
from .classify import (AbsorptionKind, Verdict, classify, classify_absorption, drift,
                       left_trace)
from .coin import (Coin, DensityMatrix, common_eigenvectors, density, parse_coin,
                   parse_density, validate_coin)
from .dynamics import absorption_series, first_return_series, return_series
from .linalg import DEFAULT_TOL, Tolerances
from .montecarlo import SimConfig, estimate_absorption, estimate_drift, estimate_return

__all__ = [
    "AbsorptionKind", "Coin", "DEFAULT_TOL", "DensityMatrix", "SimConfig", "Tolerances", "Verdict",
    "absorption_series", "build_superoperator", "classify", "classify_absorption",
    "common_eigenvectors", "density", "drift", "estimate_absorption", "estimate_drift",
    "estimate_return", "first_return_series", "invariant_states", "left_trace",
    "oqw_irreducibility_search", "parse_coin", "parse_density", "return_series", "validate_coin",
]
