"""Moments, prices and control variates for polynomial Markov processes."""

from .expm import apply_semigroup, expm, ode_oracle
from .generator import GeneratorMatrix, GeneratorSpec, SpecError, build_matrix, convert_truncation, validate
from .models import Model, catalog, catalog_names, load_model
from .moments import GmmCondition, calibrate, gmm_residuals, harmonic_polynomial, mixed_moment, moment
from .montecarlo import Estimate, MCConfig, estimate_cv, estimate_plain, martingale_check, simulate_terminal
from .polybasis import Basis, PolyVector, enumerate_basis, evaluate, monomial
from .pricing import MarketMap, PolyClaim, fit_payoff, greeks, pilot_fit, price

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "Estimate",
    "GeneratorMatrix",
    "GeneratorSpec",
    "GmmCondition",
    "MCConfig",
    "MarketMap",
    "Model",
    "PolyClaim",
    "PolyVector",
    "SpecError",
    "apply_semigroup",
    "build_matrix",
    "calibrate",
    "catalog",
    "catalog_names",
    "convert_truncation",
    "enumerate_basis",
    "estimate_cv",
    "estimate_plain",
    "evaluate",
    "expm",
    "fit_payoff",
    "gmm_residuals",
    "greeks",
    "harmonic_polynomial",
    "load_model",
    "martingale_check",
    "mixed_moment",
    "moment",
    "monomial",
    "ode_oracle",
    "pilot_fit",
    "price",
    "simulate_terminal",
    "validate",
]
