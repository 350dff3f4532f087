"""Geodesics of regularized nonexpanding impulsive waves in (anti-)de Sitter space."""

from __future__ import annotations

from ._jit import NUMBA_ENABLED, backend_name
from .background import BackgroundGeodesic, background_state, crossing_times, seed_family_data
from .core import (BackgroundParams, SeedData, State5, constraint_F, constraint_rate,
                   make_background, metric_norm, validate_seed)
from .errors import (CertificateViolation, ConfigError, ImpgeodError, NumericalFailure,
                     PreconditionError)
from .integrator import (IntegrationConfig, Perturbation, Trajectory, integrate_global,
                         integrate_perturbed_model, integrate_through_wave, rhs)
from .profiles import delta_eval, delta_prime_eval, make_mollifier, profile_catalog

__version__ = "0.1.0"

__all__ = [
    "NUMBA_ENABLED", "backend_name",
    "BackgroundGeodesic", "background_state", "crossing_times", "seed_family_data",
    "BackgroundParams", "SeedData", "State5", "constraint_F", "constraint_rate",
    "make_background", "metric_norm", "validate_seed",
    "CertificateViolation", "ConfigError", "ImpgeodError", "NumericalFailure", "PreconditionError",
    "IntegrationConfig", "Perturbation", "Trajectory", "integrate_global",
    "integrate_perturbed_model", "integrate_through_wave", "rhs",
    "delta_eval", "delta_prime_eval", "make_mollifier", "profile_catalog",
]
