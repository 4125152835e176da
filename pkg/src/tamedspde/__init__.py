"""Tamed explicit Euler-Galerkin schemes for stochastic evolution equations.

The drift ``A = A1 + A2`` splits into a linear, coercive part ``A1`` and a
superlinear reaction ``A2``; the explicit scheme damps ``A2`` by the taming
factor ``1 / (1 + n^{-1/2} |Pi_m A2 u|)`` so that no single step can move the
state by more than ``sqrt(T dt)`` through the reaction.
"""

from .errors import ConfigurationError, IntegrationError, NumericError
from .experiments import (
    Schedule,
    make_schedule,
    run_convergence,
    run_divergence_contrast,
    run_gap_study,
    run_moments,
)
from .noise import NoisePath, coarsen, sample_path, truncate_modes
from .operators import (
    ModelSpec,
    NoiseSpec,
    fitzhugh_nagumo,
    ginzburg_landau,
    scalar_toy,
    swift_hohenberg,
)
from .spectral import Domain, SpectralField, embed, galerkin_constant, make_basis, project
from .stepper import LevelConfig, integrate, step_reference, step_tamed, step_untamed
from .taming import TamingContext, apply_tamed_A2, taming_factor

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "IntegrationError", "NumericError",
    "Schedule", "make_schedule", "run_convergence", "run_divergence_contrast",
    "run_gap_study", "run_moments",
    "NoisePath", "coarsen", "sample_path", "truncate_modes",
    "ModelSpec", "NoiseSpec", "fitzhugh_nagumo", "ginzburg_landau", "scalar_toy",
    "swift_hohenberg",
    "Domain", "SpectralField", "embed", "galerkin_constant", "make_basis", "project",
    "LevelConfig", "integrate", "step_reference", "step_tamed", "step_untamed",
    "TamingContext", "apply_tamed_A2", "taming_factor",
]
