"""Shooting, energy diagnostics and threshold sweeps for semipositone radial phi-Laplacian problems."""

__version__ = "0.1.0"

from .bvp import (LemmaReport, SolutionRecord, SweepReport, estimate_lambda0, find_crossing, find_solutions,
                  sweep_lambda, verify_lemma_u0, verify_theorem_bounds)
from .energy import EnergyReport, EnergyTrace, check_energy_laws, energy, energy_derivative_residual
from .models import (HypothesisViolation, ModelError, PhiModel, ProblemInstance, ReactionModel, big_f, big_phi,
                     validate, varphi, varphi_inverse)
from .oracle import LinearBallSolution, linear_exact, linear_instance, richardson_reference
from .shooting import (DEFAULT_GRID, GridConfig, IntegrationError, ShootResult, Trajectory, integrate_ivp,
                       shoot)

__all__ = [
    "DEFAULT_GRID", "EnergyReport", "EnergyTrace", "GridConfig", "HypothesisViolation", "IntegrationError",
    "LemmaReport", "LinearBallSolution", "ModelError", "PhiModel", "ProblemInstance", "ReactionModel",
    "ShootResult", "SolutionRecord", "SweepReport", "Trajectory", "big_f", "big_phi", "check_energy_laws",
    "energy", "energy_derivative_residual", "estimate_lambda0", "find_crossing", "find_solutions",
    "integrate_ivp", "linear_exact", "linear_instance", "richardson_reference", "shoot", "sweep_lambda",
    "validate", "varphi", "varphi_inverse", "verify_lemma_u0", "verify_theorem_bounds",
]
