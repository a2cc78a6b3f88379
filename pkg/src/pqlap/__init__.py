"""Discrete laboratory for -Δ_p u - Δ_q u = α|u|^{p-2}u + β|u|^{q-2}u + f on (0, 1)."""
from .curves import BoundKind, CurvePoint, CurvesContext, OptimBudget, RegionLabel, classify_region
from .eigen import ConvergenceError, EigenPair, analytic_lambda_k, first_eigenpair, pi_r
from .functionals import DomainError, EnergyReport, Params
from .grid import Grid1D, GridFunction, GridMismatchError, SignClass, classify_sign
from .solve import SolutionRecord, TangencyParams, find_solutions, minimize_energy, shoot

__all__ = [
    "BoundKind", "CurvePoint", "CurvesContext", "OptimBudget", "RegionLabel", "classify_region",
    "ConvergenceError", "EigenPair", "analytic_lambda_k", "first_eigenpair", "pi_r",
    "DomainError", "EnergyReport", "Params",
    "Grid1D", "GridFunction", "GridMismatchError", "SignClass", "classify_sign",
    "SolutionRecord", "TangencyParams", "find_solutions", "minimize_energy", "shoot",
]
