"""Exact cutting-plane solver for Euclidean max-sum selection problems."""

from .baselines import BruteForceResult, brute_force, glover_model
from .cuts import (ALGO_FORCED, ALGO_REPEATED, LP_ALL, LP_NONE, LP_ROOT, CutPool,
                   InfeasibleInstanceError, SolveReport, SolverConfig, TangentCut,
                   build_master, initial_cut, lp_tangent_loop, solve,
                   solve_forced_cardinality, solve_repeated_ilp)
from .edm import (DistanceMatrix, PointSet, SpectralSignature, build_edm,
                  is_concave_direction, jacobi_eigenvalues, objective,
                  spectral_signature, tangent_coefficients, tangent_value,
                  valid_by_cardinality, valid_by_witness)
from .instances import (FormatError, GeneratorSpec, SplitMix64, gen_blmsdp, gen_cdp,
                        gen_gdp_f, gen_gdp_v, generate, load_coordinates_csv,
                        parse_instance, serialize_instance)
from .lp import LpNumericalError, LpSolution, solve_lp
from .milp import MilpLimits, MilpSolution, solve_milp
from .model import (EmspInstance, LinearConstraint, MilpModel, VariableDecl,
                    is_feasible, max_cardinality_model, validate)

__version__ = "0.1.0"

__all__ = [
    "ALGO_FORCED", "ALGO_REPEATED", "BruteForceResult", "CutPool", "DistanceMatrix",
    "EmspInstance", "FormatError", "GeneratorSpec", "InfeasibleInstanceError",
    "LP_ALL", "LP_NONE", "LP_ROOT", "LinearConstraint", "LpNumericalError",
    "LpSolution", "MilpLimits", "MilpModel", "MilpSolution", "PointSet",
    "SolveReport", "SolverConfig", "SpectralSignature", "SplitMix64", "TangentCut",
    "VariableDecl", "brute_force", "build_edm", "build_master", "gen_blmsdp",
    "gen_cdp", "gen_gdp_f", "gen_gdp_v", "generate", "glover_model", "initial_cut",
    "is_concave_direction", "is_feasible", "jacobi_eigenvalues",
    "load_coordinates_csv", "lp_tangent_loop", "max_cardinality_model", "objective",
    "parse_instance", "serialize_instance", "solve", "solve_forced_cardinality",
    "solve_lp", "solve_milp", "solve_repeated_ilp", "spectral_signature",
    "tangent_coefficients", "tangent_value", "valid_by_cardinality",
    "valid_by_witness", "validate",
]
