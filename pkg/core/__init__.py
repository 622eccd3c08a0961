"""
Core modules for the discretized logarithmic p-Laplacian: assembly, functionals, solvers and checks.
"""

from .assembly import AssembledForm, Constants, assemble_form, dump_weights, energy, seminorm
from .critical_point import (
    LinkingGeometry,
    MinimaxOptions,
    SolverReport,
    build_linking_geometry_p2,
    choose_radii,
    mountain_pass,
    solve_linking,
)
from .eigensolver import (
    EigenOptions,
    EigenPair,
    SpectrumP2,
    first_eigenpair,
    second_eigenvalue_heuristic,
    spectrum_p2,
)
from .errors import (
    ConditionError,
    GridMismatchError,
    LinkingGeometryError,
    RadiiSelectionError,
    SolverError,
)
from .functionals import I_p, J_p, phi, phi_lambda, psi_p, rayleigh
from .grid import Grid, GridFunction, build_grid, lp_norm, refine_grid
from .logger import DualLogger
from .nonlinearity import (
    ConditionReport,
    NonlinearitySpec,
    check_growth_conditions,
    check_superlinearity,
    eval_G,
    growth_bound_constant,
    load_custom_table,
    make_builtin,
    make_custom,
    make_power,
)
from .verify import (
    Ensemble,
    InequalityReport,
    VerifyOptions,
    check_corollaries,
    check_lemma_bounds,
    check_log_sobolev,
    check_origin_asymptotics,
    run_suite,
    sample_ensemble,
)

__all__ = [
    "AssembledForm",
    "Constants",
    "assemble_form",
    "dump_weights",
    "energy",
    "seminorm",
    "LinkingGeometry",
    "MinimaxOptions",
    "SolverReport",
    "build_linking_geometry_p2",
    "choose_radii",
    "mountain_pass",
    "solve_linking",
    "EigenOptions",
    "EigenPair",
    "SpectrumP2",
    "first_eigenpair",
    "second_eigenvalue_heuristic",
    "spectrum_p2",
    "ConditionError",
    "GridMismatchError",
    "LinkingGeometryError",
    "RadiiSelectionError",
    "SolverError",
    "I_p",
    "J_p",
    "phi",
    "phi_lambda",
    "psi_p",
    "rayleigh",
    "Grid",
    "GridFunction",
    "build_grid",
    "lp_norm",
    "refine_grid",
    "DualLogger",
    "ConditionReport",
    "NonlinearitySpec",
    "check_growth_conditions",
    "check_superlinearity",
    "eval_G",
    "growth_bound_constant",
    "load_custom_table",
    "make_builtin",
    "make_custom",
    "make_power",
    "Ensemble",
    "InequalityReport",
    "VerifyOptions",
    "check_corollaries",
    "check_lemma_bounds",
    "check_log_sobolev",
    "check_origin_asymptotics",
    "run_suite",
    "sample_ensemble",
]
