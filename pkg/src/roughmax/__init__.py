"""Multilinear fractional maximal operators on finite cube families.

Cell-exact maximal functions, shifted dyadic grids, multiple-weight constants,
rough kernels, sparse families and the closed-form power backend.
"""

from .analytic import ExtremalFamily, PowerSpec, extremal_norms, power_integral
from .dyadic import DyadicCube, DyadicPyramid, all_betas, enclosing_dyadic
from .errors import (BudgetError, DivergenceError, DomainError, HypothesisError, InvariantViolation,
                     ParameterError, RangeError, SingularDirectionError)
from .families import CubeFamily, all_cubes_family, dyadic_family, explicit_family
from .grid import CellGrid, Cube, SampledFunctions, integrate, lp_norm, product_average, weak_norm
from .kernels import RoughKernel, SphereFunction
from .operators import (dyadic_maximal, frac_integral, geometric_mean_domination_check, maximal_alpha,
                        rough_maximal, rough_vs_smooth_check, shift_domination_check, weighted_maximal)
from .profile import ExponentProfile
from .sparse import SparseFamily, build_sparse, sparse_norm_bound, verify_sparse
from .weights import WeightVector, ainfty_constant, apq_constant, multi_ap_constant, reverse_holder_check

__all__ = [
    "BudgetError", "CellGrid", "Cube", "CubeFamily", "DivergenceError", "DomainError", "DyadicCube",
    "DyadicPyramid", "ExponentProfile", "ExtremalFamily", "HypothesisError", "InvariantViolation",
    "ParameterError", "PowerSpec", "RangeError", "RoughKernel", "SampledFunctions", "SingularDirectionError",
    "SparseFamily", "SphereFunction", "WeightVector", "ainfty_constant", "all_betas", "all_cubes_family",
    "apq_constant", "build_sparse", "dyadic_family", "dyadic_maximal", "enclosing_dyadic", "explicit_family",
    "extremal_norms", "frac_integral", "geometric_mean_domination_check", "integrate", "lp_norm",
    "maximal_alpha", "multi_ap_constant", "power_integral", "product_average", "reverse_holder_check",
    "rough_maximal", "rough_vs_smooth_check", "shift_domination_check", "sparse_norm_bound", "verify_sparse",
    "weak_norm", "weighted_maximal",
]
