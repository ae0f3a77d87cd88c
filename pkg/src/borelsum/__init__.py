"""Symbolic-numeric toolkit for singularly perturbed cubic PDE families.

The pipeline: extract the algebraic slow-curve branches, validate every
parameter hypothesis exactly, solve the two Borel-plane convolution
equations by coefficient recursion, and sum back with ray Laplace and
Fourier integrals over good sector coverings - with measured checks for
everything the construction makes checkable (convolution identities,
contraction ratios, residuals, exponential flatness, order estimates).
"""

__version__ = "0.1.0"

from .coeffspace import CoeffFn, MGrid, NormParams, convolve, f_norm, fourier_inverse, norm_beta_mu
from .problem import (
    ConstraintReport,
    ForcingTerm,
    OpTerm,
    ParameterPlan,
    ProblemSpec,
    PTerm,
    check_all,
    derive_plan,
    gevrey_order_inequality,
    validate_problem,
)
from .series import ESeries, TruncSeries, borel_mk, inverse_borel, star_k, star_k_E
from .slowcurve import ABCTriple, SlowCurveBranch, branch, build_abc, verify_branch

__all__ = [
    "CoeffFn",
    "MGrid",
    "NormParams",
    "convolve",
    "f_norm",
    "fourier_inverse",
    "norm_beta_mu",
    "ConstraintReport",
    "ForcingTerm",
    "OpTerm",
    "ParameterPlan",
    "ProblemSpec",
    "PTerm",
    "check_all",
    "derive_plan",
    "gevrey_order_inequality",
    "validate_problem",
    "ESeries",
    "TruncSeries",
    "borel_mk",
    "inverse_borel",
    "star_k",
    "star_k_E",
    "ABCTriple",
    "SlowCurveBranch",
    "branch",
    "build_abc",
    "verify_branch",
]
