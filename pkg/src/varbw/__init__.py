"""Numerical toolkit for variable-bandwidth Paley-Wiener spaces with step-function profiles."""

from .kernels import ToyModelParams, kernel_generic, kernel_matrix, kernel_toy, pw_projection
from .profile import (
    BandwidthProfile,
    CoefficientTable,
    ExponentialSum,
    coefficient_determinant,
    eval_exponential_sum,
    fundamental_solutions,
    load_profile,
    make_profile,
    propagate_coefficients,
    transfer_matrix,
)
from .signret import SignPattern, SignRetrievalConfig, sign_retrieve
from .spectral import (
    GridFunction,
    MembershipSolver,
    SpectralCutoff,
    SpectralDensityPair,
    breakpoint_grid,
    membership_residual,
    synthesize,
    synthesize_grid,
)

__version__ = "0.1.0"
