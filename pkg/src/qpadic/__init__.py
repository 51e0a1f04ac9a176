"""Integral operators attached to p-adic kernels |P(x, y)|^s.

The package computes unit-group zeta integrals of one-variable polynomials
(exactly as rational functions of t = p^(-s), or numerically with unit
characters), realizes the associated integral operators as explicit
matrices on coefficient sequences, evaluates their Fredholm characteristic
functions through q-hypergeometric series, certifies zero sets by the
argument principle, and cross-checks every closed form against
independent numerical routes in reproducible experiments.
"""

from .errors import ComputationError, DomainError, QpadicError
from .padic_core import (
    CellOutcome,
    PAdicRational,
    Prime,
    UnitCharacter,
    abs_p,
    character_by_descriptor,
    enumerate_characters,
    is_prime,
    poly_abs_on_cell,
    trivial_character,
    valuation,
)
from .zeta import (
    ExactRationalFunction,
    ZetaProfile,
    stabilization_bounds,
    z0_profile,
    zeta,
    zeta_bruteforce,
    zeta_shift,
)
from .qspecial import (
    EntireFunctionHandle,
    E_func,
    K_mahler,
    basic_phi,
    e_handle,
    hahn_exton_J,
    j_handle,
    k_mahler_handle,
    phi_solution,
    phi_tilde_2_1,
    qpochhammer,
    theta,
    watson_connection,
    watson_residual,
)
from .operator import (
    KernelSpec,
    RationalR,
    TruncatedOperator,
    build_BR_matrix,
    build_min_kernel_matrix,
    build_nonhomog_matrix,
    build_R_from_profile,
    build_rank1_perturbation_matrix,
    build_sequence_matrix,
    discretize_kernel,
    rank1_inverse_defect,
)
from .spectral import (
    CharFnResult,
    MatchReport,
    Spectrum,
    ZeroSearchResult,
    eigenvalues,
    exact_determinant,
    find_zeros,
    fredholm_det_truncated,
    m_matrix,
    match_spectra,
    mp_top_eigenvalues,
    wronski_char_fn,
)
from .experiments import (
    EXPERIMENT_NAMES,
    CheckResult,
    ExperimentConfig,
    ExperimentReport,
    run_experiment,
    run_from_config,
)

__version__ = "0.1.0"

__all__ = [
    "CellOutcome",
    "CharFnResult",
    "CheckResult",
    "ComputationError",
    "DomainError",
    "EXPERIMENT_NAMES",
    "E_func",
    "EntireFunctionHandle",
    "ExactRationalFunction",
    "ExperimentConfig",
    "ExperimentReport",
    "K_mahler",
    "KernelSpec",
    "MatchReport",
    "PAdicRational",
    "QpadicError",
    "Prime",
    "RationalR",
    "Spectrum",
    "TruncatedOperator",
    "UnitCharacter",
    "ZeroSearchResult",
    "ZetaProfile",
    "abs_p",
    "basic_phi",
    "build_BR_matrix",
    "build_min_kernel_matrix",
    "build_nonhomog_matrix",
    "build_R_from_profile",
    "build_rank1_perturbation_matrix",
    "build_sequence_matrix",
    "character_by_descriptor",
    "discretize_kernel",
    "e_handle",
    "eigenvalues",
    "enumerate_characters",
    "exact_determinant",
    "find_zeros",
    "fredholm_det_truncated",
    "hahn_exton_J",
    "is_prime",
    "j_handle",
    "k_mahler_handle",
    "m_matrix",
    "match_spectra",
    "mp_top_eigenvalues",
    "phi_solution",
    "phi_tilde_2_1",
    "poly_abs_on_cell",
    "qpochhammer",
    "rank1_inverse_defect",
    "run_experiment",
    "run_from_config",
    "stabilization_bounds",
    "theta",
    "trivial_character",
    "valuation",
    "watson_connection",
    "watson_residual",
    "wronski_char_fn",
    "z0_profile",
    "zeta",
    "zeta_bruteforce",
    "zeta_shift",
    "__version__",
]
