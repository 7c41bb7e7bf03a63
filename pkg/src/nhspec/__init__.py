"""Nonharmonic Fourier analysis of boundary value problems at finite truncation.

Biorthogonal eigensystems of a model operator, the associated Fourier
transforms and quantization of symbols, Gohberg compactness diagnostics,
associated matrices with finite-section norms, Gershgorin localization of
spectra, and modal solutions of generalized heat equations with Morse
diagnostics.
"""

__version__ = "0.1.0"

from .errors import (
    NHSError,
    ConstructionError,
    ConfigError,
    NumericalFailure,
    PreconditionError,
)
from .basis import (
    BiorthogonalSystem,
    DomainSpec,
    EigenData,
    enumerate_indices,
    make_system,
    make_torus,
    make_h_twisted,
    make_h_twisted_real,
    make_neumann_rect,
    make_ionkin,
    make_moebius,
    verify_biorthogonality,
    estimate_riesz_constants,
)
from ._quad import QuadratureRule
from .transform import (
    GridFunction,
    SpectralCoefficients,
    build_quadrature,
    default_quadrature,
    forward_transform,
    adjoint_transform,
    inverse_transform,
    parseval,
    parseval_mixed,
    lp_norm,
    sobolev_norm,
)
from .symexpr import parse, evaluate, SymbolExpr
from .quantize import (
    Symbol,
    apply_operator,
    apply_operator_star,
    gohberg_d,
    compactness_verdict,
    symbol_coefficient_decay,
)
from .matrix import (
    AssociatedMatrix,
    build_matrix,
    finite_section_norm,
    crone_report,
    df_split,
)
from .spectrum import (
    gershgorin_discs,
    truncated_eigenvalues,
    containment_check,
    component_multiplicity,
    invertibility_check,
    resolvent_membership,
    section_solve,
    spectrum_report,
)
from .evolution import (
    heat_solve,
    residual_check,
    sobolev_stability,
    critical_points,
    morse_report,
    morse_emergence,
    twisted_trig_hessian,
)

__all__ = [
    "__version__",
    "NHSError",
    "ConstructionError",
    "ConfigError",
    "NumericalFailure",
    "PreconditionError",
    "BiorthogonalSystem",
    "DomainSpec",
    "EigenData",
    "enumerate_indices",
    "make_system",
    "make_torus",
    "make_h_twisted",
    "make_h_twisted_real",
    "make_neumann_rect",
    "make_ionkin",
    "make_moebius",
    "verify_biorthogonality",
    "estimate_riesz_constants",
    "GridFunction",
    "SpectralCoefficients",
    "build_quadrature",
    "default_quadrature",
    "forward_transform",
    "adjoint_transform",
    "inverse_transform",
    "parseval",
    "parseval_mixed",
    "lp_norm",
    "sobolev_norm",
    "Symbol",
    "apply_operator",
    "apply_operator_star",
    "gohberg_d",
    "compactness_verdict",
    "symbol_coefficient_decay",
    "AssociatedMatrix",
    "build_matrix",
    "finite_section_norm",
    "crone_report",
    "df_split",
    "gershgorin_discs",
    "truncated_eigenvalues",
    "containment_check",
    "component_multiplicity",
    "invertibility_check",
    "resolvent_membership",
    "section_solve",
    "spectrum_report",
    "heat_solve",
    "residual_check",
    "sobolev_stability",
    "critical_points",
    "morse_report",
    "morse_emergence",
    "twisted_trig_hessian",
    "QuadratureRule",
    "parse",
    "evaluate",
    "SymbolExpr",
]
