"""eigenprod: a desk-scale laboratory for the spectral coefficients of
products of Laplace-Beltrami eigenfunctions on model analytic surfaces.

The pipeline: build an eigenbasis on a model surface (`manifolds`), expand
a product of eigenfunctions into it with cross-checked oracles
(`coefficients`), measure decay envelopes, truncation sets and norm lower
bounds (`analysis`), replay the harmonic-extension/boundary-integral
machinery on the flat torus (`extension`), and probe doubling indices and
sublevel sets (`remez`).  `cli` wraps everything with deterministic JSON
reports.
"""

__version__ = "0.1.0"

from .analysis import (
    DecayFit,
    LowerBoundFit,
    RemarkDecay,
    TruncationResult,
    captured_norm_ratio,
    envelope_dominates,
    find_truncation,
    fit_decay,
    lower_bound_experiment,
    sphere_remark_experiment,
    sphere_rotated_pair_experiment,
)
from .coefficients import (
    CoefficientSeries,
    ProductSpec,
    expand_product,
    gaunt_real,
    parseval_report,
    quadrature_coefficients,
    series_to_csv,
    torus_support_lambda,
    wigner_3j,
)
from .extension import (
    CauchyCheck,
    ExtensionParams,
    HarmonicExtension,
    cauchy_estimate_check,
    compute_extension_params,
    greens_coefficient,
    harmonic_extension_flat,
)
from .manifolds import (
    FlatTorus,
    Mode,
    Resolution,
    RevTorus,
    SpectralBasis,
    Sphere2,
    as_chart_function,
    basis_digest,
    build_basis,
    evaluate,
    load_basis,
    save_basis,
)
from .numerics import (
    QuadratureGrid,
    SymmetricPencil,
    assemble_periodic_galerkin,
    gauss_legendre,
    sym_generalized_eig,
    uniform_periodic,
)
from .remez import (
    DoublingReport,
    GoodSetResult,
    RemezReport,
    doubling_index,
    good_set_experiment,
    harmonic_lift,
    remez_fit,
    sublevel_measure,
)

__all__ = [
    "__version__",
    # numerics
    "QuadratureGrid", "SymmetricPencil", "gauss_legendre", "uniform_periodic",
    "sym_generalized_eig", "assemble_periodic_galerkin",
    # manifolds
    "FlatTorus", "Sphere2", "RevTorus", "Mode", "Resolution", "SpectralBasis",
    "build_basis", "evaluate", "as_chart_function", "save_basis", "load_basis",
    "basis_digest",
    # coefficients
    "ProductSpec", "CoefficientSeries", "expand_product",
    "quadrature_coefficients", "torus_support_lambda", "parseval_report",
    "wigner_3j", "gaunt_real", "series_to_csv",
    # analysis
    "DecayFit", "TruncationResult", "LowerBoundFit", "RemarkDecay",
    "fit_decay", "find_truncation", "captured_norm_ratio",
    "envelope_dominates", "lower_bound_experiment",
    "sphere_rotated_pair_experiment", "sphere_remark_experiment",
    # extension
    "ExtensionParams", "HarmonicExtension", "CauchyCheck",
    "compute_extension_params", "harmonic_extension_flat",
    "greens_coefficient", "cauchy_estimate_check",
    # remez
    "DoublingReport", "RemezReport", "GoodSetResult", "doubling_index",
    "sublevel_measure", "remez_fit", "good_set_experiment", "harmonic_lift",
]
