"""Disordered Heisenberg chains and entanglement-based localization indicators."""

from .model import (
    ChainSpec,
    DenseOperator,
    DisorderRealization,
    build_dense_hamiltonian,
    build_hamiltonian_mpo,
    build_shifted_mpo,
    sample_disorder,
)
from .dense import (
    EigenPair,
    SpectrumSlice,
    dense_reduced_density_matrix,
    full_spectrum,
    mid_spectrum_dense,
    mid_spectrum_selection,
)
from .mps import (
    MatrixProductOperator,
    MatrixProductState,
    canonicalize,
    compress,
    energy_variance,
    expectation,
    mps_from_dense,
    mps_to_dense,
    overlap,
    random_mps,
    two_site_rdm_mps,
)
from .entanglement import (
    TwoSiteDensityMatrix,
    concurrence,
    fit_entanglement_length,
    geometric_entanglement_dense,
    geometric_entanglement_mps,
    negativity,
    npr,
    pair_profile,
    partial_transpose,
    spin_flip,
    total_nn,
)
from .simps import (
    ConvergenceReport,
    SimpsConfig,
    check_outer_convergence,
    choose_targets,
    inner_sweep,
    simps_solve,
)
from .scaling import (
    CollapseParams,
    DisorderCurve,
    collapse_quality,
    collapse_transform,
    derivative_curve,
    fit_polynomial_select_degree,
    grid_search_collapse,
)

__version__ = "0.1.0"
