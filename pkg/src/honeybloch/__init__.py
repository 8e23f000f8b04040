"""Floquet-Bloch band structure and Dirac-point dynamics on honeycomb lattices."""

from .bloch import (
    BandStructure,
    BlochEigenpair,
    EffectiveMass,
    assemble_hamiltonian,
    band_grid,
    effective_mass_tensor,
    eigenvalues_banded,
    group_velocity,
    plane_wave_basis,
    solve_bands,
    symmetry_decompose_at_K,
)
from .dirac_env import (
    EnvelopePair,
    conserved_norms,
    dirac_propagate,
    dirac_step_matrix,
    make_envelope,
)
from .dirac_point import (
    DiracPointData,
    cone_slope_fit,
    detect,
    eigenvector_expansion_residual,
    lambda_sharp_fourier_sum,
    lambda_sharp_inner_product,
)
from .errors import (
    ConeFitFailure,
    ConfigError,
    DegeneracyError,
    NotADiracPoint,
    NumericalError,
    SymmetryViolation,
)
from .harness import (
    RunConfig,
    ballistic_experiment,
    default_config,
    effective_mass_experiment,
    lipschitz_check,
    parse_config,
    render_config,
    scaling_study,
)
from .lattice import (
    DualBasis,
    LatticeBasis,
    QuasiMomentum,
    honeycomb_basis,
    index_rotation,
    reduce_to_bz,
    rotate_R,
    vertex_K,
)
from .potential import (
    FourierPotential,
    potential_from_coeffs,
    potential_from_rows,
    symmetry_report,
    three_cosine_potential,
)
from .schrodinger import (
    Supercell,
    WavePacket,
    bloch_evolve,
    bloch_transform,
    build_wavepacket,
    grid_norm,
    split_step_evolve,
)

__all__ = [
    "BandStructure",
    "BlochEigenpair",
    "ConeFitFailure",
    "ConfigError",
    "DegeneracyError",
    "DiracPointData",
    "DualBasis",
    "EffectiveMass",
    "EnvelopePair",
    "FourierPotential",
    "LatticeBasis",
    "NotADiracPoint",
    "NumericalError",
    "QuasiMomentum",
    "RunConfig",
    "Supercell",
    "SymmetryViolation",
    "WavePacket",
    "assemble_hamiltonian",
    "ballistic_experiment",
    "band_grid",
    "bloch_evolve",
    "bloch_transform",
    "build_wavepacket",
    "cone_slope_fit",
    "conserved_norms",
    "default_config",
    "detect",
    "dirac_propagate",
    "dirac_step_matrix",
    "effective_mass_experiment",
    "effective_mass_tensor",
    "eigenvalues_banded",
    "eigenvector_expansion_residual",
    "grid_norm",
    "group_velocity",
    "honeycomb_basis",
    "index_rotation",
    "lambda_sharp_fourier_sum",
    "lambda_sharp_inner_product",
    "lipschitz_check",
    "make_envelope",
    "parse_config",
    "plane_wave_basis",
    "potential_from_coeffs",
    "potential_from_rows",
    "reduce_to_bz",
    "render_config",
    "rotate_R",
    "scaling_study",
    "solve_bands",
    "split_step_evolve",
    "symmetry_decompose_at_K",
    "symmetry_report",
    "three_cosine_potential",
    "vertex_K",
]

__version__ = "0.1.0"
