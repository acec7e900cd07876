"""Gaussian-core energies, criticality and Hessian certificates for periodic point sets."""

from .designs import Shell, certify_critical, design_strength, fourth_moment_deviation, is_balanced, is_weighted_2design
from .dnplus import (
    abc_coefficients,
    average_theta_coefficients,
    cusp_decay_estimate,
    hessian_blocks,
    invariant_basis_eval,
    theta_coefficients,
    threshold_scan,
)
from .energy import (
    DeformationParams,
    certify_local_min,
    deformed_energy,
    gradient,
    hessian,
    reordered_energy_2periodic,
)
from .errors import PeriodicaError
from .lattice import Lattice, enumerate_coset_ball, minimal_norm, shells
from .periodic import (
    PeriodicSetRep,
    build_dn,
    build_dn_plus,
    build_zn,
    difference_classes,
    is_orthogonal_automorphism,
    maximal_period_lattice,
    refine,
    two_periodic_structure,
    weight,
)

__version__ = "0.1.0"
