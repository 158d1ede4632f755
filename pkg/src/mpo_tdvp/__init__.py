"""Heisenberg-picture evolution of matrix product operators with one-site TDVP,
an energy-protecting augmentation by the Hamiltonian, and a dense exact
reference for small spin-1 XXZ chains."""

from .errors import (
    CapacityError,
    DegenerateInputError,
    IntegratorError,
    InvalidInputError,
    KrylovConvergenceError,
    TensorNetworkError,
)
from .linalg import KrylovParams, krylov_expm_apply
from .mpo import (
    MPO,
    XxzCouplings,
    build_commutator_superoperator,
    build_xxz_spin1_hamiltonian,
    mpo_to_dense,
    mpo_to_purified_mps,
    purified_mps_to_mpo,
)
from .mps import MPS, left_normalize, pad_bond_dims, random_gaussian_mps, schmidt_spectrum, von_neumann_entropy
from .oracle import dense_evolve, relative_energy_error, trace_distance
from .tdvp import TdvpRunParams, augmented_evolve, evolve, make_augmented_state, tdvp_sweep_step

__version__ = "0.1.0"
