"""Dense exact-diagonalization reference for small chains.

Everything here works on full ``d**N x d**N`` matrices and is meant as the
ground truth the tensor-network code is measured against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DegenerateInputError, InvalidInputError
from .linalg import eigh, svd_full
from .mps import SchmidtSpectrum
from .mpo import (
    DEFAULT_DENSE_CAP,
    XxzCouplings,
    build_xxz_spin1_hamiltonian,
    energy_current_mpo,
    local_energy_mpo,
    mpo_to_dense,
    spin1_operators,
    spin_current_mpo,
    total_sz_mpo,
)

__all__ = [
    "SpectralCache",
    "spectral_cache",
    "dense_evolve",
    "trace_distance",
    "physical_energy",
    "relative_energy_error",
    "ConservationReport",
    "verify_conservation_laws",
    "embed_site_operator",
    "operator_to_purified_vector",
    "operator_schmidt_spectrum",
]


@dataclass(frozen=True)
class SpectralCache:
    """Eigendecomposition ``H = V diag(evals) V^dagger``."""

    evals: np.ndarray
    evecs: np.ndarray


def _check_square(m, cap=DEFAULT_DENSE_CAP):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] > cap:
        raise CapacityError(f"dense dimension {m.shape[0]} exceeds cap {cap}")
    return m


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")


def spectral_cache(h, cap: int = DEFAULT_DENSE_CAP) -> SpectralCache:
    h = _check_square(h, cap)
    evals, evecs = eigh(h)
    return SpectralCache(evals, evecs)


def dense_evolve(h, o, t: float, cache: SpectralCache | None = None,
                 cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Heisenberg-picture ``O(t) = exp(iHt) O exp(-iHt)``."""
    h = _check_square(h, cap)
    o = _check_square(o, cap)
    _check_same_shape(h, o)
    if cache is None:
        cache = spectral_cache(h, cap)
    v = cache.evecs
    phase = np.exp(1j * t * cache.evals)
    # O(t) in the eigenbasis: O_jk exp(i t (E_j - E_k))
    o_eig = v.conj().T @ o @ v
    o_eig = phase[:, np.newaxis] * o_eig * phase.conj()[np.newaxis, :]
    return v @ o_eig @ v.conj().T


def trace_distance(a, b) -> float:
    """Schatten-1 norm (sum of singular values) of ``a - b``."""
    a, b = np.asarray(a), np.asarray(b)
    _check_same_shape(a, b)
    _, s, _ = svd_full(a - b)
    return float(np.sum(s))


def physical_energy(h, o) -> complex:
    """``tr[H O]``."""
    h, o = np.asarray(h), np.asarray(o)
    _check_same_shape(h, o)
    # tr[H O] = sum_ij H_ij O_ji
    return complex(np.sum(h * o.T))


def relative_energy_error(h, o0, ot) -> float:
    """``|tr[H ot] - tr[H o0]| / |tr[H o0]|``.

    Raises:
        DegenerateInputError: if the reference energy is negligible
            (below ``1e-12 ||H||_F ||o0||_F``); report an absolute error then.
    """
    e0 = physical_energy(h, o0)
    et = physical_energy(h, ot)
    if abs(e0) <= 1e-12 * np.linalg.norm(h) * np.linalg.norm(o0):
        raise DegenerateInputError(f"reference energy {e0!r} is negligible")
    return float(abs(et - e0) / abs(e0))


def embed_site_operator(op, site: int, nsites: int) -> np.ndarray:
    """``1 kron ... kron op kron ... kron 1`` with ``op`` on 0-based ``site``."""
    d = op.shape[0]
    return np.kron(np.kron(np.eye(d**site), op), np.eye(d ** (nsites - site - 1)))


@dataclass
class ConservationReport:
    nsites: int
    spin_residuals: dict
    energy_residuals: dict
    total_sz_residual: float
    hamiltonian_norm: float

    @property
    def max_spin_residual(self) -> float:
        return max(self.spin_residuals.values(), default=0.0)

    @property
    def max_energy_residual(self) -> float:
        return max(self.energy_residuals.values(), default=0.0)


def verify_conservation_laws(nsites: int, couplings: XxzCouplings,
                             cap: int = DEFAULT_DENSE_CAP) -> ConservationReport:
    """Dense check of the spin and energy continuity equations.

    For interior sites ``n`` (0-based ``1..N-2``) computes
    ``||i[H, Sz_n] - (Jz_n - Jz_{n+1})||_F``; for interior bonds
    (``1..N-3``) computes ``||i[H, h_n] - (Je_n - Je_{n+1})||_F``; and
    ``||[H, sum_n Sz_n]||_F``.
    """
    if 3**nsites > cap:
        raise CapacityError(f"3**{nsites} exceeds dense cap {cap}")
    h = mpo_to_dense(build_xxz_spin1_hamiltonian(nsites, couplings), cap)
    sz = spin1_operators().sz

    def comm(a, b):
        return a @ b - b @ a

    spin = {}
    for n in range(1, nsites - 1):
        lhs = 1j * comm(h, embed_site_operator(sz, n, nsites))
        rhs = (mpo_to_dense(spin_current_mpo(n, nsites, couplings), cap)
               - mpo_to_dense(spin_current_mpo(n + 1, nsites, couplings), cap))
        spin[n] = float(np.linalg.norm(lhs - rhs))

    energy = {}
    for n in range(1, nsites - 2):
        lhs = 1j * comm(h, mpo_to_dense(local_energy_mpo(n, nsites, couplings), cap))
        rhs = (mpo_to_dense(energy_current_mpo(n, nsites, couplings), cap)
               - mpo_to_dense(energy_current_mpo(n + 1, nsites, couplings), cap))
        energy[n] = float(np.linalg.norm(lhs - rhs))

    total = mpo_to_dense(total_sz_mpo(nsites), cap)
    return ConservationReport(
        nsites=nsites,
        spin_residuals=spin,
        energy_residuals=energy,
        total_sz_residual=float(np.linalg.norm(comm(h, total))),
        hamiltonian_norm=float(np.linalg.norm(h)),
    )


def operator_to_purified_vector(o, nsites: int) -> np.ndarray:
    """Row-major vectorization with the site pairs ``(s_n, s_n')`` adjacent."""
    o = np.asarray(o)
    d = int(round(o.shape[0] ** (1.0 / nsites)))
    if d**nsites != o.shape[0]:
        raise InvalidInputError(f"dimension {o.shape[0]} is not a power of {nsites} sites")
    t = o.reshape((d,) * (2 * nsites))
    order = [i for n in range(nsites) for i in (n, n + nsites)]
    return t.transpose(order).reshape(-1)


def operator_schmidt_spectrum(o, nsites: int, cut: int) -> SchmidtSpectrum:
    """Operator Schmidt coefficients of a dense operator, sites ``0..cut-1`` vs the rest."""
    if not 1 <= cut <= nsites - 1:
        raise InvalidInputError(f"cut must lie in 1..{nsites - 1}, got {cut}")
    vec = operator_to_purified_vector(o, nsites)
    dl = int(round(np.asarray(o).shape[0] ** (cut / nsites))) ** 2
    _, s, _ = svd_full(vec.reshape(dl, -1))
    total = np.linalg.norm(s)
    if not total > 0:
        raise DegenerateInputError("zero operator has no Schmidt spectrum")
    return SchmidtSpectrum(cut=cut, coefficients=s / total)
