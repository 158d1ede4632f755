"""Dense linear-algebra kernels: QR, SVD, Hermitian eigensolver and a Lanczos
approximation of ``exp(coeff * M) v`` for Hermitian ``M`` given as a matvec.

All higher modules go through these wrappers, so the numerical backend
(numpy/scipy LAPACK) never leaks out.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, KrylovConvergenceError

__all__ = [
    "KrylovParams",
    "qr_thin",
    "svd_full",
    "eigh",
    "expm_hermitian",
    "krylov_expm_apply",
]


@dataclass(frozen=True)
class KrylovParams:
    """Settings for :func:`krylov_expm_apply`.

    Attributes:
        max_dim: Maximal Krylov subspace dimension.
        tol: Stop once successive subspace results differ by less than
            ``tol * ||v||``.
        reorthogonalize: Full Gram-Schmidt reorthogonalization of each new
            Lanczos vector against all previous ones.
    """

    max_dim: int = 30
    tol: float = 1e-12
    reorthogonalize: bool = True

    def __post_init__(self):
        if self.max_dim < 1:
            raise InvalidInputError(f"max_dim must be >= 1, got {self.max_dim}")
        if not self.tol > 0:
            raise InvalidInputError(f"tol must be positive, got {self.tol}")


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidInputError(f"expected a nonempty matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix contains non-finite entries")
    return m


def qr_thin(m):
    """Reduced QR decomposition with a nonnegative real diagonal of ``r``.

    Returns ``(q, r)`` with ``q`` of shape ``(rows, k)``, ``r`` of shape
    ``(k, cols)`` and ``k = min(rows, cols)``.
    """
    m = _as_matrix(m)
    q, r = np.linalg.qr(m, mode="reduced")
    diag = np.diagonal(r)
    absdiag = np.abs(diag)
    phase = np.ones_like(diag)
    nz = absdiag > 0
    phase[nz] = diag[nz] / absdiag[nz]
    q = q * phase[np.newaxis, :]
    r = np.conj(phase)[:, np.newaxis] * r
    # clean up rounding in the phase-rotated diagonal
    k = len(diag)
    r[np.arange(k), np.arange(k)] = absdiag
    return q, r


def svd_full(m):
    """Thin SVD ``m = u @ diag(s) @ vh`` with ``s`` nonincreasing."""
    m = _as_matrix(m)
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # divide-and-conquer occasionally fails to converge; QR-iteration is robust
        u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    return u, s, vh


def eigh(m, herm_tol: float = 1e-12):
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Raises:
        InvalidInputError: if ``m`` is not square or deviates from Hermiticity
            by more than ``herm_tol`` relative to its Frobenius norm.
    """
    m = _as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"eigh needs a square matrix, got shape {m.shape}")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.conj().T) > herm_tol * max(scale, np.finfo(float).tiny):
        raise InvalidInputError("matrix is not Hermitian within tolerance")
    return np.linalg.eigh(m)


def expm_hermitian(m, coeff):
    """Dense ``exp(coeff * m)`` for Hermitian ``m`` via its eigendecomposition."""
    evals, evecs = eigh(m)
    return (evecs * np.exp(coeff * evals)[np.newaxis, :]) @ evecs.conj().T


def _tridiag_expm_e1(alpha, beta, coeff):
    """First column of ``exp(coeff * T)`` for the real symmetric tridiagonal ``T``."""
    if len(alpha) == 1:
        return np.array([np.exp(coeff * alpha[0])])
    evals, evecs = scipy.linalg.eigh_tridiagonal(alpha, beta)
    return evecs @ (np.exp(coeff * evals) * evecs[0, :])


def krylov_expm_apply(
    apply_m: Callable[[np.ndarray], np.ndarray],
    v,
    coeff,
    params: KrylovParams | None = None,
    *,
    strict: bool = False,
) -> np.ndarray:
    """Approximate ``exp(coeff * M) @ v`` by the Lanczos method.

    ``M`` must be Hermitian; it is only accessed through ``apply_m``. The
    vector ``v`` may have any shape, the result has the same shape. For purely
    imaginary ``coeff`` the result has the norm of ``v`` up to rounding.

    Iteration stops once two successive subspace approximations differ by
    less than ``params.tol * ||v||`` or on (happy) breakdown of the Lanczos
    recurrence. If the subspace cap is reached first, the last estimate is
    returned with a warning, or :class:`KrylovConvergenceError` is raised
    when ``strict`` is set.
    """
    if params is None:
        params = KrylovParams()
    v = np.asarray(v)
    shape = v.shape
    v = v.reshape(-1).astype(np.complex128, copy=False)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("start vector contains non-finite entries")
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise InvalidInputError("start vector must be nonzero")

    maxdim = min(params.max_dim, v.size)
    basis = np.empty((maxdim, v.size), dtype=np.complex128)
    basis[0] = v / nrm
    alpha = []
    beta = []
    y_prev = None
    err = np.inf
    for j in range(maxdim):
        w = np.asarray(apply_m(basis[j].reshape(shape))).reshape(-1)
        a = np.vdot(basis[j], w).real
        alpha.append(a)
        w = w - a * basis[j]
        if j > 0:
            w -= beta[j - 1] * basis[j - 1]
        if params.reorthogonalize:
            # two passes of classical Gram-Schmidt ("twice is enough")
            for _ in range(2):
                w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        b = np.linalg.norm(w)

        y = _tridiag_expm_e1(np.array(alpha), np.array(beta), coeff)
        scale = max(abs(x) for x in alpha + beta) if (alpha or beta) else 0.0
        breakdown = b <= 1e-14 * max(scale, 1.0) or j + 1 == v.size
        if y_prev is not None:
            err = np.linalg.norm(y[:-1] - y_prev)
            err = np.sqrt(err**2 + abs(y[-1]) ** 2)
        if breakdown or err < params.tol:
            return (nrm * (y @ basis[: j + 1])).reshape(shape)
        y_prev = y
        if j + 1 < maxdim:
            beta.append(b)
            basis[j + 1] = w / b

    result = (nrm * (y @ basis[:maxdim])).reshape(shape)
    msg = (f"Krylov exponential not converged after {maxdim} vectors "
           f"(successive difference {err:.3e}, tol {params.tol:.1e})")
    if strict:
        raise KrylovConvergenceError(msg, estimate=result, error_estimate=err)
    warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return result
