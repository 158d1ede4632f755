"""Matrix product states with open boundary conditions.

Site tensors are indexed ``(physical, left bond, right bond)`` throughout the
package. The same container stores purified operators, where the physical
index runs over ``d**2`` values (see :mod:`mpo_tdvp.mpo`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, DegenerateInputError, InvalidInputError
from .linalg import qr_thin, svd_full

__all__ = [
    "MPS",
    "SchmidtSpectrum",
    "random_gaussian_mps",
    "pad_bond_dims",
    "inner",
    "norm",
    "left_normalize",
    "right_normalize",
    "add",
    "scale",
    "scale_per_site",
    "used_bond_dims",
    "embed_into_padding",
    "to_dense_vector",
    "schmidt_spectrum",
    "schmidt_spectrum_dense",
    "von_neumann_entropy",
]


@dataclass(frozen=True, eq=False)
class MPS:
    """Tensor train of rank-3 tensors ``A[n][sigma, left, right]``."""

    tensors: tuple

    def __init__(self, tensors: Sequence[np.ndarray]):
        tensors = tuple(np.asarray(a, dtype=np.complex128) for a in tensors)
        if len(tensors) == 0:
            raise InvalidInputError("an MPS needs at least one site")
        d = tensors[0].shape[0] if tensors[0].ndim == 3 else None
        for n, a in enumerate(tensors):
            if a.ndim != 3:
                raise InvalidInputError(f"site {n}: expected rank-3 tensor, got rank {a.ndim}")
            if a.shape[0] != d:
                raise InvalidInputError(f"site {n}: physical dimension {a.shape[0]} != {d}")
            if n > 0 and tensors[n - 1].shape[2] != a.shape[1]:
                raise InvalidInputError(f"bond {n}: dimensions {tensors[n - 1].shape[2]} and {a.shape[1]} differ")
            if not np.all(np.isfinite(a)):
                raise InvalidInputError(f"site {n}: non-finite entries")
        if tensors[0].shape[1] != 1 or tensors[-1].shape[2] != 1:
            raise InvalidInputError("boundary bond dimensions must be 1")
        object.__setattr__(self, "tensors", tensors)

    @property
    def nsites(self) -> int:
        return len(self.tensors)

    @property
    def d_loc(self) -> int:
        return self.tensors[0].shape[0]

    @property
    def bond_dims(self) -> tuple:
        """Virtual bond dimensions ``(1, D_1, ..., D_{N-1}, 1)``."""
        return (1,) + tuple(a.shape[2] for a in self.tensors)

    def __len__(self):
        return len(self.tensors)

    def __getitem__(self, n):
        return self.tensors[n]


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Normalized Schmidt coefficients across the bond after site ``cut``."""

    cut: int
    coefficients: np.ndarray


def _check_bond_dims(bond_dims, nsites):
    bond_dims = tuple(int(b) for b in bond_dims)
    if len(bond_dims) != nsites + 1:
        raise InvalidInputError(f"need {nsites + 1} bond dimensions, got {len(bond_dims)}")
    if bond_dims[0] != 1 or bond_dims[-1] != 1:
        raise InvalidInputError("boundary bond dimensions must be 1")
    if min(bond_dims) < 1:
        raise InvalidInputError("bond dimensions must be positive")
    return bond_dims


def _check_compatible(a: MPS, b: MPS):
    if a.nsites != b.nsites or a.d_loc != b.d_loc:
        raise InvalidInputError(
            f"incompatible trains: N={a.nsites}, d={a.d_loc} vs N={b.nsites}, d={b.d_loc}")


def random_gaussian_mps(nsites: int, d_loc: int, bond_dims, seed) -> MPS:
    """MPS with entries ``x + iy``, ``x`` and ``y`` independent standard normal.

    Draws come from numpy's PCG64 generator (``np.random.default_rng(seed)``)
    via ``Generator.standard_normal``, site by site; for each site the real
    parts are drawn first, then the imaginary parts, each in C order of the
    tensor shape ``(d_loc, D_left, D_right)``.
    """
    bond_dims = _check_bond_dims(bond_dims, nsites)
    rng = np.random.default_rng(seed)
    tensors = []
    for n in range(nsites):
        shape = (d_loc, bond_dims[n], bond_dims[n + 1])
        re = rng.standard_normal(shape)
        im = rng.standard_normal(shape)
        tensors.append(re + 1j * im)
    return MPS(tensors)


def pad_bond_dims(psi: MPS, target_dims) -> MPS:
    """Zero-pad the virtual bonds; the original block stays in the leading corner."""
    target = _check_bond_dims(target_dims, psi.nsites)
    current = psi.bond_dims
    for n, (c, t) in enumerate(zip(current, target)):
        if t < c:
            raise InvalidInputError(f"bond {n}: target dimension {t} below current {c}")
    tensors = []
    for n, a in enumerate(psi.tensors):
        b = np.zeros((a.shape[0], target[n], target[n + 1]), dtype=np.complex128)
        b[:, : a.shape[1], : a.shape[2]] = a
        tensors.append(b)
    return MPS(tensors)


def _transfer_left(env, a_bra, a_ket):
    """Extend the overlap environment ``env[bra, ket]`` by one site."""
    tmp = np.tensordot(env, a_ket, axes=(1, 1))              # (b, s, k')
    return np.tensordot(a_bra.conj(), tmp, axes=([0, 1], [1, 0]))  # (b', k')


def inner(bra: MPS, ket: MPS) -> complex:
    """Overlap ``<bra|ket>``, antilinear in ``bra``."""
    _check_compatible(bra, ket)
    env = np.ones((1, 1), dtype=np.complex128)
    for a, b in zip(bra.tensors, ket.tensors):
        env = _transfer_left(env, a, b)
    return complex(env[0, 0])


def norm(psi: MPS) -> float:
    return float(np.sqrt(max(inner(psi, psi).real, 0.0)))


def left_normalize(psi: MPS):
    """Left-orthonormalize by a left-to-right QR sweep.

    Returns ``(canonical, nrm)`` where ``canonical`` represents ``psi / nrm``,
    all its tensors are left isometries and the phase of the final scalar
    stays in the last tensor.

    Raises:
        DegenerateInputError: for a zero state.
    """
    tensors = list(psi.tensors)
    nsites = len(tensors)
    for n in range(nsites):
        a = tensors[n]
        s = a.shape
        q, r = qr_thin(a.reshape(s[0] * s[1], s[2]))
        if n < nsites - 1:
            tensors[n] = q.reshape(s[0], s[1], q.shape[1])
            tensors[n + 1] = np.tensordot(r, tensors[n + 1], axes=(1, 1)).transpose(1, 0, 2)
        else:
            nrm = float(r[0, 0].real)
            if not nrm > np.finfo(float).tiny:
                raise DegenerateInputError("cannot normalize a zero-norm state")
            tensors[n] = q.reshape(s[0], s[1], 1)
    return MPS(tensors), nrm


def _lq(m):
    """``m = l @ q`` with orthonormal rows in ``q``."""
    qt, rt = qr_thin(m.conj().T)
    return rt.conj().T, qt.conj().T


def right_normalize(psi: MPS):
    """Right-orthonormalize by a right-to-left LQ sweep; mirror of :func:`left_normalize`."""
    tensors = list(psi.tensors)
    for n in range(len(tensors) - 1, -1, -1):
        a = tensors[n]
        s = a.shape
        l, q = _lq(a.transpose(1, 0, 2).reshape(s[1], s[0] * s[2]))
        if n > 0:
            tensors[n] = q.reshape(q.shape[0], s[0], s[2]).transpose(1, 0, 2)
            tensors[n - 1] = np.tensordot(tensors[n - 1], l, axes=(2, 0))
        else:
            nrm = float(l[0, 0].real)
            if not nrm > np.finfo(float).tiny:
                raise DegenerateInputError("cannot normalize a zero-norm state")
            tensors[n] = q.reshape(1, s[0], s[2]).transpose(1, 0, 2)
    return MPS(tensors), nrm


def add(a: MPS, b: MPS) -> MPS:
    """Exact sum ``|a> + |b>`` with block-diagonal tensors (bond dims add)."""
    _check_compatible(a, b)
    nsites = a.nsites
    if nsites == 1:
        return MPS([a[0] + b[0]])
    tensors = []
    for n, (x, y) in enumerate(zip(a.tensors, b.tensors)):
        d = x.shape[0]
        if n == 0:
            t = np.concatenate([x, y], axis=2)
        elif n == nsites - 1:
            t = np.concatenate([x, y], axis=1)
        else:
            t = np.zeros((d, x.shape[1] + y.shape[1], x.shape[2] + y.shape[2]), dtype=np.complex128)
            t[:, : x.shape[1], : x.shape[2]] = x
            t[:, x.shape[1]:, x.shape[2]:] = y
        tensors.append(t)
    return MPS(tensors)


def scale(psi: MPS, factor) -> MPS:
    """Multiply the state by a global scalar (applied to the first tensor)."""
    return MPS([psi[0] * factor, *psi.tensors[1:]])


def scale_per_site(psi: MPS, site_factor: float) -> MPS:
    """Multiply every tensor by ``site_factor``; the state scales by ``site_factor**N``."""
    return MPS([a * site_factor for a in psi.tensors])


def used_bond_dims(psi: MPS) -> tuple:
    """Size of the leading block at each bond outside of which both adjacent tensors vanish."""
    used = [1]
    for n in range(1, psi.nsites):
        left = np.any(psi[n - 1] != 0, axis=(0, 1))
        right = np.any(psi[n] != 0, axis=(0, 2))
        nz = np.flatnonzero(left | right)
        used.append(int(nz[-1]) + 1 if nz.size else 0)
    used.append(1)
    return tuple(used)


def embed_into_padding(host: MPS, guest: MPS, used_dims=None) -> MPS:
    """Write ``guest`` into the zero padding of ``host``, representing ``|host> + |guest>``.

    At every interior bond the guest block starts right after the host's used
    block (``used_dims``, detected from the sparsity pattern when omitted).
    The bond dimensions of ``host`` are kept.

    Raises:
        CapacityError: when the padding at some bond is too small or not zero.
    """
    _check_compatible(host, guest)
    nsites = host.nsites
    if nsites == 1:
        return MPS([host[0] + guest[0]])
    if used_dims is None:
        used_dims = used_bond_dims(host)
    used_dims = tuple(used_dims)
    hdims, gdims = host.bond_dims, guest.bond_dims
    for n in range(1, nsites):
        if used_dims[n] + gdims[n] > hdims[n]:
            raise CapacityError(
                f"bond {n}: host uses {used_dims[n]} of {hdims[n]}, guest needs {gdims[n]}", bond=n)
        if np.any(host[n - 1][:, :, used_dims[n]:] != 0) or np.any(host[n][:, used_dims[n]:, :] != 0):
            raise CapacityError(f"bond {n}: host padding block is not zero", bond=n)
    tensors = []
    for n in range(nsites):
        t = np.array(host[n], dtype=np.complex128, copy=True)
        g = guest[n]
        lo = 0 if n == 0 else used_dims[n]
        ro = 0 if n == nsites - 1 else used_dims[n + 1]
        t[:, lo:lo + g.shape[1], ro:ro + g.shape[2]] += g
        tensors.append(t)
    return MPS(tensors)


def to_dense_vector(psi: MPS) -> np.ndarray:
    """Full amplitude vector of length ``d_loc**N``, first site most significant."""
    vec = psi[0][:, 0, :]
    for a in psi.tensors[1:]:
        vec = np.tensordot(vec, a, axes=(1, 1)).reshape(-1, a.shape[2])
    return vec[:, 0]


def _normalized_spectrum(s, cut):
    s = np.asarray(s, dtype=float)
    total = np.linalg.norm(s)
    if not total > 0:
        raise DegenerateInputError("zero state has no Schmidt spectrum")
    return SchmidtSpectrum(cut=cut, coefficients=np.sort(s / total)[::-1])


def schmidt_spectrum(psi: MPS, cut: int) -> SchmidtSpectrum:
    """Schmidt coefficients across the bond between sites ``cut - 1`` and ``cut``
    (1-based: sites ``1..cut`` form the left half).

    Left-normalizes, moves the orthogonality center back to site ``cut`` by
    LQ steps and takes the singular values of the center tensor.
    """
    if not 1 <= cut <= psi.nsites - 1:
        raise InvalidInputError(f"cut must lie in 1..{psi.nsites - 1}, got {cut}")
    canon, _ = left_normalize(psi)
    tensors = list(canon.tensors)
    for n in range(psi.nsites - 1, cut - 1, -1):
        a = tensors[n]
        s = a.shape
        l, q = _lq(a.transpose(1, 0, 2).reshape(s[1], s[0] * s[2]))
        tensors[n] = q.reshape(q.shape[0], s[0], s[2]).transpose(1, 0, 2)
        tensors[n - 1] = np.tensordot(tensors[n - 1], l, axes=(2, 0))
    c = tensors[cut - 1]
    _, s, _ = svd_full(c.reshape(-1, c.shape[2]))
    return _normalized_spectrum(s, cut)


def schmidt_spectrum_dense(psi: MPS, cut: int) -> SchmidtSpectrum:
    """Same as :func:`schmidt_spectrum` via the dense amplitude matrix (small N only)."""
    if not 1 <= cut <= psi.nsites - 1:
        raise InvalidInputError(f"cut must lie in 1..{psi.nsites - 1}, got {cut}")
    vec = to_dense_vector(psi)
    _, s, _ = svd_full(vec.reshape(psi.d_loc**cut, -1))
    return _normalized_spectrum(s, cut)


def von_neumann_entropy(spectrum) -> float:
    """``-sum(l**2 * ln(l**2))`` of a normalized Schmidt spectrum (``0 ln 0 = 0``)."""
    lam = spectrum.coefficients if isinstance(spectrum, SchmidtSpectrum) else np.asarray(spectrum)
    p = np.abs(lam) ** 2
    if abs(p.sum() - 1) > 1e-10:
        raise InvalidInputError(f"spectrum not normalized: sum of squares = {p.sum()!r}")
    p = p[p > 0]
    return float(max(-np.sum(p * np.log(p)), 0.0))
