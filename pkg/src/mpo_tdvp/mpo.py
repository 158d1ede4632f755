"""Matrix product operators, spin-1 XXZ model builders and the commutator
superoperator.

MPO site tensors are indexed ``(s, s', left bond, right bond)`` where ``s`` is
the output (row) and ``s'`` the input (column) physical index. Purification
fuses ``sigma = s * d + s'`` (``s`` major), so the vectorization of an operator
``O`` is its row-major flattening and

    vec(H O) = (H kron 1) vec(O),    vec(O H) = (1 kron H^T) vec(O).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, InvalidInputError
from .mps import MPS, inner

__all__ = [
    "MPO",
    "SpinOperators",
    "XxzCouplings",
    "spin1_operators",
    "identity_mpo",
    "product_mpo",
    "mpo_sum",
    "scale_mpo",
    "build_xxz_spin1_hamiltonian",
    "local_energy_mpo",
    "spin_current_mpo",
    "energy_current_mpo",
    "total_sz_mpo",
    "mpo_to_purified_mps",
    "purified_mps_to_mpo",
    "build_commutator_superoperator",
    "apply_mpo",
    "mpo_to_dense",
    "mpo_frobenius_norm",
    "trace_product",
    "DEFAULT_DENSE_CAP",
]

DEFAULT_DENSE_CAP = 729


@dataclass(frozen=True, eq=False)
class MPO:
    """Tensor train of rank-4 tensors ``W[n][s, s', left, right]``."""

    tensors: tuple

    def __init__(self, tensors: Sequence[np.ndarray]):
        tensors = tuple(np.asarray(w, dtype=np.complex128) for w in tensors)
        if len(tensors) == 0:
            raise InvalidInputError("an MPO needs at least one site")
        for n, w in enumerate(tensors):
            if w.ndim != 4:
                raise InvalidInputError(f"site {n}: expected rank-4 tensor, got rank {w.ndim}")
            if w.shape[:2] != tensors[0].shape[:2]:
                raise InvalidInputError(f"site {n}: physical dimensions {w.shape[:2]} differ from site 0")
            if n > 0 and tensors[n - 1].shape[3] != w.shape[2]:
                raise InvalidInputError(f"bond {n}: dimensions {tensors[n - 1].shape[3]} and {w.shape[2]} differ")
            if not np.all(np.isfinite(w)):
                raise InvalidInputError(f"site {n}: non-finite entries")
        if tensors[0].shape[2] != 1 or tensors[-1].shape[3] != 1:
            raise InvalidInputError("boundary bond dimensions must be 1")
        object.__setattr__(self, "tensors", tensors)

    @property
    def nsites(self) -> int:
        return len(self.tensors)

    @property
    def d(self) -> int:
        """Output physical dimension (equal to the input one for square operators)."""
        return self.tensors[0].shape[0]

    @property
    def bond_dims(self) -> tuple:
        return (1,) + tuple(w.shape[3] for w in self.tensors)

    def __len__(self):
        return len(self.tensors)

    def __getitem__(self, n):
        return self.tensors[n]


@dataclass(frozen=True)
class SpinOperators:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    s_plus: np.ndarray
    s_minus: np.ndarray
    identity: np.ndarray

    @property
    def d(self) -> int:
        return self.sz.shape[0]

    def cartesian(self, axis: str) -> np.ndarray:
        return {"x": self.sx, "y": self.sy, "z": self.sz}[axis]


def spin1_operators() -> SpinOperators:
    """Spin-1 matrices in the eigenbasis of ``S^z = diag(1, 0, -1)``."""
    sp = np.sqrt(2.0) * np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]], dtype=np.complex128)
    sm = sp.conj().T
    return SpinOperators(
        sx=0.5 * (sp + sm),
        sy=-0.5j * (sp - sm),
        sz=np.diag([1.0, 0.0, -1.0]).astype(np.complex128),
        s_plus=sp,
        s_minus=sm,
        identity=np.eye(3, dtype=np.complex128),
    )


@dataclass(frozen=True)
class XxzCouplings:
    """Exchange ``J`` and anisotropy ``Delta``; ``Jx = Jy = J`` and ``Jz = J * Delta``."""

    J: float = 1.0
    Delta: float = 1.0

    @property
    def Jx(self) -> float:
        return self.J

    @property
    def Jy(self) -> float:
        return self.J

    @property
    def Jz(self) -> float:
        return self.J * self.Delta

    def component(self, axis: str) -> float:
        return {"x": self.Jx, "y": self.Jy, "z": self.Jz}[axis]


def identity_mpo(nsites: int, d: int) -> MPO:
    eye = np.eye(d, dtype=np.complex128).reshape(d, d, 1, 1)
    return MPO([eye] * nsites)


def product_mpo(nsites: int, ops: dict, coeff=1.0, d: int = 3) -> MPO:
    """Bond-dimension-1 MPO ``coeff * prod_n ops[n]`` (identity on absent sites)."""
    tensors = []
    for n in range(nsites):
        op = ops.get(n, np.eye(d))
        tensors.append(np.asarray(op, dtype=np.complex128).reshape(d, d, 1, 1).copy())
    tensors[0] = tensors[0] * coeff
    return MPO(tensors)


def mpo_sum(terms: Sequence[MPO]) -> MPO:
    """Exact sum of MPOs as block-diagonal direct sum (bond dimensions add)."""
    terms = list(terms)
    if not terms:
        raise InvalidInputError("mpo_sum needs at least one term")
    nsites = terms[0].nsites
    if any(t.nsites != nsites or t[0].shape[:2] != terms[0][0].shape[:2] for t in terms):
        raise InvalidInputError("mpo_sum terms must share site count and physical dimensions")
    if nsites == 1:
        return MPO([sum(t[0] for t in terms)])
    tensors = []
    for n in range(nsites):
        blocks = [t[n] for t in terms]
        d0, d1 = blocks[0].shape[:2]
        if n == 0:
            w = np.concatenate(blocks, axis=3)
        elif n == nsites - 1:
            w = np.concatenate(blocks, axis=2)
        else:
            w = np.zeros((d0, d1, sum(b.shape[2] for b in blocks), sum(b.shape[3] for b in blocks)),
                         dtype=np.complex128)
            i = j = 0
            for b in blocks:
                w[:, :, i:i + b.shape[2], j:j + b.shape[3]] = b
                i += b.shape[2]
                j += b.shape[3]
        tensors.append(w)
    return MPO(tensors)


def scale_mpo(op: MPO, factor) -> MPO:
    return MPO([op[0] * factor, *op.tensors[1:]])


def build_xxz_spin1_hamiltonian(nsites: int, couplings: XxzCouplings) -> MPO:
    """Open-boundary spin-1 XXZ chain
    ``J sum_n (1/2 (S+_n S-_{n+1} + S-_n S+_{n+1}) + Delta Sz_n Sz_{n+1})``.

    Finite-state form with bond dimension 5; bond states are
    0 = nothing placed yet, 1/2/3 = S+/S-/Sz placed on the previous site,
    4 = term completed. Couplings sit on the second site of each bond.
    """
    if nsites < 2:
        raise InvalidInputError(f"need at least 2 sites, got {nsites}")
    sp = spin1_operators()
    J, delta = couplings.J, couplings.Delta
    w = np.zeros((3, 3, 5, 5), dtype=np.complex128)
    w[:, :, 0, 0] = sp.identity
    w[:, :, 0, 1] = sp.s_plus
    w[:, :, 0, 2] = sp.s_minus
    w[:, :, 0, 3] = sp.sz
    w[:, :, 1, 4] = 0.5 * J * sp.s_minus
    w[:, :, 2, 4] = 0.5 * J * sp.s_plus
    w[:, :, 3, 4] = J * delta * sp.sz
    w[:, :, 4, 4] = sp.identity
    tensors = [w[:, :, 0:1, :]] + [w] * (nsites - 2) + [w[:, :, :, 4:5]]
    return MPO([t.copy() for t in tensors])


def _bond_terms(n, couplings):
    sp = spin1_operators()
    J, delta = couplings.J, couplings.Delta
    return [
        (0.5 * J, {n: sp.s_plus, n + 1: sp.s_minus}),
        (0.5 * J, {n: sp.s_minus, n + 1: sp.s_plus}),
        (J * delta, {n: sp.sz, n + 1: sp.sz}),
    ]


def _sum_of_products(nsites, terms):
    return mpo_sum([product_mpo(nsites, ops, coeff) for coeff, ops in terms])


def local_energy_mpo(n: int, nsites: int, couplings: XxzCouplings) -> MPO:
    """Bond energy ``h_n`` on sites ``(n, n+1)`` (0-based ``n`` in ``0..N-2``)."""
    if not 0 <= n <= nsites - 2:
        raise InvalidInputError(f"bond index {n} outside 0..{nsites - 2}")
    return _sum_of_products(nsites, _bond_terms(n, couplings))


def spin_current_mpo(n: int, nsites: int, couplings: XxzCouplings) -> MPO:
    """Spin current ``J (Sx_{n-1} Sy_n - Sy_{n-1} Sx_n)``; 0-based ``n`` in ``1..N-1``."""
    if not 1 <= n <= nsites - 1:
        raise InvalidInputError(f"spin current at site {n} needs sites {n - 1}, {n} inside 0..{nsites - 1}")
    sp = spin1_operators()
    J = couplings.J
    return _sum_of_products(nsites, [
        (J, {n - 1: sp.sx, n: sp.sy}),
        (-J, {n - 1: sp.sy, n: sp.sx}),
    ])


def energy_current_mpo(n: int, nsites: int, couplings: XxzCouplings) -> MPO:
    """Energy current on sites ``(n-1, n, n+1)``; 0-based ``n`` in ``1..N-2``.

    ``Ja Jb (S^b_{n-1} S^c_n S^a_{n+1} - S^a_{n-1} S^c_n S^b_{n+1})`` summed
    over the cyclic triples ``(a, b, c)`` = (x, y, z), (y, z, x), (z, x, y);
    the couplings permute together with the operators.
    """
    if not 1 <= n <= nsites - 2:
        raise InvalidInputError(
            f"energy current at site {n} needs sites {n - 1}..{n + 1} inside 0..{nsites - 1}")
    sp = spin1_operators()
    terms = []
    for a, b, c in (("x", "y", "z"), ("y", "z", "x"), ("z", "x", "y")):
        coeff = couplings.component(a) * couplings.component(b)
        if coeff == 0:
            continue
        sa, sb, sc = sp.cartesian(a), sp.cartesian(b), sp.cartesian(c)
        terms.append((coeff, {n - 1: sb, n: sc, n + 1: sa}))
        terms.append((-coeff, {n - 1: sa, n: sc, n + 1: sb}))
    if not terms:
        return scale_mpo(identity_mpo(nsites, 3), 0.0)
    return _sum_of_products(nsites, terms)


def total_sz_mpo(nsites: int) -> MPO:
    """``sum_n Sz_n`` with bond dimension 2."""
    sp = spin1_operators()
    w = np.zeros((3, 3, 2, 2), dtype=np.complex128)
    w[:, :, 0, 0] = sp.identity
    w[:, :, 0, 1] = sp.sz
    w[:, :, 1, 1] = sp.identity
    if nsites == 1:
        return MPO([sp.sz.reshape(3, 3, 1, 1)])
    return MPO([w[:, :, 0:1, :].copy()] + [w] * (nsites - 2) + [w[:, :, :, 1:2].copy()])


def mpo_to_purified_mps(op: MPO) -> MPS:
    """Fuse ``(s, s')`` into ``sigma = s * d + s'``; bond dimensions are unchanged."""
    return MPS([w.reshape(w.shape[0] * w.shape[1], w.shape[2], w.shape[3]) for w in op.tensors])


def purified_mps_to_mpo(psi: MPS) -> MPO:
    """Inverse of :func:`mpo_to_purified_mps`."""
    d = int(round(np.sqrt(psi.d_loc)))
    if d * d != psi.d_loc:
        raise InvalidInputError(f"local dimension {psi.d_loc} is not a perfect square")
    return MPO([a.reshape(d, d, a.shape[1], a.shape[2]) for a in psi.tensors])


def build_commutator_superoperator(h: MPO) -> MPO:
    """MPO of ``-[H, .] = -H kron 1 + 1 kron H^T`` on the purified local dimension ``d**2``.

    Site tensors are the direct sum of the two terms, so the bond dimension
    doubles. Only ``d**2 x d**2`` local blocks are formed.
    """
    d = h.d
    eye = np.eye(d, dtype=np.complex128)
    left_terms = []
    right_terms = []
    for n, w in enumerate(h.tensors):
        # (s, u, t, v, a, b): output (s, u), input (t, v)
        lt = np.einsum("stab,uv->sutvab", w, eye)
        rt = np.einsum("st,vuab->sutvab", eye, w)
        if n == 0:
            lt = -lt
        left_terms.append(lt.reshape(d * d, d * d, w.shape[2], w.shape[3]))
        right_terms.append(rt.reshape(d * d, d * d, w.shape[2], w.shape[3]))
    return mpo_sum([MPO(left_terms), MPO(right_terms)])


def apply_mpo(op: MPO, psi: MPS) -> MPS:
    """Exact ``op |psi>``; bond dimensions multiply."""
    if op.nsites != psi.nsites or op[0].shape[1] != psi.d_loc:
        raise InvalidInputError("operator and state dimensions do not match")
    tensors = []
    for w, a in zip(op.tensors, psi.tensors):
        t = np.einsum("stab,tcd->sacbd", w, a)
        s = t.shape
        tensors.append(t.reshape(s[0], s[1] * s[2], s[3] * s[4]))
    return MPS(tensors)


def mpo_to_dense(op: MPO, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """Full matrix with entry ``(s, s')`` the product of the site matrices."""
    rows = op[0].shape[0] ** op.nsites
    cols = op[0].shape[1] ** op.nsites
    if max(rows, cols) > cap:
        raise CapacityError(f"dense operator of size {rows}x{cols} exceeds cap {cap}")
    m = op[0][:, :, 0, :]
    for w in op.tensors[1:]:
        r, c, _ = m.shape
        m = np.einsum("rca,stab->rsctb", m, w).reshape(r * w.shape[0], c * w.shape[1], w.shape[3])
    return m[:, :, 0]


def mpo_frobenius_norm(op: MPO) -> float:
    """``sqrt(tr[op^dagger op])`` by contracting the purified train."""
    psi = MPS([w.reshape(-1, w.shape[2], w.shape[3]) for w in op.tensors])
    return float(np.sqrt(max(inner(psi, psi).real, 0.0)))


def trace_product(k: MPO, o: MPS) -> complex:
    """``tr[K O]`` for Hermitian ``K`` and a purified operator ``|O>``, as ``<K|O>``."""
    kp = mpo_to_purified_mps(k)
    if kp.nsites != o.nsites or kp.d_loc != o.d_loc:
        raise InvalidInputError("operator and purified state dimensions do not match")
    return inner(kp, o)
