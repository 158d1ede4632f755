"""One-site TDVP for tensor trains under an MPO generator, and the augmented
scheme that protects a conserved overlap such as ``tr[H O(t)]``.

The integrator solves ``i d/dt |psi> = W |psi>`` projected onto the tangent
space of the fixed-bond-dimension manifold. One time step is the symmetric
composition of a left-to-right and a right-to-left half sweep, each with step
``tau / 2``: site tensors evolve forward under the effective one-site map,
the bond matrices produced by the QR/LQ splits evolve backward under the
effective zero-site map.

Environment blocks are indexed ``(bra bond, operator bond, ket bond)``;
``left[n]`` contracts sites ``0..n-1`` and ``right[n]`` contracts sites
``n..N-1``, so ``left[0]`` and ``right[N]`` are the trivial ``(1, 1, 1)``
blocks.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, IntegratorError, InvalidInputError, KrylovConvergenceError
from .linalg import KrylovParams, krylov_expm_apply, qr_thin
from .mpo import MPO, mpo_to_purified_mps
from .mps import (
    MPS,
    add,
    embed_into_padding,
    inner,
    left_normalize,
    right_normalize,
    scale,
    scale_per_site,
)

__all__ = [
    "EnvironmentBlocks",
    "TdvpRunParams",
    "ObservableTrace",
    "AugmentedState",
    "MultiAugmentation",
    "OBSERVABLES",
    "build_environments",
    "expectation",
    "is_left_canonical",
    "tdvp_sweep_step",
    "evolve",
    "make_augmented_state",
    "augmented_evolve",
    "multi_conserved_augment",
    "dense_tangent_projector",
]

OBSERVABLES = frozenset({"norm", "superop_energy", "physical_energy"})


# --- local contractions ------------------------------------------------------

def _update_left(env, a, w):
    """``env'[b', w', k'] = sum conj(a[s, b, b']) env[b, w, k] w[s, t, w, w'] a[t, k, k']``."""
    t = np.tensordot(env, a, axes=(2, 1))                    # (b, w, t, k')
    t = np.tensordot(t, w, axes=([1, 2], [2, 1]))            # (b, k', s, w')
    t = np.tensordot(a.conj(), t, axes=([0, 1], [2, 0]))     # (b', k', w')
    return t.transpose(0, 2, 1)


def _update_right(env, a, w):
    """``env[b, w, k] = sum conj(a[s, b, b']) w[s, t, w, w'] a[t, k, k'] env'[b', w', k']``."""
    t = np.tensordot(a, env, axes=(2, 2))                    # (t, k, b', w')
    t = np.tensordot(w, t, axes=([1, 3], [0, 3]))            # (s, w, k, b')
    return np.tensordot(a.conj(), t, axes=([0, 2], [0, 3]))  # (b, w, k)


def _apply_site(left, w, right, a):
    """Effective one-site map applied to the site tensor ``a[s, k, k']``."""
    t = np.tensordot(left, a, axes=(2, 1))                   # (b, w, t, k')
    t = np.tensordot(t, w, axes=([1, 2], [2, 1]))            # (b, k', s, w')
    t = np.tensordot(t, right, axes=([1, 3], [2, 1]))        # (b, s, c)
    return t.transpose(1, 0, 2)


def _apply_bond(left, right, c):
    """Effective zero-site map applied to the bond matrix ``c[k, k']``."""
    t = np.tensordot(left, c, axes=(2, 0))                   # (b, w, k')
    return np.tensordot(t, right, axes=([1, 2], [1, 2]))     # (b, c)


def _trivial_block():
    return np.ones((1, 1, 1), dtype=np.complex128)


def _fingerprint(tensors) -> str:
    h = hashlib.sha1()
    for a in tensors:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


@dataclass
class EnvironmentBlocks:
    """Partial contractions of ``<psi|W|psi>`` from both ends.

    ``tag`` is a digest of the site tensors the blocks were built from.
    """

    left: list
    right: list
    tag: str

    def scalar(self, n: int) -> complex:
        """``<psi|W|psi>`` from the blocks meeting at bond ``n``."""
        return complex(np.tensordot(self.left[n], self.right[n], axes=([0, 1, 2], [0, 1, 2])))


def _check_operator(psi: MPS, w: MPO):
    if w.nsites != psi.nsites or w[0].shape[0] != psi.d_loc or w[0].shape[1] != psi.d_loc:
        raise InvalidInputError(
            f"operator (N={w.nsites}, d={w[0].shape[:2]}) does not act on the state "
            f"(N={psi.nsites}, d={psi.d_loc})")


def is_left_canonical(psi: MPS, tol: float = 1e-8) -> bool:
    """Whether all tensors but the last are left isometries."""
    for a in psi.tensors[:-1]:
        m = a.reshape(-1, a.shape[2])
        if np.linalg.norm(m.conj().T @ m - np.eye(m.shape[1])) > tol:
            return False
    return True


def build_environments(psi: MPS, w: MPO) -> EnvironmentBlocks:
    """All left and right environment blocks of ``<psi|W|psi>``."""
    _check_operator(psi, w)
    nsites = psi.nsites
    left = [_trivial_block()]
    for n in range(nsites):
        left.append(_update_left(left[-1], psi[n], w[n]))
    right = [None] * (nsites + 1)
    right[nsites] = _trivial_block()
    for n in range(nsites - 1, -1, -1):
        right[n] = _update_right(right[n + 1], psi[n], w[n])
    return EnvironmentBlocks(left=left, right=right, tag=_fingerprint(psi.tensors))


def expectation(psi: MPS, w: MPO) -> complex:
    """``<psi|W|psi>`` by a single left-to-right contraction."""
    _check_operator(psi, w)
    env = _trivial_block()
    for a, op in zip(psi.tensors, w.tensors):
        env = _update_left(env, a, op)
    return complex(env[0, 0, 0])


def _check_sweepable(psi: MPS):
    dims = psi.bond_dims
    d = psi.d_loc
    for n in range(psi.nsites):
        if dims[n + 1] > d * dims[n] or dims[n] > d * dims[n + 1]:
            raise InvalidInputError(
                f"site {n}: bond dimensions {dims[n]}, {dims[n + 1]} are not reachable "
                f"with local dimension {d}; the QR splits would change them")


class _Sweeper:
    """Mutable integrator state: site tensors plus environments.

    Between steps the orthogonality center sits on the first site, so a step
    is a left-to-right half sweep followed by the mirrored right-to-left one.
    """

    def __init__(self, psi: MPS, w: MPO, krylov: KrylovParams):
        _check_operator(psi, w)
        if not is_left_canonical(psi):
            raise InvalidInputError("TDVP expects a left-canonical train")
        _check_sweepable(psi)
        self.w = w.tensors
        self.krylov = krylov
        canon, nrm = right_normalize(psi)
        self.tensors = list(canon.tensors)
        self.tensors[0] = self.tensors[0] * nrm
        nsites = psi.nsites
        self.left = [None] * (nsites + 1)
        self.left[0] = _trivial_block()
        self.right = [None] * (nsites + 1)
        self.right[nsites] = _trivial_block()
        for n in range(nsites - 1, 0, -1):
            self.right[n] = _update_right(self.right[n + 1], self.tensors[n], self.w[n])

    def _expm(self, apply, v, coeff, where):
        try:
            return krylov_expm_apply(apply, v, coeff, self.krylov, strict=True)
        except KrylovConvergenceError as exc:
            raise IntegratorError(f"local exponential failed at {where}: {exc}", site=where) from exc

    def _evolve_site(self, n, dt):
        left, w, right = self.left[n], self.w[n], self.right[n + 1]
        self.tensors[n] = self._expm(lambda a: _apply_site(left, w, right, a),
                                     self.tensors[n], -1j * dt, n)

    def _evolve_bond(self, n, c, dt):
        """Backward evolution of the bond matrix between sites ``n - 1`` and ``n``."""
        left, right = self.left[n], self.right[n]
        return self._expm(lambda x: _apply_bond(left, right, x), c, 1j * dt, n)

    def sweep_right_to_left(self, dt):
        for n in range(len(self.tensors) - 1, -1, -1):
            self._evolve_site(n, dt)
            if n == 0:
                break
            a = self.tensors[n]
            s = a.shape
            # LQ split: a = c @ q with q a right isometry
            qt, rt = qr_thin(a.transpose(1, 0, 2).reshape(s[1], s[0] * s[2]).conj().T)
            c, q = rt.conj().T, qt.conj().T
            self.tensors[n] = q.reshape(s[1], s[0], s[2]).transpose(1, 0, 2)
            self.right[n] = _update_right(self.right[n + 1], self.tensors[n], self.w[n])
            c = self._evolve_bond(n, c, dt)
            self.tensors[n - 1] = np.tensordot(self.tensors[n - 1], c, axes=(2, 0))

    def sweep_left_to_right(self, dt):
        nsites = len(self.tensors)
        for n in range(nsites):
            self._evolve_site(n, dt)
            if n == nsites - 1:
                break
            a = self.tensors[n]
            s = a.shape
            q, r = qr_thin(a.reshape(s[0] * s[1], s[2]))
            self.tensors[n] = q.reshape(s)
            self.left[n + 1] = _update_left(self.left[n], self.tensors[n], self.w[n])
            r = self._evolve_bond(n + 1, r, dt)
            self.tensors[n + 1] = np.tensordot(r, self.tensors[n + 1], axes=(1, 1)).transpose(1, 0, 2)

    def step(self, tau):
        self.sweep_left_to_right(0.5 * tau)
        self.sweep_right_to_left(0.5 * tau)

    def state(self) -> MPS:
        """Left-canonical copy of the current train (norm kept in the last tensor)."""
        canon, nrm = left_normalize(MPS(self.tensors))
        return MPS([*canon.tensors[:-1], canon.tensors[-1] * nrm])

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[0]))

    def energy(self) -> complex:
        a = self.tensors[0]
        return complex(np.vdot(a, _apply_site(self.left[0], self.w[0], self.right[1], a)))


def tdvp_sweep_step(psi: MPS, w: MPO, tau: float, krylov: KrylovParams | None = None) -> MPS:
    """One second-order one-site TDVP step of size ``tau`` for ``i d/dt psi = W psi``.

    ``psi`` must be left-canonical; the result is left-canonical as well.
    Bond dimensions are unchanged.
    """
    sweeper = _Sweeper(psi, w, krylov or KrylovParams())
    sweeper.step(tau)
    return sweeper.state()


@dataclass(frozen=True)
class TdvpRunParams:
    """Step size, step count, Krylov settings and the observables to record."""

    tau: float
    n_steps: int
    krylov: KrylovParams = field(default_factory=KrylovParams)
    record: frozenset = OBSERVABLES

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidInputError(f"tau must be positive, got {self.tau}")
        if self.n_steps < 0:
            raise InvalidInputError(f"n_steps must be nonnegative, got {self.n_steps}")
        unknown = set(self.record) - OBSERVABLES
        if unknown:
            raise InvalidInputError(f"unknown observables {sorted(unknown)}")
        object.__setattr__(self, "record", frozenset(self.record))

    @property
    def t_final(self) -> float:
        return self.tau * self.n_steps

    @classmethod
    def for_final_time(cls, t_final: float, tau: float, **kwargs) -> "TdvpRunParams":
        """Parameters reaching ``t_final`` in an integer number of steps of size ``tau``."""
        n = int(round(t_final / tau))
        if n < 1 or abs(n * tau - t_final) > 1e-12:
            raise InvalidInputError(f"tau = {tau!r} does not divide t_final = {t_final!r}")
        return cls(tau=tau, n_steps=n, **kwargs)


@dataclass
class ObservableTrace:
    """Observables after each step; index 0 is the initial state."""

    times: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    superop_energy: list = field(default_factory=list)
    physical_energy: list = field(default_factory=list)

    @staticmethod
    def _drift(values) -> float:
        if len(values) < 2:
            return 0.0
        values = np.asarray(values)
        ref = abs(values[0])
        if ref == 0:
            return float(np.max(np.abs(values - values[0])))
        return float(np.max(np.abs(values - values[0])) / ref)

    def norm_drift(self) -> float:
        """Maximal relative deviation of the norm from its initial value."""
        return self._drift(self.norm)

    def superop_energy_drift(self) -> float:
        """Maximal relative deviation of ``<psi|W|psi>`` from its initial value."""
        return self._drift(self.superop_energy)


def evolve(psi: MPS, w: MPO, params: TdvpRunParams, h_state: MPS | None = None):
    """Apply ``params.n_steps`` TDVP steps.

    Returns ``(final, trace)``. ``physical_energy`` is recorded as
    ``<h_state|psi>`` and only when ``h_state`` is given.
    """
    sweeper = _Sweeper(psi, w, params.krylov)
    trace = ObservableTrace()

    def record(t):
        trace.times.append(t)
        if "norm" in params.record:
            trace.norm.append(sweeper.norm())
        if "superop_energy" in params.record:
            trace.superop_energy.append(sweeper.energy())
        if "physical_energy" in params.record and h_state is not None:
            trace.physical_energy.append(inner(h_state, sweeper.state()))

    record(0.0)
    for k in range(params.n_steps):
        sweeper.step(params.tau)
        record((k + 1) * params.tau)
    return sweeper.state(), trace


# --- augmented scheme ----------------------------------------------------------

@dataclass(frozen=True)
class AugmentedState:
    """``|X> = |O> + gamma |H>`` stored left-canonically as ``norm * x``.

    Attributes:
        x: left-canonical unit-norm train of ``|X> / norm``.
        norm: the scalar removed by the left normalization.
        gamma_site_factor: per-site scale of the purified ``|H>`` tensors.
        h_state: the unscaled purified ``|H>``.
    """

    x: MPS
    norm: float
    gamma_site_factor: float
    h_state: MPS

    @property
    def gamma(self) -> float:
        return self.gamma_site_factor ** self.h_state.nsites

    def extract(self, x_t: MPS) -> MPS:
        """``norm * |x_t> - gamma |H>`` by exact block addition."""
        result = scale(x_t, self.norm)
        if self.gamma == 0:
            return result
        return add(result, scale(self.h_state, -self.gamma))


def make_augmented_state(o: MPS, h: MPO, gamma_site_factor: float) -> AugmentedState:
    """Embed ``gamma_site_factor**N |H>`` into the zero padding of ``o`` and left-normalize.

    ``o`` is the zero-padded purified operator before normalization; its
    padding must have room for the bonds of ``|H>``.
    """
    if gamma_site_factor < 0:
        raise InvalidInputError("gamma_site_factor must be nonnegative")
    h_state = mpo_to_purified_mps(h)
    x_raw = embed_into_padding(o, scale_per_site(h_state, gamma_site_factor))
    x, nrm = left_normalize(x_raw)
    return AugmentedState(x=x, norm=nrm, gamma_site_factor=float(gamma_site_factor), h_state=h_state)


def augmented_evolve(aug: AugmentedState, w: MPO, params: TdvpRunParams):
    """Evolve ``|X>`` with TDVP and return ``(|X(t)> - gamma |H>, trace)``.

    The subtraction is exact, so the bond dimensions of the result exceed
    those of ``aug.x`` by the bond dimensions of ``|H>``.
    """
    x_t, trace = evolve(aug.x, w, params, h_state=aug.h_state)
    return aug.extract(x_t), trace


@dataclass(frozen=True)
class MultiAugmentation:
    """``|X> = |O> + sum_j gamma_j |K_j>`` (unnormalized) with its constituents."""

    x: MPS
    terms: tuple
    grew: bool

    def extract(self, x_t: MPS) -> MPS:
        """Subtract ``sum_j gamma_j |K_j>`` from an evolved ``|X>`` exactly."""
        result = x_t
        for k_state, gamma in self.terms:
            if gamma != 0:
                result = add(result, scale(k_state, -gamma))
        return result


def multi_conserved_augment(o: MPS, ks: Sequence, *, allow_growth: bool = False) -> MultiAugmentation:
    """Add several conserved operators ``gamma_j K_j`` to ``o``.

    Each ``|K_j>`` is scaled per site by ``|gamma_j|**(1/N)`` (sign on the
    first tensor) and written into the padding of the running sum. When the
    padding is exhausted a :class:`CapacityError` is raised, unless
    ``allow_growth`` is set, in which case the term is appended by
    block-diagonal addition and ``grew`` is set.
    """
    x = o
    grew = False
    terms = []
    nsites = o.nsites
    for k, gamma in ks:
        k_state = mpo_to_purified_mps(k)
        terms.append((k_state, gamma))
        if gamma == 0:
            continue
        factor = abs(gamma) ** (1.0 / nsites)
        guest = scale(scale_per_site(k_state, factor), gamma / abs(gamma))
        try:
            x = embed_into_padding(x, guest)
        except CapacityError:
            if not allow_growth:
                raise
            x = add(x, guest)
            grew = True
    return MultiAugmentation(x=x, terms=tuple(terms), grew=grew)


def dense_tangent_projector(psi: MPS) -> np.ndarray:
    """Dense orthogonal projector onto the one-site tangent space at ``psi`` (small N only).

    ``P = sum_n PL(n-1) x 1 x PR(n+1) - sum_n PL(n) x PR(n+1)``, with left
    projectors from the left-canonical and right projectors from the
    right-canonical gauge of ``psi``.
    """
    nsites, d = psi.nsites, psi.d_loc
    lc, _ = left_normalize(psi)
    rc, _ = right_normalize(psi)

    def left_basis(n):
        # columns: states on sites 0..n-1
        m = np.ones((1, 1), dtype=np.complex128)
        for a in lc.tensors[:n]:
            m = np.tensordot(m, a, axes=(1, 1)).reshape(-1, a.shape[2])
        return m

    def right_basis(n):
        # rows: states on sites n..N-1
        m = np.ones((1, 1), dtype=np.complex128)
        for a in reversed(rc.tensors[n:]):
            m = np.tensordot(a, m, axes=(2, 0)).transpose(1, 0, 2).reshape(a.shape[1], -1)
        return m

    dim = d**nsites
    proj = np.zeros((dim, dim), dtype=np.complex128)
    lp = [left_basis(n) @ left_basis(n).conj().T for n in range(nsites + 1)]
    rp = [right_basis(n).T @ right_basis(n).conj() for n in range(nsites + 1)]
    for n in range(nsites):
        proj += np.kron(np.kron(lp[n], np.eye(d)), rp[n + 1])
    for n in range(1, nsites):
        proj -= np.kron(lp[n], rp[n])
    return proj
