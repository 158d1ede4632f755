import numpy as np
import pytest
from numpy.testing import assert_allclose

from mpo_tdvp.errors import CapacityError, InvalidInputError
from mpo_tdvp.mpo import (
    MPO,
    XxzCouplings,
    apply_mpo,
    build_commutator_superoperator,
    build_xxz_spin1_hamiltonian,
    energy_current_mpo,
    identity_mpo,
    local_energy_mpo,
    mpo_frobenius_norm,
    mpo_sum,
    mpo_to_dense,
    mpo_to_purified_mps,
    product_mpo,
    purified_mps_to_mpo,
    spin1_operators,
    spin_current_mpo,
    total_sz_mpo,
    trace_product,
)
from mpo_tdvp.mps import random_gaussian_mps, to_dense_vector
from mpo_tdvp.oracle import operator_to_purified_vector

COUPLINGS = XxzCouplings(J=1.0, Delta=1.2)

# spin-1 matrices written out by hand, independent of the library
SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) / np.sqrt(2)
SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]]) / np.sqrt(2)
SZ = np.diag([1.0, 0.0, -1.0])


def kron_at(ops, nsites):
    out = np.eye(1)
    for n in range(nsites):
        out = np.kron(out, ops.get(n, np.eye(3)))
    return out


def brute_force_h(nsites, J, delta):
    h = np.zeros((3**nsites, 3**nsites), dtype=complex)
    for n in range(nsites - 1):
        for op, c in ((SX, J), (SY, J), (SZ, J * delta)):
            h += c * kron_at({n: op, n + 1: op}, nsites)
    return h


def test_spin1_algebra():
    sp = spin1_operators()
    assert_allclose(sp.sx, SX, atol=1e-15)
    assert_allclose(sp.sy, SY, atol=1e-15)
    assert_allclose(sp.sz, SZ, atol=1e-15)
    assert_allclose(sp.sx @ sp.sy - sp.sy @ sp.sx, 1j * sp.sz, atol=1e-14)
    casimir = sp.sx @ sp.sx + sp.sy @ sp.sy + sp.sz @ sp.sz
    assert_allclose(casimir, 2 * np.eye(3), atol=1e-14)


def test_couplings():
    assert (COUPLINGS.Jx, COUPLINGS.Jy, COUPLINGS.Jz) == (1.0, 1.0, 1.2)


@pytest.mark.parametrize("nsites", [2, 3, 4, 5])
def test_hamiltonian_matches_brute_force(nsites):
    h = build_xxz_spin1_hamiltonian(nsites, COUPLINGS)
    assert h.bond_dims == (1,) + (5,) * (nsites - 1) + (1,)
    dense = mpo_to_dense(h)
    assert_allclose(dense, brute_force_h(nsites, 1.0, 1.2), atol=1e-13)
    assert_allclose(dense, dense.conj().T, atol=1e-14)
    assert abs(np.trace(dense)) < 1e-12


def test_two_site_spectrum_isotropic():
    # S1.S2 has eigenvalues (S(S+1) - 4) / 2 for total spin S = 0, 1, 2
    dense = mpo_to_dense(build_xxz_spin1_hamiltonian(2, XxzCouplings(1.0, 1.0)))
    expected = sorted([-2.0] + [-1.0] * 3 + [1.0] * 5)
    assert_allclose(np.linalg.eigvalsh(dense), expected, atol=1e-13)


def test_hamiltonian_xx_limit():
    dense = mpo_to_dense(build_xxz_spin1_hamiltonian(3, XxzCouplings(0.7, 0.0)))
    assert_allclose(dense, brute_force_h(3, 0.7, 0.0), atol=1e-13)


def test_hamiltonian_rejects_single_site():
    with pytest.raises(InvalidInputError):
        build_xxz_spin1_hamiltonian(1, COUPLINGS)


def test_benchmark_purified_bond_dims():
    psi = mpo_to_purified_mps(build_xxz_spin1_hamiltonian(6, COUPLINGS))
    assert psi.d_loc == 9
    assert psi.bond_dims == (1, 5, 5, 5, 5, 5, 1)


@pytest.mark.parametrize("nsites", [3, 4, 5])
def test_local_energies_sum_to_h(nsites):
    h = mpo_to_dense(build_xxz_spin1_hamiltonian(nsites, COUPLINGS))
    total = sum(mpo_to_dense(local_energy_mpo(n, nsites, COUPLINGS)) for n in range(nsites - 1))
    assert_allclose(total, h, atol=1e-13)


def test_local_energy_range():
    with pytest.raises(InvalidInputError):
        local_energy_mpo(3, 4, COUPLINGS)
    with pytest.raises(InvalidInputError):
        spin_current_mpo(0, 4, COUPLINGS)
    with pytest.raises(InvalidInputError):
        energy_current_mpo(3, 4, COUPLINGS)


def test_currents_hermitian_traceless():
    for op in (spin_current_mpo(1, 4, COUPLINGS), energy_current_mpo(2, 4, COUPLINGS)):
        m = mpo_to_dense(op)
        assert_allclose(m, m.conj().T, atol=1e-13)
        assert abs(np.trace(m)) < 1e-12


def test_spin_current_brute_force():
    m = mpo_to_dense(spin_current_mpo(2, 3, COUPLINGS))
    expected = kron_at({1: SX, 2: SY}, 3) - kron_at({1: SY, 2: SX}, 3)
    assert_allclose(m, expected, atol=1e-14)


@pytest.mark.parametrize("nsites", [4, 5])
def test_continuity_equations_dense(nsites):
    h = mpo_to_dense(build_xxz_spin1_hamiltonian(nsites, COUPLINGS))
    for n in range(1, nsites - 1):
        szn = kron_at({n: SZ}, nsites)
        lhs = 1j * (h @ szn - szn @ h)
        rhs = mpo_to_dense(spin_current_mpo(n, nsites, COUPLINGS)) - mpo_to_dense(spin_current_mpo(n + 1, nsites, COUPLINGS))
        assert np.linalg.norm(lhs - rhs) < 1e-12 * np.linalg.norm(h)
    for n in range(1, nsites - 2):
        hn = mpo_to_dense(local_energy_mpo(n, nsites, COUPLINGS))
        lhs = 1j * (h @ hn - hn @ h)
        rhs = (mpo_to_dense(energy_current_mpo(n, nsites, COUPLINGS))
               - mpo_to_dense(energy_current_mpo(n + 1, nsites, COUPLINGS)))
        assert np.linalg.norm(lhs - rhs) < 1e-12 * np.linalg.norm(h)


def test_energy_current_xx_limit_nonzero():
    m = mpo_to_dense(energy_current_mpo(1, 3, XxzCouplings(1.0, 0.0)))
    assert np.linalg.norm(m) > 0.1


def test_total_sz():
    m = mpo_to_dense(total_sz_mpo(4))
    assert_allclose(m, sum(kron_at({n: SZ}, 4) for n in range(4)), atol=1e-14)
    h = mpo_to_dense(build_xxz_spin1_hamiltonian(4, COUPLINGS))
    assert np.linalg.norm(h @ m - m @ h) < 1e-12


def test_product_and_sum():
    p = product_mpo(3, {0: SX, 2: SZ}, coeff=2.0)
    assert_allclose(mpo_to_dense(p), 2 * kron_at({0: SX, 2: SZ}, 3), atol=1e-14)
    s = mpo_sum([p, identity_mpo(3, 3)])
    assert s.bond_dims == (1, 2, 2, 1)
    assert_allclose(mpo_to_dense(s), mpo_to_dense(p) + np.eye(27), atol=1e-14)
    one = mpo_sum([product_mpo(1, {0: SX}), product_mpo(1, {0: SZ})])
    assert_allclose(mpo_to_dense(one), SX + SZ, atol=1e-15)


def test_purification_round_trip():
    h = build_xxz_spin1_hamiltonian(3, COUPLINGS)
    psi = mpo_to_purified_mps(h)
    back = purified_mps_to_mpo(psi)
    for a, b in zip(h.tensors, back.tensors):
        assert np.array_equal(a, b)
    assert_allclose(to_dense_vector(psi), operator_to_purified_vector(mpo_to_dense(h), 3), atol=1e-14)


def test_purification_rejects_non_square_local_dim():
    with pytest.raises(InvalidInputError):
        purified_mps_to_mpo(random_gaussian_mps(2, 5, (1, 2, 1), seed=0))


def test_frobenius_and_trace_product():
    h = build_xxz_spin1_hamiltonian(4, COUPLINGS)
    dense = mpo_to_dense(h)
    assert mpo_frobenius_norm(h) == pytest.approx(np.linalg.norm(dense), rel=1e-12)
    o = random_gaussian_mps(4, 9, (1, 3, 3, 3, 1), seed=4)
    od = mpo_to_dense(purified_mps_to_mpo(o))
    assert trace_product(h, o) == pytest.approx(np.trace(dense @ od), rel=1e-12)


def test_apply_mpo_dense():
    h = build_xxz_spin1_hamiltonian(3, COUPLINGS)
    psi = random_gaussian_mps(3, 3, (1, 2, 2, 1), seed=2)
    out = apply_mpo(h, psi)
    assert out.bond_dims == (1, 10, 10, 1)
    assert_allclose(to_dense_vector(out), mpo_to_dense(h) @ to_dense_vector(psi), atol=1e-12)


def test_dense_cap():
    with pytest.raises(CapacityError):
        mpo_to_dense(build_xxz_spin1_hamiltonian(7, COUPLINGS))
    assert mpo_to_dense(identity_mpo(7, 3), cap=3**7).shape == (3**7, 3**7)


def test_mpo_constructor_validates():
    with pytest.raises(InvalidInputError):
        MPO([np.ones((3, 3, 1, 2)), np.ones((3, 3, 3, 1))])
    with pytest.raises(InvalidInputError):
        MPO([])


def test_superoperator_bond_dims():
    w = build_commutator_superoperator(build_xxz_spin1_hamiltonian(6, COUPLINGS))
    assert w.bond_dims == (1,) + (10,) * 5 + (1,)
    assert w[0].shape[:2] == (9, 9)


def test_superoperator_is_commutator():
    nsites = 3
    h = build_xxz_spin1_hamiltonian(nsites, COUPLINGS)
    hd = mpo_to_dense(h)
    w = mpo_to_dense(build_commutator_superoperator(h))
    assert_allclose(w, w.conj().T, atol=1e-13)
    rng = np.random.default_rng(0)
    for _ in range(3):
        o = rng.standard_normal((27, 27)) + 1j * rng.standard_normal((27, 27))
        expected = operator_to_purified_vector(o @ hd - hd @ o, nsites)
        assert_allclose(w @ operator_to_purified_vector(o, nsites), expected, atol=1e-11)


def test_superoperator_annihilates_conserved():
    nsites = 3
    h = build_xxz_spin1_hamiltonian(nsites, COUPLINGS)
    w = build_commutator_superoperator(h)
    for k in (h, total_sz_mpo(nsites), identity_mpo(nsites, 3)):
        out = apply_mpo(w, mpo_to_purified_mps(k))
        assert np.linalg.norm(to_dense_vector(out)) < 1e-12
