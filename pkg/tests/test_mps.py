import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mpo_tdvp.errors import CapacityError, DegenerateInputError, InvalidInputError
from mpo_tdvp.mpo import identity_mpo, mpo_to_dense, mpo_to_purified_mps, purified_mps_to_mpo
from mpo_tdvp.mps import (
    MPS,
    SchmidtSpectrum,
    add,
    embed_into_padding,
    inner,
    left_normalize,
    norm,
    pad_bond_dims,
    random_gaussian_mps,
    right_normalize,
    scale,
    scale_per_site,
    schmidt_spectrum,
    schmidt_spectrum_dense,
    to_dense_vector,
    used_bond_dims,
    von_neumann_entropy,
)

BENCH_DIMS = (1, 9, 81, 81, 81, 9, 1)


def rand_state(seed, nsites=4, d=3, bond=3):
    dims = [1] + [bond] * (nsites - 1) + [1]
    return random_gaussian_mps(nsites, d, dims, seed)


def test_constructor_validates():
    with pytest.raises(InvalidInputError):
        MPS([np.ones((2, 1, 2)), np.ones((2, 3, 1))])
    with pytest.raises(InvalidInputError):
        MPS([np.ones((2, 2, 1))])
    with pytest.raises(InvalidInputError):
        MPS([np.full((2, 1, 1), np.nan)])


def test_random_shapes_benchmark_setup():
    psi = random_gaussian_mps(6, 9, (1, 2, 2, 2, 2, 2, 1), seed=11)
    assert [a.shape for a in psi.tensors] == [(9, 1, 2)] + [(9, 2, 2)] * 4 + [(9, 2, 1)]


def test_random_is_deterministic():
    a = random_gaussian_mps(5, 4, (1, 3, 3, 3, 3, 1), seed=123)
    b = random_gaussian_mps(5, 4, (1, 3, 3, 3, 3, 1), seed=123)
    for x, y in zip(a.tensors, b.tensors):
        assert np.array_equal(x, y)


def test_random_statistics():
    psi = random_gaussian_mps(4, 16, (1, 20, 20, 20, 1), seed=5)
    values = np.concatenate([a.ravel() for a in psi.tensors])
    assert values.size >= 10**4
    assert 0.9 < np.var(values.real) < 1.1
    assert 0.9 < np.var(values.imag) < 1.1


def test_random_rejects_bad_bonds():
    with pytest.raises(InvalidInputError):
        random_gaussian_mps(3, 2, (1, 2, 1), seed=0)
    with pytest.raises(InvalidInputError):
        random_gaussian_mps(3, 2, (2, 2, 2, 1), seed=0)


def test_dense_vector_oracle_by_enumeration():
    psi = rand_state(0, nsites=3, d=2, bond=2)
    vec = to_dense_vector(psi)
    for idx in np.ndindex(2, 2, 2):
        amp = psi[0][idx[0]] @ psi[1][idx[1]] @ psi[2][idx[2]]
        assert vec[np.ravel_multi_index(idx, (2, 2, 2))] == pytest.approx(amp[0, 0])


def test_pad_benchmark_dims():
    psi = random_gaussian_mps(6, 9, (1, 2, 2, 2, 2, 2, 1), seed=0)
    padded = pad_bond_dims(psi, BENCH_DIMS)
    assert padded.bond_dims == BENCH_DIMS
    assert np.all(padded[2][:, 2:, :] == 0) and np.all(padded[2][:, :, 2:] == 0)
    assert np.array_equal(padded[2][:, :2, :2], psi[2])
    assert used_bond_dims(padded) == (1, 2, 2, 2, 2, 2, 1)


def test_pad_noop_and_errors():
    psi = rand_state(1)
    same = pad_bond_dims(psi, psi.bond_dims)
    for a, b in zip(psi.tensors, same.tensors):
        assert np.array_equal(a, b)
    with pytest.raises(InvalidInputError):
        pad_bond_dims(psi, (1, 2, 2, 2, 1))


def test_pad_preserves_inner_products():
    psi = rand_state(2, bond=2)
    padded = pad_bond_dims(psi, (1, 3, 5, 3, 1))
    for seed in range(20):
        phi = rand_state(100 + seed, bond=3)
        assert abs(inner(phi, padded) - inner(phi, psi)) <= 1e-14 * max(1.0, abs(inner(phi, psi)))
    assert inner(psi, padded) == pytest.approx(inner(psi, psi), rel=1e-14)


def test_inner_against_dense_and_symmetry():
    a, b = rand_state(3), rand_state(4, bond=2)
    dense = np.vdot(to_dense_vector(a), to_dense_vector(b))
    assert inner(a, b) == pytest.approx(dense, rel=1e-12)
    assert inner(a, b) == pytest.approx(np.conj(inner(b, a)), rel=1e-14)
    nn = inner(a, a)
    assert abs(nn.imag) < 1e-12 * nn.real and nn.real > 0


def test_inner_mismatch():
    with pytest.raises(InvalidInputError):
        inner(rand_state(0, nsites=3), rand_state(0, nsites=4))
    with pytest.raises(InvalidInputError):
        inner(rand_state(0, d=2), rand_state(0, d=3))


def test_inner_is_operator_trace():
    o1 = random_gaussian_mps(2, 9, (1, 3, 1), seed=1)
    o2 = random_gaussian_mps(2, 9, (1, 2, 1), seed=2)
    d1 = mpo_to_dense(purified_mps_to_mpo(o1))
    d2 = mpo_to_dense(purified_mps_to_mpo(o2))
    assert inner(o1, o2) == pytest.approx(np.trace(d1.conj().T @ d2), rel=1e-12)


def test_left_normalize():
    psi = rand_state(5, nsites=5, bond=4)
    canon, nrm = left_normalize(psi)
    for a in canon.tensors[:-1]:
        m = a.reshape(-1, a.shape[2])
        assert np.linalg.norm(m.conj().T @ m - np.eye(m.shape[1])) < 1e-12
    assert inner(canon, canon).real == pytest.approx(1.0, abs=1e-12)
    assert nrm**2 == pytest.approx(inner(psi, psi).real, rel=1e-12)
    assert_allclose(nrm * to_dense_vector(canon), to_dense_vector(psi), atol=1e-12 * nrm)


def test_left_normalize_idempotent():
    canon, _ = left_normalize(rand_state(6))
    again, nrm = left_normalize(canon)
    assert nrm == pytest.approx(1.0, abs=1e-12)
    for a, b in zip(canon.tensors, again.tensors):
        assert_allclose(a, b, atol=1e-12)


def test_right_normalize():
    psi = rand_state(7, nsites=5, bond=4)
    canon, nrm = right_normalize(psi)
    for a in canon.tensors[1:]:
        m = a.transpose(1, 0, 2).reshape(a.shape[1], -1)
        assert np.linalg.norm(m @ m.conj().T - np.eye(m.shape[0])) < 1e-12
    assert_allclose(nrm * to_dense_vector(canon), to_dense_vector(psi), atol=1e-12 * nrm)


def test_normalize_zero_state():
    psi = rand_state(8)
    zero = MPS([psi[0] * 0, *psi.tensors[1:]])
    with pytest.raises(DegenerateInputError):
        left_normalize(zero)
    with pytest.raises(DegenerateInputError):
        right_normalize(zero)


def test_add_linearity_and_shapes():
    a = rand_state(9, bond=2)
    b = rand_state(10, bond=5)
    s = add(a, b)
    assert s.bond_dims == (1, 7, 7, 7, 1)
    for seed in range(20):
        t = rand_state(200 + seed)
        lhs = inner(t, s)
        rhs = inner(t, a) + inner(t, b)
        assert abs(lhs - rhs) <= 1e-12 * (abs(inner(t, a)) + abs(inner(t, b)))


def test_add_cancellation():
    a = rand_state(11)
    diff = add(a, scale(a, -1))
    assert abs(inner(diff, diff)) < 1e-12 * inner(a, a).real


def test_add_single_site():
    a = MPS([np.array([1.0, 2.0]).reshape(2, 1, 1)])
    b = MPS([np.array([3.0, -1.0]).reshape(2, 1, 1)])
    assert_allclose(to_dense_vector(add(a, b)), [4, 1])


def test_scale_per_site():
    psi = rand_state(12, nsites=6)
    assert all(np.array_equal(a, b) for a, b in zip(scale_per_site(psi, 1.0).tensors, psi.tensors))
    scaled = scale_per_site(psi, 1e-3)
    assert norm(scaled) == pytest.approx(1e-18 * norm(psi), rel=1e-12)


def _padded_host(seed, used=2, padded=(1, 9, 81, 81, 81, 9, 1)):
    small = (1,) + (used,) * (len(padded) - 2) + (1,)
    return pad_bond_dims(random_gaussian_mps(len(padded) - 1, 9, small, seed), padded)


def test_embed_matches_sum():
    host = _padded_host(0, padded=(1, 9, 12, 9, 1))
    guest = random_gaussian_mps(4, 9, (1, 5, 5, 5, 1), seed=3)
    x = embed_into_padding(host, guest)
    assert x.bond_dims == host.bond_dims
    reference = add(host, guest)
    for seed in range(20):
        t = random_gaussian_mps(4, 9, (1, 3, 3, 3, 1), seed=50 + seed)
        expected = inner(t, host) + inner(t, guest)
        assert abs(inner(t, x) - expected) <= 1e-12 * (abs(inner(t, host)) + abs(inner(t, guest)))
        assert abs(inner(t, x) - inner(t, reference)) <= 1e-12 * abs(expected)


def test_embed_benchmark_capacity():
    host = _padded_host(1)
    guest = random_gaussian_mps(6, 9, (1, 5, 5, 5, 5, 5, 1), seed=2)
    x = embed_into_padding(host, guest)
    assert x.bond_dims == BENCH_DIMS
    assert used_bond_dims(x) == (1, 7, 7, 7, 7, 7, 1)


def test_embed_zero_guest_and_capacity_error():
    host = _padded_host(2, padded=(1, 6, 6, 6, 1))
    zero_guest = MPS([np.zeros((9, 1, 1))] + [np.zeros((9, 1, 1))] * 3)
    x = embed_into_padding(host, zero_guest)
    for a, b in zip(x.tensors, host.tensors):
        assert np.array_equal(a, b)
    guest = random_gaussian_mps(4, 9, (1, 5, 5, 5, 1), seed=0)
    with pytest.raises(CapacityError) as info:
        embed_into_padding(host, guest)
    assert info.value.bond == 1


def test_embed_rejects_nonzero_padding():
    host, _ = left_normalize(_padded_host(3, padded=(1, 9, 9, 9, 1)))
    guest = random_gaussian_mps(4, 9, (1, 2, 2, 2, 1), seed=0)
    with pytest.raises(CapacityError):
        embed_into_padding(host, guest, used_dims=(1, 2, 2, 2, 1))


def test_schmidt_product_state():
    a = np.zeros((3, 1, 1))
    a[1] = 1.0
    psi = MPS([a, a, a])
    for cut in (1, 2):
        assert_allclose(schmidt_spectrum(psi, cut).coefficients, [1.0])


def test_schmidt_identity_operator():
    psi = mpo_to_purified_mps(identity_mpo(2, 3))
    assert_allclose(schmidt_spectrum(psi, 1).coefficients, [1.0])


@pytest.mark.parametrize("cut", [1, 2, 3])
def test_schmidt_matches_dense(cut):
    psi = random_gaussian_mps(4, 4, (1, 3, 5, 4, 1), seed=9)
    mps_path = schmidt_spectrum(psi, cut).coefficients
    dense_path = schmidt_spectrum_dense(psi, cut).coefficients
    _, s, _ = np.linalg.svd(to_dense_vector(psi).reshape(4**cut, -1))
    s = s / np.linalg.norm(s)
    k = len(mps_path)
    assert_allclose(mps_path, s[:k], atol=1e-10)
    assert_allclose(dense_path[:k], s[:k], atol=1e-10)
    assert np.sum(mps_path**2) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(mps_path) <= 1e-15)


def test_schmidt_invariant_under_normalization():
    psi = rand_state(13, nsites=5, bond=4)
    canon, _ = left_normalize(psi)
    s1 = schmidt_spectrum(psi, 2).coefficients
    s2 = schmidt_spectrum(canon, 2).coefficients
    big = s1 > 1e-8
    assert_allclose(s2[big], s1[big], rtol=1e-10)


def test_schmidt_errors():
    psi = rand_state(0)
    with pytest.raises(InvalidInputError):
        schmidt_spectrum(psi, 0)
    with pytest.raises(InvalidInputError):
        schmidt_spectrum(psi, 4)
    with pytest.raises(DegenerateInputError):
        schmidt_spectrum(MPS([psi[0] * 0, *psi.tensors[1:]]), 1)


def test_entropy_examples():
    assert von_neumann_entropy(SchmidtSpectrum(1, np.array([1.0]))) == 0.0
    assert von_neumann_entropy(np.array([1, 1]) / np.sqrt(2)) == pytest.approx(math.log(2), abs=1e-14)
    for k in (3, 7, 81):
        assert von_neumann_entropy(np.full(k, 1 / np.sqrt(k))) == pytest.approx(math.log(k), abs=1e-12)
    assert von_neumann_entropy(np.array([1.0, 0.0])) == 0.0
    with pytest.raises(InvalidInputError):
        von_neumann_entropy(np.array([1.0, 1.0]))


def _pair(p):
    a, b = np.zeros((2, 1, 2)), np.zeros((2, 2, 1))
    a[0, 0, 0], a[1, 0, 1] = p
    b[0, 0, 0], b[1, 1, 0] = 1, 1
    return [a, b]


def test_entropy_additive_over_product_blocks():
    p, q = np.array([0.8, 0.6]), np.array([0.5, np.sqrt(0.75)])
    hp, hq = von_neumann_entropy(p), von_neumann_entropy(q)
    # spectrum of a product of two independent bipartite states is the outer product
    assert von_neumann_entropy(np.kron(p, q)) == pytest.approx(hp + hq, abs=1e-12)
    psi = MPS(_pair(p) + _pair(q))
    assert von_neumann_entropy(schmidt_spectrum(psi, 1)) == pytest.approx(hp, abs=1e-12)
    assert von_neumann_entropy(schmidt_spectrum(psi, 2)) == pytest.approx(0.0, abs=1e-12)
    assert von_neumann_entropy(schmidt_spectrum(psi, 3)) == pytest.approx(hq, abs=1e-12)
